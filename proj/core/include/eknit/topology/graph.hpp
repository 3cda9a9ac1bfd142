#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eknit/common.hpp"
#include "eknit/topology/layout.hpp"

namespace eknit::topology {

/// A stretch of one group's threads, `x_from_cm`..`x_to_cm`.
struct GroupSpan {
    std::string group_id;
    double x_from_cm = 0.0;
    double x_to_cm = 0.0;

    bool operator==(const GroupSpan&) const = default;
};

/// A broken thread: every segment of `channel` overlapping `span` is removed.
struct OpenCut {
    Channel channel = Channel::Vcc;
    GroupSpan span;
};

enum class SegmentKind : std::uint8_t { Group, Strip };

struct Edge {
    std::size_t a = 0;
    std::size_t b = 0;
    double ohm = 0.0;
    double length_m = 0.0;
    SegmentKind kind = SegmentKind::Group;
    std::size_t owner = 0;  // group or strip index
    double lo_cm = 0.0;     // x extent for group segments, y extent for strip segments
    double hi_cm = 0.0;

    /// True when a group segment shares a stretch of positive length with `span`.
    bool overlaps(std::size_t group, double x_from, double x_to) const;
};

/// The resistive network of a single channel. Nodes joined through a
/// connected junction are merged, so every edge has a strictly positive
/// resistance and the network has no self-loops.
class ChannelNetwork {
  public:
    std::size_t node_count() const { return node_count_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t site_node(std::size_t site) const { return site_nodes_[site]; }
    std::size_t component(std::size_t node) const { return components_[node]; }
    std::size_t component_count() const { return component_count_; }
    bool connected(std::size_t node_a, std::size_t node_b) const {
        return components_[node_a] == components_[node_b];
    }

    /// Shortest conductive length between two nodes, in metres.
    std::optional<double> path_length_m(std::size_t from, std::size_t to) const;

    /// Edge indices of the shortest conductive route (ties broken by node id).
    std::optional<std::vector<std::size_t>> shortest_route(std::size_t from, std::size_t to) const;

  private:
    friend class ConductanceGraph;

    std::size_t node_count_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> site_nodes_;
    std::vector<std::size_t> components_;
    std::size_t component_count_ = 0;
};

/// Per-channel resistive networks of a garment layout; immutable once built.
class ConductanceGraph {
  public:
    explicit ConductanceGraph(GarmentLayout layout, std::span<const OpenCut> cuts = {});

    const GarmentLayout& layout() const { return *layout_; }
    const ChannelNetwork& channel(Channel c) const { return networks_[channel_slot(c)]; }

    /// The two sites share a component on every one of the six channels.
    bool fully_connected(std::size_t site_a, std::size_t site_b) const;

  private:
    std::shared_ptr<const GarmentLayout> layout_;
    std::array<ChannelNetwork, kChannelCount> networks_;
};

/// Two-point effective resistance between two sites on `ch`, or nullopt when
/// they are not electrically connected.
std::optional<double> path_resistance(const ConductanceGraph& graph, std::string_view site_a,
                                      std::string_view site_b, Channel ch);

/// Fraction of attachment sites reachable from `hub` on all six channels.
double reachable_fraction(const ConductanceGraph& graph, std::string_view hub);

/// Caches a grounded-Laplacian inverse per connected component so repeated
/// effective-resistance queries are O(1).
class ResistanceTable {
  public:
    explicit ResistanceTable(const ChannelNetwork& network);

    std::optional<double> between(std::size_t node_a, std::size_t node_b) const;

  private:
    struct Block {
        std::size_t size = 0;
        std::vector<double> inverse;  // row-major, size x size; row/col of the ground node are 0
    };
    std::vector<std::size_t> component_of_;
    std::vector<std::size_t> local_index_;
    std::vector<Block> blocks_;
};

}  // namespace eknit::topology
