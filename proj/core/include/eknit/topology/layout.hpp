#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eknit/common.hpp"

namespace eknit::topology {

/// A horizontal band of six parallel conductive threads at height `y_cm`.
struct ChannelGroup {
    std::string id;
    double y_cm = 0.0;
    double x_start_cm = 0.0;
    double x_end_cm = 0.0;
    double ohm_per_m = 0.0;

    bool operator==(const ChannelGroup&) const = default;
};

/// Laminated strip that bridges the same channel across several groups.
struct VerticalStrip {
    std::string id;
    double x_cm = 0.0;
    std::vector<std::string> group_ids;
    double ohm_per_m = 0.0;

    bool operator==(const VerticalStrip&) const = default;
};

/// Contact point between one strip and one group on one channel.
struct Junction {
    std::size_t strip = 0;
    std::size_t group = 0;
    Channel channel = Channel::Vcc;
    double offset_mm = 0.0;

    bool connected(double tolerance_mm) const {
        return offset_mm <= tolerance_mm && offset_mm >= -tolerance_mm;
    }

    bool operator==(const Junction&) const = default;
};

/// A place where a sensing module can clip onto all six channels of a group.
struct AttachmentSite {
    std::string id;
    std::string group_id;
    double x_cm = 0.0;

    bool operator==(const AttachmentSite&) const = default;
};

/// Immutable, validated garment description. Junctions are enumerated in a
/// canonical order: strips in declaration order, then each strip's groups in
/// declaration order, then channels 1..6.
class GarmentLayout {
  public:
    GarmentLayout(std::vector<ChannelGroup> groups, std::vector<VerticalStrip> strips,
                  std::vector<AttachmentSite> sites, double tolerance_mm = 1.0,
                  double thread_ohm_per_m = 20.0);

    const std::vector<ChannelGroup>& groups() const { return groups_; }
    const std::vector<VerticalStrip>& strips() const { return strips_; }
    const std::vector<AttachmentSite>& sites() const { return sites_; }
    const std::vector<Junction>& junctions() const { return junctions_; }
    double tolerance_mm() const { return tolerance_mm_; }
    double thread_ohm_per_m() const { return thread_ohm_per_m_; }

    std::optional<std::size_t> group_index(std::string_view id) const;
    std::optional<std::size_t> strip_index(std::string_view id) const;
    std::optional<std::size_t> site_index(std::string_view id) const;

    /// Index of the site or a ValidationError naming the unknown id.
    std::size_t require_site(std::string_view id) const;

    std::size_t site_group(std::size_t site) const { return site_groups_[site]; }

    std::optional<std::size_t> junction_index(std::size_t strip, std::size_t group,
                                              Channel channel) const;

    bool junction_connected(const Junction& j) const { return j.connected(tolerance_mm_); }

    /// Copy with new offsets (one per junction, canonical order).
    GarmentLayout with_offsets(std::vector<double> offsets_mm) const;
    GarmentLayout with_tolerance(double tolerance_mm) const;
    GarmentLayout with_junction_offset(std::size_t junction, double offset_mm) const;

    bool operator==(const GarmentLayout&) const = default;

  private:
    void validate_and_index();

    std::vector<ChannelGroup> groups_;
    std::vector<VerticalStrip> strips_;
    std::vector<AttachmentSite> sites_;
    std::vector<Junction> junctions_;
    std::vector<std::size_t> site_groups_;
    double tolerance_mm_;
    double thread_ohm_per_m_;
};

}  // namespace eknit::topology
