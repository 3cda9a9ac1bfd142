#include "eknit/topology/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <utility>

namespace eknit::topology {

namespace {

class DisjointSet {
  public:
    explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // The smaller root wins so labels do not depend on union order.
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

  private:
    std::vector<std::size_t> parent_;
};

struct Adjacent {
    std::size_t node;
    std::size_t edge;
};

std::vector<std::vector<Adjacent>> adjacency(const ChannelNetwork& net) {
    std::vector<std::vector<Adjacent>> adj(net.node_count());
    const auto& edges = net.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        adj[edges[e].a].push_back({edges[e].b, e});
        adj[edges[e].b].push_back({edges[e].a, e});
    }
    return adj;
}

struct DijkstraResult {
    std::vector<double> dist;
    std::vector<std::size_t> via_edge;
};

DijkstraResult dijkstra(const ChannelNetwork& net, std::size_t from) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr auto none = std::numeric_limits<std::size_t>::max();
    const auto adj = adjacency(net);
    DijkstraResult r{std::vector<double>(net.node_count(), inf),
                     std::vector<std::size_t>(net.node_count(), none)};
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    r.dist[from] = 0.0;
    queue.push({0.0, from});
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > r.dist[u]) continue;
        for (const auto& [v, e] : adj[u]) {
            const double nd = d + net.edges()[e].length_m;
            if (nd < r.dist[v]) {
                r.dist[v] = nd;
                r.via_edge[v] = e;
                queue.push({nd, v});
            }
        }
    }
    return r;
}

// Dense grounded Laplacian of one component; `nodes` lists global ids, the
// first entry is grounded and omitted from the matrix.
Eigen::MatrixXd grounded_laplacian(const ChannelNetwork& net, const std::vector<std::size_t>& nodes,
                                   const std::vector<std::size_t>& local) {
    const auto n = static_cast<Eigen::Index>(nodes.size()) - 1;
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : net.edges()) {
        if (net.component(e.a) != net.component(nodes.front())) continue;
        const double g = 1.0 / e.ohm;
        const auto ia = static_cast<Eigen::Index>(local[e.a]) - 1;
        const auto ib = static_cast<Eigen::Index>(local[e.b]) - 1;
        if (ia >= 0) lap(ia, ia) += g;
        if (ib >= 0) lap(ib, ib) += g;
        if (ia >= 0 && ib >= 0) {
            lap(ia, ib) -= g;
            lap(ib, ia) -= g;
        }
    }
    return lap;
}

}  // namespace

bool Edge::overlaps(std::size_t group, double x_from, double x_to) const {
    if (kind != SegmentKind::Group || owner != group) return false;
    const double lo = std::min(x_from, x_to);
    const double hi = std::max(x_from, x_to);
    return std::max(lo, lo_cm) < std::min(hi, hi_cm);
}

std::optional<double> ChannelNetwork::path_length_m(std::size_t from, std::size_t to) const {
    if (!connected(from, to)) return std::nullopt;
    return dijkstra(*this, from).dist[to];
}

std::optional<std::vector<std::size_t>> ChannelNetwork::shortest_route(std::size_t from,
                                                                       std::size_t to) const {
    if (!connected(from, to)) return std::nullopt;
    const auto r = dijkstra(*this, from);
    std::vector<std::size_t> route;
    for (std::size_t node = to; node != from;) {
        const auto& e = edges_[r.via_edge[node]];
        route.push_back(r.via_edge[node]);
        node = (e.a == node) ? e.b : e.a;
    }
    std::reverse(route.begin(), route.end());
    return route;
}

ConductanceGraph::ConductanceGraph(GarmentLayout layout, std::span<const OpenCut> cuts)
    : layout_(std::make_shared<const GarmentLayout>(std::move(layout))) {
    const auto& lay = *layout_;
    const auto& groups = lay.groups();
    const auto& strips = lay.strips();

    // Raw points shared by all channels: along every group and every strip.
    std::vector<std::vector<double>> group_xs(groups.size());
    for (std::size_t s = 0; s < lay.sites().size(); ++s) {
        group_xs[lay.site_group(s)].push_back(lay.sites()[s].x_cm);
    }
    std::vector<std::vector<double>> strip_ys(strips.size());
    for (std::size_t s = 0; s < strips.size(); ++s) {
        for (const auto& gid : strips[s].group_ids) {
            const std::size_t g = *lay.group_index(gid);
            group_xs[g].push_back(strips[s].x_cm);
            strip_ys[s].push_back(groups[g].y_cm);
        }
        std::sort(strip_ys[s].begin(), strip_ys[s].end());
    }
    for (auto& xs : group_xs) {
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }

    std::vector<std::size_t> group_base(groups.size());
    std::vector<std::size_t> strip_base(strips.size());
    std::size_t raw_count = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        group_base[g] = raw_count;
        raw_count += group_xs[g].size();
    }
    for (std::size_t s = 0; s < strips.size(); ++s) {
        strip_base[s] = raw_count;
        raw_count += strip_ys[s].size();
    }
    auto group_point = [&](std::size_t g, double x) {
        const auto& xs = group_xs[g];
        return group_base[g] +
               static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
    };
    auto strip_point = [&](std::size_t s, double y) {
        const auto& ys = strip_ys[s];
        return strip_base[s] +
               static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), y) - ys.begin());
    };

    for (Channel ch : kAllChannels) {
        ChannelNetwork& net = networks_[channel_slot(ch)];

        DisjointSet merge(raw_count);
        for (const auto& j : lay.junctions()) {
            if (j.channel != ch || !lay.junction_connected(j)) continue;
            merge.unite(group_point(j.group, strips[j.strip].x_cm),
                        strip_point(j.strip, groups[j.group].y_cm));
        }
        std::vector<std::size_t> compact(raw_count, std::numeric_limits<std::size_t>::max());
        std::size_t nodes = 0;
        for (std::size_t r = 0; r < raw_count; ++r) {
            const std::size_t root = merge.find(r);
            if (compact[root] == std::numeric_limits<std::size_t>::max()) compact[root] = nodes++;
            compact[r] = compact[root];
        }
        net.node_count_ = nodes;

        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& xs = group_xs[g];
            for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
                Edge e{compact[group_base[g] + i], compact[group_base[g] + i + 1],
                       0.0, (xs[i + 1] - xs[i]) / 100.0, SegmentKind::Group, g, xs[i], xs[i + 1]};
                e.ohm = e.length_m * groups[g].ohm_per_m;
                const bool cut = std::any_of(cuts.begin(), cuts.end(), [&](const OpenCut& c) {
                    const auto cg = lay.group_index(c.span.group_id);
                    return c.channel == ch && cg && e.overlaps(*cg, c.span.x_from_cm, c.span.x_to_cm);
                });
                if (!cut && e.a != e.b) net.edges_.push_back(e);
            }
        }
        for (std::size_t s = 0; s < strips.size(); ++s) {
            const auto& ys = strip_ys[s];
            for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
                Edge e{compact[strip_base[s] + i], compact[strip_base[s] + i + 1],
                       0.0, (ys[i + 1] - ys[i]) / 100.0, SegmentKind::Strip, s, ys[i], ys[i + 1]};
                e.ohm = e.length_m * strips[s].ohm_per_m;
                if (e.a != e.b) net.edges_.push_back(e);
            }
        }

        net.site_nodes_.clear();
        for (std::size_t s = 0; s < lay.sites().size(); ++s) {
            net.site_nodes_.push_back(compact[group_point(lay.site_group(s), lay.sites()[s].x_cm)]);
        }

        DisjointSet comp(nodes);
        for (const auto& e : net.edges_) comp.unite(e.a, e.b);
        net.components_.assign(nodes, 0);
        std::map<std::size_t, std::size_t> label;
        for (std::size_t n = 0; n < nodes; ++n) {
            const auto [it, fresh] = label.try_emplace(comp.find(n), label.size());
            net.components_[n] = it->second;
        }
        net.component_count_ = label.size();
    }
}

bool ConductanceGraph::fully_connected(std::size_t site_a, std::size_t site_b) const {
    return std::all_of(networks_.begin(), networks_.end(), [&](const ChannelNetwork& net) {
        return net.connected(net.site_node(site_a), net.site_node(site_b));
    });
}

std::optional<double> path_resistance(const ConductanceGraph& graph, std::string_view site_a,
                                      std::string_view site_b, Channel ch) {
    const auto& lay = graph.layout();
    const std::size_t a = lay.require_site(site_a);
    const std::size_t b = lay.require_site(site_b);
    if (a == b) throw ValidationError("path_resistance requires two distinct sites");

    const auto& net = graph.channel(ch);
    const std::size_t na = net.site_node(a);
    const std::size_t nb = net.site_node(b);
    if (!net.connected(na, nb)) return std::nullopt;
    if (na == nb) return 0.0;

    // Ground b, inject a unit current at a: the potential at a is R_ab.
    std::vector<std::size_t> nodes{nb};
    std::vector<std::size_t> local(net.node_count(), 0);
    for (std::size_t n = 0; n < net.node_count(); ++n) {
        if (n != nb && net.connected(n, nb)) {
            local[n] = nodes.size();
            nodes.push_back(n);
        }
    }
    const Eigen::MatrixXd lap = grounded_laplacian(net, nodes, local);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(lap.rows());
    rhs(static_cast<Eigen::Index>(local[na]) - 1) = 1.0;
    const Eigen::VectorXd v = lap.ldlt().solve(rhs);
    return v(static_cast<Eigen::Index>(local[na]) - 1);
}

double reachable_fraction(const ConductanceGraph& graph, std::string_view hub) {
    const auto& lay = graph.layout();
    const std::size_t h = lay.require_site(hub);
    const std::size_t total = lay.sites().size();
    std::size_t reachable = 0;
    for (std::size_t s = 0; s < total; ++s) {
        if (graph.fully_connected(h, s)) ++reachable;
    }
    return static_cast<double>(reachable) / static_cast<double>(total);
}

ResistanceTable::ResistanceTable(const ChannelNetwork& net)
    : component_of_(net.node_count()), local_index_(net.node_count()) {
    std::vector<std::vector<std::size_t>> members(net.component_count());
    for (std::size_t n = 0; n < net.node_count(); ++n) {
        component_of_[n] = net.component(n);
        local_index_[n] = members[net.component(n)].size();
        members[net.component(n)].push_back(n);
    }
    blocks_.resize(members.size());
    for (std::size_t c = 0; c < members.size(); ++c) {
        const auto& nodes = members[c];
        Block& block = blocks_[c];
        block.size = nodes.size();
        block.inverse.assign(block.size * block.size, 0.0);
        if (block.size < 2) continue;
        const Eigen::MatrixXd lap = grounded_laplacian(net, nodes, local_index_);
        const Eigen::MatrixXd inv =
            lap.ldlt().solve(Eigen::MatrixXd::Identity(lap.rows(), lap.cols()));
        for (std::size_t i = 1; i < block.size; ++i) {
            for (std::size_t j = 1; j < block.size; ++j) {
                block.inverse[i * block.size + j] =
                    inv(static_cast<Eigen::Index>(i) - 1, static_cast<Eigen::Index>(j) - 1);
            }
        }
    }
}

std::optional<double> ResistanceTable::between(std::size_t node_a, std::size_t node_b) const {
    if (component_of_[node_a] != component_of_[node_b]) return std::nullopt;
    if (node_a == node_b) return 0.0;
    const Block& block = blocks_[component_of_[node_a]];
    const std::size_t i = local_index_[node_a];
    const std::size_t j = local_index_[node_b];
    const auto at = [&](std::size_t r, std::size_t c) { return block.inverse[r * block.size + c]; };
    return at(i, i) + at(j, j) - 2.0 * at(i, j);
}

}  // namespace eknit::topology
