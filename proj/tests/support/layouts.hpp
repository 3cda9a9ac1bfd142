#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "eknit/random.hpp"
#include "eknit/topology/layout.hpp"

namespace eknit::testing {

// Random small garment: `groups` rows 10 cm apart on x in [0, 100], strips at
// random x spanning random subsets of >= 2 rows, two sites per row. Roughly
// `p_open` of the junctions are pushed out of tolerance.
inline topology::GarmentLayout random_layout(std::uint64_t seed, std::size_t groups = 4, std::size_t strips = 3,
                                             double p_open = 0.2) {
    Rng rng(seed);
    std::vector<topology::ChannelGroup> gs;
    std::vector<topology::AttachmentSite> sites;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::string id = "g" + std::to_string(g);
        gs.push_back({id, 10.0 * static_cast<double>(g), 0.0, 100.0, 10.0 + 30.0 * rng.uniform()});
        sites.push_back({id + "_a", id, 5.0 + 40.0 * rng.uniform()});
        sites.push_back({id + "_b", id, 55.0 + 40.0 * rng.uniform()});
    }
    std::vector<topology::VerticalStrip> ss;
    for (std::size_t s = 0; s < strips; ++s) {
        std::vector<std::string> members;
        for (std::size_t g = 0; g < groups; ++g) {
            if (rng.uniform() < 0.7) members.push_back(gs[g].id);
        }
        while (members.size() < 2) {
            const auto g = static_cast<std::size_t>(rng.uniform() * static_cast<double>(groups));
            if (std::find(members.begin(), members.end(), gs[g].id) == members.end()) members.push_back(gs[g].id);
        }
        std::sort(members.begin(), members.end());
        ss.push_back({"s" + std::to_string(s), 2.0 + 96.0 * rng.uniform(), members, 10.0 + 30.0 * rng.uniform()});
    }
    topology::GarmentLayout base(gs, ss, sites, 1.0, 20.0);
    std::vector<double> offsets(base.junctions().size());
    for (auto& o : offsets) o = rng.uniform() < p_open ? 5.0 : 0.0;
    return base.with_offsets(offsets);
}

}  // namespace eknit::testing
