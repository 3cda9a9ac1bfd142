#include "eknit/topology/layout.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace eknit::topology {

namespace {

template <typename T>
std::optional<std::size_t> find_by_id(const std::vector<T>& items, std::string_view id) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].id == id) return i;
    }
    return std::nullopt;
}

template <typename T>
void require_unique_ids(const std::vector<T>& items, std::string_view what) {
    std::set<std::string_view> seen;
    for (const auto& item : items) {
        if (item.id.empty()) throw ValidationError(std::string(what) + " with empty id");
        if (!seen.insert(item.id).second) {
            throw ValidationError("duplicate " + std::string(what) + " id '" + item.id + "'");
        }
    }
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

GarmentLayout::GarmentLayout(std::vector<ChannelGroup> groups, std::vector<VerticalStrip> strips,
                             std::vector<AttachmentSite> sites, double tolerance_mm,
                             double thread_ohm_per_m)
    : groups_(std::move(groups)),
      strips_(std::move(strips)),
      sites_(std::move(sites)),
      tolerance_mm_(tolerance_mm),
      thread_ohm_per_m_(thread_ohm_per_m) {
    if (!finite_positive(tolerance_mm_)) throw ValidationError("tolerance_mm must be > 0");
    if (!finite_positive(thread_ohm_per_m_)) throw ValidationError("thread_ohm_per_m must be > 0");
    for (auto& g : groups_) {
        if (g.ohm_per_m == 0.0) g.ohm_per_m = thread_ohm_per_m_;
    }
    for (auto& s : strips_) {
        if (s.ohm_per_m == 0.0) s.ohm_per_m = thread_ohm_per_m_;
    }
    validate_and_index();
    for (std::size_t s = 0; s < strips_.size(); ++s) {
        for (const auto& gid : strips_[s].group_ids) {
            const std::size_t g = *group_index(gid);
            for (Channel ch : kAllChannels) junctions_.push_back(Junction{s, g, ch, 0.0});
        }
    }
}

void GarmentLayout::validate_and_index() {
    require_unique_ids(groups_, "group");
    require_unique_ids(strips_, "strip");
    require_unique_ids(sites_, "site");

    for (const auto& g : groups_) {
        if (!std::isfinite(g.y_cm) || !std::isfinite(g.x_start_cm) || !std::isfinite(g.x_end_cm)) {
            throw ValidationError("group '" + g.id + "' has non-finite geometry");
        }
        if (!(g.x_start_cm < g.x_end_cm)) {
            throw ValidationError("group '" + g.id + "' requires x_start < x_end");
        }
        if (!finite_positive(g.ohm_per_m)) {
            throw ValidationError("group '" + g.id + "' resistance per length must be > 0");
        }
    }
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        for (std::size_t j = i + 1; j < groups_.size(); ++j) {
            const auto& a = groups_[i];
            const auto& b = groups_[j];
            if (a.y_cm == b.y_cm && a.x_start_cm < b.x_end_cm && b.x_start_cm < a.x_end_cm) {
                throw ValidationError("groups '" + a.id + "' and '" + b.id + "' overlap");
            }
        }
    }

    for (const auto& s : strips_) {
        if (!std::isfinite(s.x_cm)) throw ValidationError("strip '" + s.id + "' has non-finite x");
        if (!finite_positive(s.ohm_per_m)) {
            throw ValidationError("strip '" + s.id + "' resistance per length must be > 0");
        }
        if (s.group_ids.size() < 2) {
            throw ValidationError("strip '" + s.id + "' must span at least two groups");
        }
        std::set<double> heights;
        for (const auto& gid : s.group_ids) {
            const auto g = group_index(gid);
            if (!g) throw ValidationError("strip '" + s.id + "' references unknown group '" + gid + "'");
            const auto& grp = groups_[*g];
            if (s.x_cm < grp.x_start_cm || s.x_cm > grp.x_end_cm) {
                throw ValidationError("strip '" + s.id + "' lies outside group '" + gid + "'");
            }
            if (!heights.insert(grp.y_cm).second) {
                throw ValidationError("strip '" + s.id + "' spans two groups at the same height");
            }
        }
    }

    site_groups_.clear();
    for (const auto& site : sites_) {
        const auto g = group_index(site.group_id);
        if (!g) {
            throw ValidationError("site '" + site.id + "' references unknown group '" +
                                  site.group_id + "'");
        }
        const auto& grp = groups_[*g];
        if (!std::isfinite(site.x_cm) || site.x_cm < grp.x_start_cm || site.x_cm > grp.x_end_cm) {
            throw ValidationError("site '" + site.id + "' lies outside the span of group '" +
                                  grp.id + "'");
        }
        site_groups_.push_back(*g);
    }
}

std::optional<std::size_t> GarmentLayout::group_index(std::string_view id) const {
    return find_by_id(groups_, id);
}

std::optional<std::size_t> GarmentLayout::strip_index(std::string_view id) const {
    return find_by_id(strips_, id);
}

std::optional<std::size_t> GarmentLayout::site_index(std::string_view id) const {
    return find_by_id(sites_, id);
}

std::size_t GarmentLayout::require_site(std::string_view id) const {
    const auto idx = site_index(id);
    if (!idx) throw ValidationError("unknown site '" + std::string(id) + "'");
    return *idx;
}

std::optional<std::size_t> GarmentLayout::junction_index(std::size_t strip, std::size_t group,
                                                         Channel channel) const {
    for (std::size_t i = 0; i < junctions_.size(); ++i) {
        const auto& j = junctions_[i];
        if (j.strip == strip && j.group == group && j.channel == channel) return i;
    }
    return std::nullopt;
}

GarmentLayout GarmentLayout::with_offsets(std::vector<double> offsets_mm) const {
    if (offsets_mm.size() != junctions_.size()) {
        throw ValidationError("offset count does not match junction count");
    }
    GarmentLayout copy = *this;
    for (std::size_t i = 0; i < offsets_mm.size(); ++i) {
        if (!std::isfinite(offsets_mm[i])) throw ValidationError("non-finite junction offset");
        copy.junctions_[i].offset_mm = offsets_mm[i];
    }
    return copy;
}

GarmentLayout GarmentLayout::with_tolerance(double tolerance_mm) const {
    if (!finite_positive(tolerance_mm)) throw ValidationError("tolerance_mm must be > 0");
    GarmentLayout copy = *this;
    copy.tolerance_mm_ = tolerance_mm;
    return copy;
}

GarmentLayout GarmentLayout::with_junction_offset(std::size_t junction, double offset_mm) const {
    if (junction >= junctions_.size()) throw ValidationError("junction index out of range");
    GarmentLayout copy = *this;
    copy.junctions_[junction].offset_mm = offset_mm;
    return copy;
}

}  // namespace eknit::topology
