#include "eknit/topology/layout_io.hpp"

#include <fstream>
#include <sstream>

#include "eknit/json_util.hpp"

namespace eknit::topology {

using nlohmann::json;
namespace ju = eknit::json_util;

json layout_to_json(const GarmentLayout& layout) {
    json groups = json::array();
    for (const auto& g : layout.groups()) {
        groups.push_back({{"id", g.id},
                          {"y_cm", g.y_cm},
                          {"x_start_cm", g.x_start_cm},
                          {"x_end_cm", g.x_end_cm},
                          {"ohm_per_m", g.ohm_per_m}});
    }
    json strips = json::array();
    for (const auto& s : layout.strips()) {
        strips.push_back(
            {{"id", s.id}, {"x_cm", s.x_cm}, {"groups", s.group_ids}, {"ohm_per_m", s.ohm_per_m}});
    }
    json sites = json::array();
    for (const auto& s : layout.sites()) {
        sites.push_back({{"id", s.id}, {"group", s.group_id}, {"x_cm", s.x_cm}});
    }
    json junctions = json::array();
    for (const auto& j : layout.junctions()) {
        junctions.push_back({{"strip", layout.strips()[j.strip].id},
                             {"group", layout.groups()[j.group].id},
                             {"channel", static_cast<int>(j.channel)},
                             {"offset_mm", j.offset_mm}});
    }
    return {{"schema", kLayoutSchema},
            {"tolerance_mm", layout.tolerance_mm()},
            {"thread_ohm_per_m", layout.thread_ohm_per_m()},
            {"groups", groups},
            {"strips", strips},
            {"sites", sites},
            {"junctions", junctions}};
}

GarmentLayout layout_from_json(const json& doc) {
    constexpr std::string_view where = "layout";
    ju::allow_keys(doc, where,
                   {"schema", "tolerance_mm", "thread_ohm_per_m", "groups", "strips", "sites",
                    "junctions"});
    ju::require_schema(doc, kLayoutSchema, where);
    const double tolerance = ju::get_or<double>(doc, "tolerance_mm", 1.0, where);
    const double thread = ju::get_or<double>(doc, "thread_ohm_per_m", 20.0, where);

    std::vector<ChannelGroup> groups;
    for (const auto& g : ju::get<json>(doc, "groups", where)) {
        ju::allow_keys(g, "layout.groups[]", {"id", "y_cm", "x_start_cm", "x_end_cm", "ohm_per_m"});
        groups.push_back({ju::get<std::string>(g, "id", "group"), ju::get<double>(g, "y_cm", "group"),
                          ju::get<double>(g, "x_start_cm", "group"),
                          ju::get<double>(g, "x_end_cm", "group"),
                          ju::get_or<double>(g, "ohm_per_m", 0.0, "group")});
    }
    std::vector<VerticalStrip> strips;
    for (const auto& s : ju::get_or<json>(doc, "strips", json::array(), where)) {
        ju::allow_keys(s, "layout.strips[]", {"id", "x_cm", "groups", "ohm_per_m"});
        strips.push_back({ju::get<std::string>(s, "id", "strip"), ju::get<double>(s, "x_cm", "strip"),
                          ju::get<std::vector<std::string>>(s, "groups", "strip"),
                          ju::get_or<double>(s, "ohm_per_m", 0.0, "strip")});
    }
    std::vector<AttachmentSite> sites;
    for (const auto& s : ju::get_or<json>(doc, "sites", json::array(), where)) {
        ju::allow_keys(s, "layout.sites[]", {"id", "group", "x_cm"});
        sites.push_back({ju::get<std::string>(s, "id", "site"),
                         ju::get<std::string>(s, "group", "site"), ju::get<double>(s, "x_cm", "site")});
    }
    GarmentLayout layout(std::move(groups), std::move(strips), std::move(sites), tolerance, thread);

    if (doc.contains("junctions")) {
        std::vector<double> offsets(layout.junctions().size(), 0.0);
        for (const auto& j : ju::get<json>(doc, "junctions", where)) {
            constexpr std::string_view jw = "layout.junctions[]";
            ju::allow_keys(j, jw, {"strip", "group", "channel", "offset_mm"});
            const auto strip = layout.strip_index(ju::get<std::string>(j, "strip", jw));
            const auto group = layout.group_index(ju::get<std::string>(j, "group", jw));
            const auto channel = channel_from_index(ju::get<int>(j, "channel", jw));
            if (!strip || !group || !channel) throw ValidationError("junction references unknown element");
            const auto idx = layout.junction_index(*strip, *group, *channel);
            if (!idx) throw ValidationError("junction between a strip and a group it does not span");
            offsets[*idx] = ju::get<double>(j, "offset_mm", jw);
        }
        layout = layout.with_offsets(std::move(offsets));
    }
    return layout;
}

std::string save_layout(const GarmentLayout& layout) { return layout_to_json(layout).dump(2) + "\n"; }

GarmentLayout load_layout(const std::string& text) {
    return layout_from_json(ju::parse(text, "layout"));
}

GarmentLayout load_layout_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open layout file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_layout(buf.str());
}

}  // namespace eknit::topology
