#include "eknit/sim/reference.hpp"

#include "eknit/sim/scenario.hpp"

#include <utility>

#include "eknit/topology/graph.hpp"

namespace eknit::sim {

using topology::AttachmentSite;
using topology::ChannelGroup;
using topology::VerticalStrip;

topology::GarmentLayout reference_layout() {
    // Flat pattern, y downwards from the shoulder line, x from the left wrist.
    // Torso rows are split into three short groups so that each one hangs off
    // its own pair of strips; belt and hem run the full width and tie every
    // strip to the hub.
    std::vector<ChannelGroup> groups = {
        {"l_sleeve", 0.0, 0.0, 60.0, 0.0},
        {"r_sleeve", 0.0, 100.0, 160.0, 0.0},
    };
    std::vector<AttachmentSite> sites = {
        {"l_wrist", "l_sleeve", 0.0},      {"l_forearm", "l_sleeve", 14.0},
        {"l_elbow", "l_sleeve", 27.0},     {"l_upper_arm", "l_sleeve", 41.0},
        {"l_shoulder", "l_sleeve", 52.0},  {"r_shoulder", "r_sleeve", 108.0},
        {"r_upper_arm", "r_sleeve", 119.0}, {"r_elbow", "r_sleeve", 133.0},
        {"r_forearm", "r_sleeve", 146.0},  {"r_wrist", "r_sleeve", 160.0},
    };
    std::vector<std::string> left = {"l_sleeve"}, centre, right = {"r_sleeve"};
    const std::pair<const char*, double> rows[] = {
        {"chest", 12.0}, {"ribs", 18.0}, {"back", 24.0}, {"belly", 30.0}, {"waist", 36.0}};
    for (const auto& [name, y] : rows) {
        const std::string n = name;
        groups.push_back({n + "_l", y, 55.0, 65.0, 0.0});
        groups.push_back({n + "_c", y, 75.0, 85.0, 0.0});
        groups.push_back({n + "_r", y, 95.0, 105.0, 0.0});
        sites.push_back({n + "_l", n + "_l", 62.0});
        sites.push_back({n, n + "_c", 80.0});
        sites.push_back({n + "_r", n + "_r", 98.0});
        left.push_back(n + "_l");
        centre.push_back(n + "_c");
        right.push_back(n + "_r");
    }
    groups.push_back({"belt", 42.0, 55.0, 105.0, 0.0});
    groups.push_back({"hem", 48.0, 55.0, 105.0, 0.0});
    sites.push_back({"belt_l", "belt", 62.0});
    sites.push_back({"belt", "belt", 80.0});
    sites.push_back({"belt_r", "belt", 98.0});
    sites.push_back({"hem_l", "hem", 62.0});
    sites.push_back({"hem_c", "hem", 80.0});
    sites.push_back({"hem_r", "hem", 105.0});
    for (auto* col : {&left, &centre, &right}) {
        col->push_back("belt");
        col->push_back("hem");
    }

    std::vector<VerticalStrip> strips = {
        {"strip_l1", 56.0, left, 0.0},   {"strip_l2", 59.0, left, 0.0},
        {"strip_c1", 78.0, centre, 0.0}, {"strip_c2", 82.0, centre, 0.0},
        {"strip_r1", 101.0, right, 0.0}, {"strip_r2", 104.0, right, 0.0},
    };
    return {std::move(groups), std::move(strips), std::move(sites), 1.0, 20.0};
}

std::vector<std::string> attenuation_positions() {
    return {"r_wrist", "r_elbow", "r_shoulder", "back_r", "hem_r", "hem_l", "l_shoulder", "l_elbow", "l_wrist"};
}

std::vector<AttenuationPoint> attenuation_sweep(const topology::GarmentLayout& layout,
                                                const signal::LinkConfig& link) {
    const topology::ConductanceGraph graph(layout);
    const auto& plus = graph.channel(Channel::SclP);
    const auto& minus = graph.channel(Channel::SclN);
    const topology::ResistanceTable rp(plus);
    const topology::ResistanceTable rm(minus);
    const auto names = attenuation_positions();
    const std::size_t tx = layout.require_site(names.front());

    std::vector<AttenuationPoint> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::size_t rx = layout.require_site(names[i]);
        const auto leg = [&](const topology::ChannelNetwork& net, const topology::ResistanceTable& table) {
            const auto a = net.site_node(tx);
            const auto b = net.site_node(rx);
            const auto r = table.between(a, b);
            if (!r) throw ValidationError("attenuation position '" + names[i] + "' is cut off");
            return signal::LegPath{*r, net.path_length_m(a, b).value_or(0.0)};
        };
        AttenuationPoint p;
        p.position = static_cast<int>(i + 1);
        p.site = names[i];
        p.scl = {leg(plus, rp), leg(minus, rm)};
        p.eye = signal::pair_eye(p.scl, link);
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

Scenario five_module_base(bus::ModuleKind kind) {
    Scenario s(reference_layout(), kReferenceHub);
    s.master_seed = 20240501;
    s.connectors.push_back({"pme", connector::PmeStrip{}});
    const char* places[] = {"l_wrist", "r_wrist", "back", "chest", "waist"};
    if (kind == bus::ModuleKind::Temperature) {
        places[0] = "r_upper_arm";
        places[2] = "belly";
        places[3] = "chest_r";
    }
    for (int i = 0; i < 5; ++i) {
        const auto addr = static_cast<std::uint8_t>(0x10 + i);
        ModuleSpec m;
        m.id = std::string(kind == bus::ModuleKind::Imu ? "imu_" : "temp_") + places[i];
        m.site = places[i];
        m.connector = "pme";
        m.descriptor = kind == bus::ModuleKind::Imu ? bus::make_imu(addr) : bus::make_temperature(addr);
        s.modules.push_back(std::move(m));
    }
    return s;
}

}  // namespace

Scenario shake_test_scenario(int trials) {
    Scenario s = five_module_base(bus::ModuleKind::Imu);
    double t = 0.0;
    for (auto kind : {connector::MotionKind::Walking, connector::MotionKind::Running,
                      connector::MotionKind::Jumping, connector::MotionKind::Rotating}) {
        s.events.push_back({t, MotionAction{kind, trials, true}});
        s.events.push_back({t, PollAllAction{}});
        t += connector::default_motion(kind).period_s * trials;
    }
    return s;
}

Scenario skin_temperature_scenario() {
    Scenario s = five_module_base(bus::ModuleKind::Temperature);
    const double skin[] = {32.6, 33.4, 34.7, 35.1, 34.2};
    for (std::size_t i = 0; i < s.modules.size(); ++i) s.modules[i].temperature_c = skin[i];
    s.events.push_back({0.0, PollAllAction{}});
    s.events.push_back({0.1, PollAllAction{}});
    return s;
}

}  // namespace eknit::sim
