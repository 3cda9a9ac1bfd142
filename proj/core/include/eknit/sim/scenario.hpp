#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "eknit/bus/bus_model.hpp"
#include "eknit/bus/module.hpp"
#include "eknit/connector/connector.hpp"
#include "eknit/placement/calibration.hpp"
#include "eknit/signal/link.hpp"
#include "eknit/topology/layout.hpp"

namespace eknit::sim {

inline constexpr int kScenarioSchema = 1;

struct ConnectorConfig {
    std::string id;
    connector::PmeStrip strip;

    bool operator==(const ConnectorConfig&) const = default;
};

struct ModuleSpec {
    std::string id;
    std::optional<std::string> site;  ///< attached before the first event when set
    std::string connector;
    bus::ModuleDescriptor descriptor;
    double temperature_c = 25.0;

    bool operator==(const ModuleSpec&) const = default;
};

struct AttachAction {
    std::string module;
    std::string site;
    bool operator==(const AttachAction&) const = default;
};

struct DetachAction {
    std::string module;
    bool operator==(const DetachAction&) const = default;
};

/// Runs detachment trials against every attached module. With `reattach`
/// a module that came off is put back before the next trial and stays on the
/// bus afterwards; without it, a module is removed at its first detachment.
struct MotionAction {
    connector::MotionKind kind = connector::MotionKind::Walking;
    std::optional<int> trials;  ///< overrides the profile's trial count
    bool reattach = false;
    bool operator==(const MotionAction&) const = default;
};

struct TransactAction {
    bus::Transaction transaction;
    bool operator==(const TransactAction&) const = default;
};

struct PollAllAction {
    bool operator==(const PollAllAction&) const = default;
};

struct InjectFaultAction {
    bus::LineFault fault;
    bool operator==(const InjectFaultAction&) const = default;
};

struct ClearFaultAction {
    std::string fault;
    bool operator==(const ClearFaultAction&) const = default;
};

struct SetTemperatureAction {
    std::string module;
    double temperature_c = 25.0;
    bool operator==(const SetTemperatureAction&) const = default;
};

using Action = std::variant<AttachAction, DetachAction, MotionAction, TransactAction, PollAllAction,
                            InjectFaultAction, ClearFaultAction, SetTemperatureAction>;

struct Event {
    double time_s = 0.0;
    Action action;

    bool operator==(const Event&) const = default;
};

std::string_view action_name(const Action& a);

struct Scenario {
    Scenario(topology::GarmentLayout layout_, std::string hub_)
        : layout(std::move(layout_)), hub(std::move(hub_)) {}

    int schema = kScenarioSchema;
    std::uint64_t master_seed = 0;
    topology::GarmentLayout layout;
    std::string hub;
    signal::LinkConfig link;
    double misalignment_sigma_mm = 0.0;  ///< 0 keeps the layout's own offsets
    std::vector<ConnectorConfig> connectors;
    std::vector<connector::MotionProfile> motions;  ///< overrides of the defaults, by kind
    std::vector<ModuleSpec> modules;
    std::vector<Event> events;
    std::optional<placement::LinearCalibration> calibration;  ///< temperature, applied to polled raw counts

    connector::MotionProfile motion(connector::MotionKind kind) const;
    const ConnectorConfig& connector_for(const ModuleSpec& m) const;
    const ModuleSpec* find_module(std::string_view id) const;

    bool operator==(const Scenario&) const = default;
};

/// Checks references and ordering; errors name the offending event index.
void validate(const Scenario& s);

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& doc);

std::string save_scenario(const Scenario& s);
Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::filesystem::path& path);

// Shared by the scenario file and the service payloads.
nlohmann::json descriptor_to_json(const bus::ModuleDescriptor& d);
bus::ModuleDescriptor descriptor_from_json(const nlohmann::json& j);
nlohmann::json fault_to_json(const bus::LineFault& f);
bus::LineFault fault_from_json(const nlohmann::json& j);
nlohmann::json strip_to_json(const connector::PmeStrip& s);
connector::PmeStrip strip_from_json(const nlohmann::json& j);
nlohmann::json transaction_to_json(const bus::Transaction& t);
bus::Transaction transaction_from_json(const nlohmann::json& j);
std::string_view channel_key(Channel c);
Channel channel_from_key(std::string_view key);

}  // namespace eknit::sim
