#include "eknit/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "eknit/json_util.hpp"
#include "eknit/topology/layout_io.hpp"

namespace eknit::sim {

using nlohmann::json;
namespace ju = eknit::json_util;
using connector::MotionKind;

namespace {

std::string hex_byte(std::uint8_t b) {
    static constexpr char digits[] = "0123456789abcdef";
    return {'0', 'x', digits[b >> 4], digits[b & 0xF]};
}

std::uint8_t parse_byte_key(const std::string& key) {
    std::size_t used = 0;
    int v = -1;
    try {
        v = std::stoi(key, &used, 0);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != key.size() || v < 0 || v > 0xFF) {
        throw MalformedError("register key '" + key + "' is not a byte");
    }
    return static_cast<std::uint8_t>(v);
}

template <typename T>
T byte_value(const json& j, std::string_view key, std::string_view where) {
    const auto v = ju::get<long long>(j, key, where);
    if (v < 0 || v > static_cast<long long>(std::numeric_limits<T>::max())) {
        throw MalformedError(std::string(where) + "." + std::string(key) + " out of range");
    }
    return static_cast<T>(v);
}

std::vector<std::uint8_t> byte_array(const json& j, std::string_view key, std::string_view where) {
    std::vector<std::uint8_t> out;
    if (!j.contains(key)) return out;
    const json& arr = j.at(std::string(key));
    if (!arr.is_array()) throw MalformedError(std::string(where) + "." + std::string(key) + ": expected an array");
    for (const auto& b : arr) {
        if (!b.is_number_integer() || b.get<long long>() < 0 || b.get<long long>() > 0xFF) {
            throw MalformedError(std::string(where) + "." + std::string(key) + ": bytes must be 0..255");
        }
        out.push_back(static_cast<std::uint8_t>(b.get<int>()));
    }
    return out;
}

MotionKind motion_kind(const json& j, std::string_view where) {
    const auto name = ju::get<std::string>(j, "kind", where);
    const auto kind = connector::motion_from_name(name);
    if (!kind) throw MalformedError(std::string(where) + ": unknown motion '" + name + "'");
    return *kind;
}

json line_to_json(const signal::LinkConfig& c) {
    return {{"ohm_per_m", c.line.ohm_per_m},
            {"capacitance_f_per_m", c.line.capacitance_f_per_m},
            {"load_capacitance_f", c.line.load_capacitance_f},
            {"supply_v", c.line.supply_v},
            {"rise_time_s", c.line.rise_time_s},
            {"termination_ohm", c.line.termination_ohm},
            {"bitrate_hz", c.bitrate_hz},
            {"sample_rate_hz", c.sample_rate_hz},
            {"common_mode_v", c.common_mode_v},
            {"hysteresis_v", c.hysteresis_v},
            {"threshold_fraction", c.threshold_fraction}};
}

signal::LinkConfig line_from_json(const json& j) {
    constexpr std::string_view w = "line";
    ju::allow_keys(j, w,
                   {"ohm_per_m", "capacitance_f_per_m", "load_capacitance_f", "supply_v",
                    "rise_time_s", "termination_ohm", "bitrate_hz", "sample_rate_hz",
                    "common_mode_v", "hysteresis_v", "threshold_fraction"});
    signal::LinkConfig c;
    c.line.ohm_per_m = ju::get_or(j, "ohm_per_m", c.line.ohm_per_m, w);
    c.line.capacitance_f_per_m = ju::get_or(j, "capacitance_f_per_m", c.line.capacitance_f_per_m, w);
    c.line.load_capacitance_f = ju::get_or(j, "load_capacitance_f", c.line.load_capacitance_f, w);
    c.line.supply_v = ju::get_or(j, "supply_v", c.line.supply_v, w);
    c.line.rise_time_s = ju::get_or(j, "rise_time_s", c.line.rise_time_s, w);
    c.line.termination_ohm = ju::get_or(j, "termination_ohm", c.line.termination_ohm, w);
    c.bitrate_hz = ju::get_or(j, "bitrate_hz", c.bitrate_hz, w);
    c.sample_rate_hz = ju::get_or(j, "sample_rate_hz", c.sample_rate_hz, w);
    c.common_mode_v = ju::get_or(j, "common_mode_v", c.common_mode_v, w);
    c.hysteresis_v = ju::get_or(j, "hysteresis_v", c.hysteresis_v, w);
    c.threshold_fraction = ju::get_or(j, "threshold_fraction", c.threshold_fraction, w);
    return c;
}

json motion_to_json(const connector::MotionProfile& m) {
    return {{"kind", connector::motion_name(m.kind)},
            {"peak_accel_mps2", m.peak_accel_mps2},
            {"period_s", m.period_s},
            {"trials", m.trials}};
}

connector::MotionProfile motion_from_json(const json& j) {
    constexpr std::string_view w = "motions[]";
    ju::allow_keys(j, w, {"kind", "peak_accel_mps2", "period_s", "trials"});
    connector::MotionProfile m = connector::default_motion(motion_kind(j, w));
    m.peak_accel_mps2 = ju::get_or(j, "peak_accel_mps2", m.peak_accel_mps2, w);
    m.period_s = ju::get_or(j, "period_s", m.period_s, w);
    m.trials = ju::get_or(j, "trials", m.trials, w);
    return m;
}

json event_to_json(const Event& e) {
    json j = {{"time_s", e.time_s}, {"type", action_name(e.action)}};
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, AttachAction>) {
                j["module"] = a.module;
                j["site"] = a.site;
            } else if constexpr (std::is_same_v<T, DetachAction>) {
                j["module"] = a.module;
            } else if constexpr (std::is_same_v<T, MotionAction>) {
                j["kind"] = connector::motion_name(a.kind);
                if (a.trials) j["trials"] = *a.trials;
                j["reattach"] = a.reattach;
            } else if constexpr (std::is_same_v<T, TransactAction>) {
                j["transaction"] = transaction_to_json(a.transaction);
            } else if constexpr (std::is_same_v<T, InjectFaultAction>) {
                j["fault"] = fault_to_json(a.fault);
            } else if constexpr (std::is_same_v<T, ClearFaultAction>) {
                j["fault"] = a.fault;
            } else if constexpr (std::is_same_v<T, SetTemperatureAction>) {
                j["module"] = a.module;
                j["temperature_c"] = a.temperature_c;
            }
        },
        e.action);
    return j;
}

Event event_from_json(const json& j, std::size_t index) {
    const std::string w = "events[" + std::to_string(index) + "]";
    ju::require_object(j, w);
    const auto type = ju::get<std::string>(j, "type", w);
    Event e;
    e.time_s = ju::get<double>(j, "time_s", w);
    if (type == "attach") {
        ju::allow_keys(j, w, {"time_s", "type", "module", "site"});
        e.action = AttachAction{ju::get<std::string>(j, "module", w), ju::get<std::string>(j, "site", w)};
    } else if (type == "detach") {
        ju::allow_keys(j, w, {"time_s", "type", "module"});
        e.action = DetachAction{ju::get<std::string>(j, "module", w)};
    } else if (type == "motion") {
        ju::allow_keys(j, w, {"time_s", "type", "kind", "trials", "reattach"});
        MotionAction m;
        m.kind = motion_kind(j, w);
        if (j.contains("trials")) m.trials = ju::get<int>(j, "trials", w);
        m.reattach = ju::get_or(j, "reattach", false, w);
        e.action = m;
    } else if (type == "transact") {
        ju::allow_keys(j, w, {"time_s", "type", "transaction"});
        e.action = TransactAction{transaction_from_json(ju::get<json>(j, "transaction", w))};
    } else if (type == "poll_all") {
        ju::allow_keys(j, w, {"time_s", "type"});
        e.action = PollAllAction{};
    } else if (type == "inject_fault") {
        ju::allow_keys(j, w, {"time_s", "type", "fault"});
        e.action = InjectFaultAction{fault_from_json(ju::get<json>(j, "fault", w))};
    } else if (type == "clear_fault") {
        ju::allow_keys(j, w, {"time_s", "type", "fault"});
        e.action = ClearFaultAction{ju::get<std::string>(j, "fault", w)};
    } else if (type == "set_temperature") {
        ju::allow_keys(j, w, {"time_s", "type", "module", "temperature_c"});
        e.action = SetTemperatureAction{ju::get<std::string>(j, "module", w),
                                        ju::get<double>(j, "temperature_c", w)};
    } else {
        throw SchemaError(w + ": unknown event type '" + type + "'");
    }
    return e;
}

}  // namespace

std::string_view action_name(const Action& a) {
    static constexpr std::string_view names[] = {"attach",      "detach",       "motion",
                                                 "transact",    "poll_all",     "inject_fault",
                                                 "clear_fault", "set_temperature"};
    return names[a.index()];
}

std::string_view channel_key(Channel c) {
    switch (c) {
        case Channel::Vcc: return "vcc";
        case Channel::SdaP: return "sda_p";
        case Channel::SdaN: return "sda_n";
        case Channel::SclP: return "scl_p";
        case Channel::SclN: return "scl_n";
        case Channel::Gnd: return "gnd";
    }
    return "?";
}

Channel channel_from_key(std::string_view key) {
    for (auto c : kAllChannels) {
        if (channel_key(c) == key) return c;
    }
    throw MalformedError("unknown channel '" + std::string(key) + "'");
}

json descriptor_to_json(const bus::ModuleDescriptor& d) {
    json regs = json::object();
    for (const auto& [k, v] : d.registers) regs[hex_byte(k)] = v;
    json j = {{"address", d.address},
              {"kind", bus::kind_name(d.kind)},
              {"mass_kg", d.mass_kg},
              {"footprint_mm", {d.footprint_w_mm, d.footprint_h_mm}},
              {"registers", regs}};
    if (d.kind == bus::ModuleKind::Temperature) {
        j["sensor"] = {{"slope_c_per_count", d.sensor.slope_c_per_count},
                       {"intercept_c", d.sensor.intercept_c}};
    }
    return j;
}

bus::ModuleDescriptor descriptor_from_json(const json& j) {
    constexpr std::string_view w = "descriptor";
    ju::allow_keys(j, w, {"address", "kind", "mass_kg", "footprint_mm", "registers", "sensor"});
    const auto address = byte_value<std::uint8_t>(j, "address", w);
    const auto kind_text = ju::get_or<std::string>(j, "kind", "imu", w);
    const auto kind = bus::kind_from_name(kind_text);
    if (!kind) throw MalformedError("descriptor: unknown kind '" + kind_text + "'");
    bus::ModuleDescriptor d = *kind == bus::ModuleKind::Imu ? bus::make_imu(address) : bus::make_temperature(address);
    d.mass_kg = ju::get_or(j, "mass_kg", d.mass_kg, w);
    if (j.contains("footprint_mm")) {
        const auto fp = ju::get<std::vector<double>>(j, "footprint_mm", w);
        if (fp.size() != 2) throw MalformedError("descriptor.footprint_mm: expected [w, h]");
        d.footprint_w_mm = fp[0];
        d.footprint_h_mm = fp[1];
    }
    if (j.contains("registers")) {
        const json& regs = j.at("registers");
        ju::require_object(regs, "descriptor.registers");
        d.registers.clear();
        for (const auto& [k, v] : regs.items()) {
            if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > 0xFF) {
                throw MalformedError("descriptor.registers: values must be bytes");
            }
            d.registers[parse_byte_key(k)] = static_cast<std::uint8_t>(v.get<int>());
        }
    }
    if (j.contains("sensor")) {
        const json& s = j.at("sensor");
        ju::allow_keys(s, "descriptor.sensor", {"slope_c_per_count", "intercept_c"});
        d.sensor.slope_c_per_count = ju::get_or(s, "slope_c_per_count", d.sensor.slope_c_per_count, w);
        d.sensor.intercept_c = ju::get_or(s, "intercept_c", d.sensor.intercept_c, w);
    }
    return d;
}

json fault_to_json(const bus::LineFault& f) {
    json j = {{"id", f.id},
              {"type", f.type == bus::FaultType::Open ? "open" : "short_adjacent"},
              {"channel_a", channel_key(f.channel_a)},
              {"group", f.span.group_id},
              {"x_from_cm", f.span.x_from_cm},
              {"x_to_cm", f.span.x_to_cm}};
    if (f.type == bus::FaultType::ShortAdjacent) j["channel_b"] = channel_key(f.channel_b);
    return j;
}

bus::LineFault fault_from_json(const json& j) {
    constexpr std::string_view w = "fault";
    ju::allow_keys(j, w, {"id", "type", "channel_a", "channel_b", "group", "x_from_cm", "x_to_cm"});
    bus::LineFault f;
    f.id = ju::get<std::string>(j, "id", w);
    const auto type = ju::get<std::string>(j, "type", w);
    if (type == "open") {
        f.type = bus::FaultType::Open;
    } else if (type == "short_adjacent") {
        f.type = bus::FaultType::ShortAdjacent;
    } else {
        throw MalformedError("fault: unknown type '" + type + "'");
    }
    f.channel_a = channel_from_key(ju::get<std::string>(j, "channel_a", w));
    if (f.type == bus::FaultType::ShortAdjacent) {
        f.channel_b = channel_from_key(ju::get<std::string>(j, "channel_b", w));
    } else if (j.contains("channel_b")) {
        throw SchemaError("fault: channel_b only applies to short_adjacent");
    }
    f.span.group_id = ju::get<std::string>(j, "group", w);
    f.span.x_from_cm = ju::get<double>(j, "x_from_cm", w);
    f.span.x_to_cm = ju::get<double>(j, "x_to_cm", w);
    return f;
}

json strip_to_json(const connector::PmeStrip& s) {
    json curve = json::array();
    for (const auto& p : s.curve) curve.push_back({p.tension_n, p.strain});
    return {{"width_mm", s.width_mm},
            {"length_mm", s.length_mm},
            {"curve", curve},
            {"holding_n", s.holding_n},
            {"holding_sigma_n", s.holding_sigma_n}};
}

connector::PmeStrip strip_from_json(const json& j) {
    constexpr std::string_view w = "strip";
    ju::allow_keys(j, w, {"id", "width_mm", "length_mm", "curve", "holding_n", "holding_sigma_n"});
    connector::PmeStrip s;
    s.width_mm = ju::get_or(j, "width_mm", s.width_mm, w);
    s.length_mm = ju::get_or(j, "length_mm", s.length_mm, w);
    if (j.contains("curve")) {
        s.curve.clear();
        for (const auto& p : ju::get<std::vector<std::array<double, 2>>>(j, "curve", w)) {
            s.curve.push_back({p[0], p[1]});
        }
    }
    s.holding_n = ju::get_or(j, "holding_n", s.holding_n, w);
    s.holding_sigma_n = ju::get_or(j, "holding_sigma_n", s.holding_sigma_n, w);
    connector::validate(s);
    return s;
}

json transaction_to_json(const bus::Transaction& t) {
    json j = {{"address", t.address},
              {"direction", t.direction == bus::Direction::Read ? "read" : "write"},
              {"payload", t.payload}};
    if (t.direction == bus::Direction::Read) j["read_length"] = t.read_length;
    return j;
}

bus::Transaction transaction_from_json(const json& j) {
    constexpr std::string_view w = "transaction";
    ju::allow_keys(j, w, {"address", "direction", "payload", "read_length"});
    bus::Transaction t;
    t.address = byte_value<std::uint8_t>(j, "address", w);
    const auto dir = ju::get_or<std::string>(j, "direction", "read", w);
    if (dir == "read") {
        t.direction = bus::Direction::Read;
        t.read_length = ju::get_or<std::size_t>(j, "read_length", 1, w);
    } else if (dir == "write") {
        t.direction = bus::Direction::Write;
        t.read_length = 0;
        if (j.contains("read_length")) throw SchemaError("transaction: read_length only applies to reads");
    } else {
        throw MalformedError("transaction: direction must be read or write");
    }
    t.payload = byte_array(j, "payload", w);
    return t;
}

connector::MotionProfile Scenario::motion(MotionKind kind) const {
    for (const auto& m : motions) {
        if (m.kind == kind) return m;
    }
    return connector::default_motion(kind);
}

const ConnectorConfig& Scenario::connector_for(const ModuleSpec& m) const {
    for (const auto& c : connectors) {
        if (c.id == m.connector) return c;
    }
    throw ValidationError("module '" + m.id + "' uses unknown connector '" + m.connector + "'");
}

const ModuleSpec* Scenario::find_module(std::string_view id) const {
    for (const auto& m : modules) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

void validate(const Scenario& s) {
    if (s.schema != kScenarioSchema) throw SchemaError("unsupported scenario schema " + std::to_string(s.schema));
    s.layout.require_site(s.hub);
    signal::validate(s.link);
    if (!(s.misalignment_sigma_mm >= 0.0) || !std::isfinite(s.misalignment_sigma_mm)) {
        throw ValidationError("misalignment sigma must be finite and >= 0");
    }
    if (s.calibration && (!std::isfinite(s.calibration->slope_c_per_count) ||
                          !std::isfinite(s.calibration->intercept_c))) {
        throw ValidationError("calibration coefficients must be finite");
    }
    std::set<std::string> ids;
    for (const auto& c : s.connectors) {
        if (!ids.insert(c.id).second) throw ValidationError("duplicate connector '" + c.id + "'");
        connector::validate(c.strip);
    }
    std::set<MotionKind> kinds;
    for (const auto& m : s.motions) {
        if (!kinds.insert(m.kind).second) {
            throw ValidationError("motion '" + std::string(connector::motion_name(m.kind)) + "' listed twice");
        }
        connector::validate(m);
    }
    ids.clear();
    std::set<std::string> occupied;
    for (const auto& m : s.modules) {
        if (m.id.empty()) throw ValidationError("module id must not be empty");
        if (!ids.insert(m.id).second) throw ValidationError("duplicate module '" + m.id + "'");
        s.connector_for(m);
        bus::validate(m.descriptor);
        if (!std::isfinite(m.temperature_c)) throw ValidationError("module '" + m.id + "': temperature must be finite");
        if (m.site) {
            s.layout.require_site(*m.site);
            if (!occupied.insert(*m.site).second) {
                throw ValidationError("site '" + *m.site + "' holds two modules at start");
            }
        }
    }

    double last = 0.0;
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        const Event& e = s.events[i];
        const std::string where = "event " + std::to_string(i) + ": ";
        try {
            if (!(e.time_s >= 0.0) || !std::isfinite(e.time_s)) throw ValidationError("time must be >= 0");
            if (e.time_s < last) throw ValidationError("events must be in time order");
            last = e.time_s;
            const auto need_module = [&](const std::string& id) {
                if (!s.find_module(id)) throw ValidationError("unknown module '" + id + "'");
            };
            std::visit(
                [&](const auto& a) {
                    using T = std::decay_t<decltype(a)>;
                    if constexpr (std::is_same_v<T, AttachAction>) {
                        need_module(a.module);
                        s.layout.require_site(a.site);
                    } else if constexpr (std::is_same_v<T, DetachAction> ||
                                         std::is_same_v<T, SetTemperatureAction>) {
                        need_module(a.module);
                    } else if constexpr (std::is_same_v<T, MotionAction>) {
                        if (a.trials && *a.trials < 1) throw ValidationError("trial count must be >= 1");
                    } else if constexpr (std::is_same_v<T, InjectFaultAction>) {
                        bus::validate(a.fault, s.layout);
                    } else if constexpr (std::is_same_v<T, ClearFaultAction>) {
                        if (a.fault.empty()) throw ValidationError("fault id must not be empty");
                    }
                },
                e.action);
        } catch (const ValidationError& err) {
            throw ValidationError(where + err.what());
        }
    }
}

json scenario_to_json(const Scenario& s) {
    json connectors = json::array();
    for (const auto& c : s.connectors) {
        json j = strip_to_json(c.strip);
        j["id"] = c.id;
        connectors.push_back(j);
    }
    json motions = json::array();
    for (const auto& m : s.motions) motions.push_back(motion_to_json(m));
    json modules = json::array();
    for (const auto& m : s.modules) {
        json j = {{"id", m.id},
                  {"connector", m.connector},
                  {"descriptor", descriptor_to_json(m.descriptor)},
                  {"temperature_c", m.temperature_c}};
        if (m.site) j["site"] = *m.site;
        modules.push_back(j);
    }
    json events = json::array();
    for (const auto& e : s.events) events.push_back(event_to_json(e));
    json doc = {{"schema", s.schema},
                {"master_seed", s.master_seed},
                {"hub", s.hub},
                {"layout", topology::layout_to_json(s.layout)},
                {"line", line_to_json(s.link)},
                {"misalignment", {{"sigma_mm", s.misalignment_sigma_mm}}},
                {"connectors", connectors},
                {"motions", motions},
                {"modules", modules},
                {"events", events}};
    if (s.calibration) {
        doc["calibration"] = {{"slope_c_per_count", s.calibration->slope_c_per_count},
                              {"intercept_c", s.calibration->intercept_c},
                              {"r2", s.calibration->r2}};
    }
    return doc;
}

Scenario scenario_from_json(const json& doc) {
    constexpr std::string_view w = "scenario";
    ju::allow_keys(doc, w,
                   {"schema", "master_seed", "hub", "layout", "line", "misalignment", "connectors",
                    "motions", "modules", "events", "calibration"});
    ju::require_schema(doc, kScenarioSchema, w);
    Scenario s(topology::layout_from_json(ju::get<json>(doc, "layout", w)),
               ju::get<std::string>(doc, "hub", w));
    s.master_seed = ju::get_or<std::uint64_t>(doc, "master_seed", 0, w);
    if (doc.contains("line")) s.link = line_from_json(doc.at("line"));
    if (doc.contains("misalignment")) {
        const json& m = doc.at("misalignment");
        ju::allow_keys(m, "misalignment", {"sigma_mm"});
        s.misalignment_sigma_mm = ju::get_or(m, "sigma_mm", 0.0, "misalignment");
    }
    for (const auto& c : ju::get_or(doc, "connectors", json::array(), w)) {
        s.connectors.push_back({ju::get<std::string>(c, "id", "connectors[]"), strip_from_json(c)});
    }
    for (const auto& m : ju::get_or(doc, "motions", json::array(), w)) s.motions.push_back(motion_from_json(m));
    if (doc.contains("calibration")) {
        const json& c = doc.at("calibration");
        constexpr std::string_view cw = "calibration";
        ju::allow_keys(c, cw, {"slope_c_per_count", "intercept_c", "r2"});
        s.calibration = placement::LinearCalibration{ju::get<double>(c, "slope_c_per_count", cw),
                                                     ju::get<double>(c, "intercept_c", cw),
                                                     ju::get_or(c, "r2", 0.0, cw)};
    }
    for (const auto& m : ju::get_or(doc, "modules", json::array(), w)) {
        constexpr std::string_view mw = "modules[]";
        ju::allow_keys(m, mw, {"id", "site", "connector", "descriptor", "temperature_c"});
        ModuleSpec spec;
        spec.id = ju::get<std::string>(m, "id", mw);
        if (m.contains("site")) spec.site = ju::get<std::string>(m, "site", mw);
        spec.connector = ju::get<std::string>(m, "connector", mw);
        spec.descriptor = descriptor_from_json(ju::get<json>(m, "descriptor", mw));
        spec.temperature_c = ju::get_or(m, "temperature_c", 25.0, mw);
        s.modules.push_back(std::move(spec));
    }
    const json events = ju::get_or(doc, "events", json::array(), w);
    if (!events.is_array()) throw MalformedError("scenario.events: expected an array");
    for (std::size_t i = 0; i < events.size(); ++i) s.events.push_back(event_from_json(events[i], i));
    validate(s);
    return s;
}

std::string save_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

Scenario load_scenario(const std::string& text) { return scenario_from_json(ju::parse(text, "scenario")); }

Scenario load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read scenario file '" + path.string() + "'");
    return load_scenario(ss.str());
}

}  // namespace eknit::sim
