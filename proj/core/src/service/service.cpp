#include "eknit/service/service.hpp"

#include <algorithm>
#include <charconv>

#include "eknit/bus/bus_model.hpp"
#include "eknit/json_util.hpp"
#include "eknit/placement/placement.hpp"
#include "eknit/sim/engine.hpp"
#include "eknit/topology/layout_io.hpp"

namespace eknit::service {

using nlohmann::json;
namespace ju = eknit::json_util;

json Push::to_json(const std::string& session) const {
    return {{"seq", seq}, {"type", type}, {"session", session}, {"payload", payload}};
}

Response error_response(int status, const std::string& code, const std::string& message) {
    return {status, {{"code", code}, {"message", message}}};
}

namespace {

[[noreturn]] void fail(int status, const std::string& code, const std::string& message) {
    throw HttpError(status, code, message);
}

struct Target {
    std::vector<std::string> segments;
    std::map<std::string, std::string> query;
};

Target parse_target(const std::string& target) {
    Target t;
    const auto q = target.find('?');
    const std::string path = target.substr(0, q);
    std::size_t start = 0;
    while (start <= path.size()) {
        const auto slash = path.find('/', start);
        const auto end = slash == std::string::npos ? path.size() : slash;
        if (end > start) t.segments.push_back(path.substr(start, end - start));
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    if (q != std::string::npos) {
        std::string rest = target.substr(q + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            const auto amp = rest.find('&', pos);
            const std::string kv = rest.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
            const auto eq = kv.find('=');
            if (!kv.empty()) t.query[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
            if (amp == std::string::npos) break;
            pos = amp + 1;
        }
    }
    return t;
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = ju::parse(body, "request body");
    if (!j.is_object()) throw MalformedError("request body must be a JSON object");
    return j;
}

json module_json(const bus::AttachedModule& m) {
    return {{"id", m.id},
            {"site", m.site},
            {"address", m.descriptor.address},
            {"kind", bus::kind_name(m.descriptor.kind)},
            {"mass_kg", m.descriptor.mass_kg}};
}

json report_json(const placement::PlacementReport& r) {
    json per = json::array();
    for (const auto& s : r.per_position) {
        per.push_back({{"index", s.position.index},
                       {"distance_cm", s.position.distance_cm},
                       {"region", placement::region_name(s.position.region)},
                       {"mpjre_deg", s.mpjre_deg}});
    }
    return {{"per_position", per}, {"ranking", r.ranking}, {"argmin", r.argmin}};
}

placement::ImuNoiseModel model_from_json(const json& j) {
    constexpr std::string_view w = "model";
    ju::allow_keys(j, w,
                   {"wrist_twist_deg", "soft_tissue_deg", "decoupling_deg", "twist_frequency_hz",
                    "tissue_correlation_s", "elbow_distance_cm", "decoupling_growth_cm"});
    placement::ImuNoiseModel m;
    m.wrist_twist_deg = ju::get_or(j, "wrist_twist_deg", m.wrist_twist_deg, w);
    m.soft_tissue_deg = ju::get_or(j, "soft_tissue_deg", m.soft_tissue_deg, w);
    m.decoupling_deg = ju::get_or(j, "decoupling_deg", m.decoupling_deg, w);
    m.twist_frequency_hz = ju::get_or(j, "twist_frequency_hz", m.twist_frequency_hz, w);
    m.tissue_correlation_s = ju::get_or(j, "tissue_correlation_s", m.tissue_correlation_s, w);
    m.elbow_distance_cm = ju::get_or(j, "elbow_distance_cm", m.elbow_distance_cm, w);
    m.decoupling_growth_cm = ju::get_or(j, "decoupling_growth_cm", m.decoupling_growth_cm, w);
    for (double v : {m.wrist_twist_deg, m.soft_tissue_deg, m.decoupling_deg}) {
        if (!(v >= 0.0)) throw ValidationError("model gains must be >= 0");
    }
    if (!(m.tissue_correlation_s >= 0.0) || !(m.decoupling_growth_cm > 0.0)) {
        throw ValidationError("model time constant must be >= 0 and growth length > 0");
    }
    return m;
}

}  // namespace

struct Service::Session {
    Session(std::string id_, const sim::Scenario& base)
        : id(std::move(id_)), master_seed(base.master_seed), bus(sim::initial_bus(base)) {
        default_strip = base.connectors.empty() ? connector::PmeStrip{} : base.connectors.front().strip;
        for (const auto& m : base.modules) {
            if (m.site) strips[m.id] = base.connector_for(m).strip;
        }
        motions = base.motions;
        last_scan = scan_json();
        emit("session_created", snapshot());
    }

    std::string id;
    std::mutex mutex;
    std::uint64_t master_seed = 0;
    bus::BusModel bus;
    connector::PmeStrip default_strip;
    std::map<std::string, connector::PmeStrip> strips;
    std::vector<connector::MotionProfile> motions;
    std::map<std::string, std::uint64_t> motion_draws;
    std::uint64_t module_counter = 0;
    std::vector<Push> log;
    std::map<std::uint64_t, std::pair<Subscriber, CloseHandler>> subscribers;
    std::uint64_t next_subscription = 0;
    json last_scan;
    Clock::time_point last_active = Clock::now();
    bool closed = false;

    void emit(const std::string& type, json payload) {
        log.push_back({log.size(), type, std::move(payload)});
        const std::string text = log.back().to_json(id).dump();
        for (auto& [sid, sub] : subscribers) sub.first(text);
    }

    json modules_json() const {
        json out = json::array();
        for (const auto& [mid, m] : bus.modules()) out.push_back(module_json(m));
        return out;
    }

    json faults_json() const {
        json out = json::array();
        for (const auto& f : bus.faults()) out.push_back(sim::fault_to_json(f));
        return out;
    }

    json scan_json() const {
        json sites = json::array();
        const auto& layout = bus.layout();
        for (std::size_t s = 0; s < layout.sites().size(); ++s) {
            const auto& link = bus.link(s);
            const auto margin = link.margin_v();
            sites.push_back({{"site", layout.sites()[s].id},
                             {"margin_v", margin ? json(*margin) : json(nullptr)},
                             {"responsive", link.responsive()},
                             {"occupant", bus.occupant(layout.sites()[s].id).value_or("")}});
        }
        return {{"addresses", bus::scan(bus)}, {"sites", sites}};
    }

    json snapshot() const {
        return {{"modules", modules_json()}, {"faults", faults_json()}, {"scan", scan_json()}};
    }

    void refresh_scan() {
        json now = scan_json();
        if (now == last_scan) return;
        last_scan = now;
        emit("scan_changed", last_scan);
    }

    connector::MotionProfile motion(connector::MotionKind kind) const {
        for (const auto& m : motions) {
            if (m.kind == kind) return m;
        }
        return connector::default_motion(kind);
    }

    Response route(const Request& req, const ServiceOptions& options);
    Response attach(const json& body);
    Response detach(const std::string& module);
    Response run_motion(const json& body);
    Response inject(const json& body);
    Response clear(const std::string& fault);
    Response transact(const json& body);
};

Response Service::Session::attach(const json& body) {
    ju::allow_keys(body, "module request", {"id", "site", "descriptor", "connector", "temperature_c"});
    const auto site = ju::get<std::string>(body, "site", "module request");
    if (!bus.layout().site_index(site)) fail(404, "not_found", "unknown site '" + site + "'");
    const bus::ModuleDescriptor descriptor =
        body.contains("descriptor") ? sim::descriptor_from_json(body.at("descriptor")) : bus::make_imu(0x10);
    bus::validate(descriptor);
    std::string mid;
    if (body.contains("id")) {
        mid = ju::get<std::string>(body, "id", "module request");
        if (mid.empty()) throw ValidationError("module id must not be empty");
        if (bus.find_module(mid)) fail(409, "conflict", "module '" + mid + "' already exists");
    } else {
        do {
            mid = "m" + std::to_string(++module_counter);
        } while (bus.find_module(mid));
    }
    if (auto who = bus.occupant(site)) fail(409, "conflict", "site '" + site + "' is occupied by '" + *who + "'");
    const connector::PmeStrip strip =
        body.contains("connector") ? sim::strip_from_json(body.at("connector")) : default_strip;
    bus.attach(mid, site, descriptor);
    bus.find_module(mid)->temperature_c = ju::get_or(body, "temperature_c", 25.0, "module request");
    strips[mid] = strip;
    const json m = module_json(*bus.find_module(mid));
    emit("module_attached", m);
    refresh_scan();
    return {201, {{"id", mid}, {"module", m}}};
}

Response Service::Session::detach(const std::string& module) {
    const auto* m = bus.find_module(module);
    if (!m) fail(404, "not_found", "no module '" + module + "'");
    const json payload = {{"id", module}, {"site", m->site}, {"reason", "removed"}};
    bus.detach(module);
    strips.erase(module);
    emit("module_detached", payload);
    refresh_scan();
    return {200, payload};
}

Response Service::Session::run_motion(const json& body) {
    constexpr std::string_view w = "motion request";
    ju::allow_keys(body, w, {"kind", "trials", "reattach", "connector"});
    const auto name = ju::get<std::string>(body, "kind", w);
    const auto kind = connector::motion_from_name(name);
    if (!kind) throw ValidationError("unknown motion '" + name + "'");
    connector::MotionProfile profile = motion(*kind);
    profile.trials = ju::get_or(body, "trials", profile.trials, w);
    connector::validate(profile);
    const bool reattach = ju::get_or(body, "reattach", false, w);
    std::optional<connector::PmeStrip> override_strip;
    if (body.contains("connector")) override_strip = sim::strip_from_json(body.at("connector"));

    json remaining = json::object();
    json detachments = json::array();
    std::vector<std::pair<std::string, std::string>> removed;
    for (const auto& [mid, m] : bus.modules()) {
        const auto& strip = override_strip ? *override_strip : strips.at(mid);
        const auto seed = sim::stream_seed(master_seed, "motion/" + mid, motion_draws[mid]++);
        const auto outcome = connector::run_trials(m.descriptor.mass_kg, strip, profile, seed);
        if (outcome.detached_trials.empty()) {
            remaining[mid] = profile.trials;
            continue;
        }
        const int first = outcome.detached_trials.front();
        remaining[mid] = reattach ? profile.trials - static_cast<int>(outcome.detached_trials.size()) : first;
        detachments.push_back({{"module", mid}, {"site", m.site}, {"trial", first}});
        if (!reattach) removed.emplace_back(mid, m.site);
    }
    for (const auto& [mid, site] : removed) {
        bus.detach(mid);
        strips.erase(mid);
        emit("module_detached", {{"id", mid}, {"site", site}, {"reason", "motion"}});
    }
    refresh_scan();
    return {200,
            {{"kind", name},
             {"trials", profile.trials},
             {"reattach", reattach},
             {"peak_accel_mps2", profile.peak_accel_mps2},
             {"detachments", detachments},
             {"remaining", remaining}}};
}

Response Service::Session::inject(const json& body) {
    const bus::LineFault fault = sim::fault_from_json(body);
    for (const auto& f : bus.faults()) {
        if (f.id == fault.id) fail(409, "conflict", "fault '" + fault.id + "' already exists");
    }
    bus.inject_fault(fault);
    emit("fault_changed", {{"action", "injected"}, {"fault", sim::fault_to_json(fault)}});
    refresh_scan();
    return {201, sim::fault_to_json(fault)};
}

Response Service::Session::clear(const std::string& fault) {
    if (!bus.clear_fault(fault)) fail(404, "not_found", "no fault '" + fault + "'");
    emit("fault_changed", {{"action", "cleared"}, {"id", fault}});
    refresh_scan();
    return {200, {{"id", fault}}};
}

Response Service::Session::transact(const json& body) {
    const bus::Transaction t = bus::transact(bus, sim::transaction_from_json(body));
    json out = sim::transaction_to_json(t);
    out["result"] = bus::result_name(t.result);
    if (t.result == bus::ResultKind::BusFault) out["fault"] = bus::bus_fault_name(t.fault);
    if (t.result == bus::ResultKind::Ack) out["data"] = t.data;
    return {200, out};
}

Response Service::Session::route(const Request& req, const ServiceOptions& options) {
    const Target target = parse_target(req.target);
    const auto& seg = target.segments;
    const std::string& method = req.method;
    const auto wrong_method = [&] { fail(405, "method_not_allowed", method + " not allowed on " + req.target); };

    if (seg.size() < 2 || seg[0] != "api") fail(404, "no_route", "no route for " + req.target);
    const std::string& what = seg[1];

    if (what == "layout" && seg.size() == 2) {
        if (method != "GET") wrong_method();
        json j = topology::layout_to_json(bus.layout());
        j["hub"] = bus.hub();
        return {200, j};
    }
    if (what == "modules") {
        if (seg.size() == 2) {
            if (method == "GET") return {200, modules_json()};
            if (method == "POST") return attach(parse_body(req.body));
            wrong_method();
        }
        if (seg.size() == 3) {
            if (method == "DELETE") return detach(seg[2]);
            if (method == "GET") {
                const auto* m = bus.find_module(seg[2]);
                if (!m) fail(404, "not_found", "no module '" + seg[2] + "'");
                return {200, module_json(*m)};
            }
            wrong_method();
        }
    }
    if (what == "scan" && seg.size() == 2) {
        if (method != "GET") wrong_method();
        return {200, scan_json()};
    }
    if (what == "motion" && seg.size() == 2) {
        if (method != "POST") wrong_method();
        return run_motion(parse_body(req.body));
    }
    if (what == "placement-eval" && seg.size() == 2) {
        if (method != "POST") wrong_method();
        const json body = parse_body(req.body);
        constexpr std::string_view w = "placement request";
        ju::allow_keys(body, w, {"seeds", "base_seed", "model"});
        const auto seeds = ju::get_or<std::size_t>(body, "seeds", options.placement_seeds, w);
        if (seeds == 0 || seeds > 10000) throw ValidationError("seeds must lie in [1, 10000]");
        const auto model = body.contains("model") ? model_from_json(body.at("model")) : placement::ImuNoiseModel{};
        const auto positions = placement::default_arm_positions();
        const auto report = placement::rank_placements(positions, placement::reference_flexion_trace(), model, seeds,
                                                       ju::get_or<std::uint64_t>(body, "base_seed", 0, w));
        return {200, report_json(report)};
    }
    if (what == "faults") {
        if (seg.size() == 2) {
            if (method == "GET") return {200, faults_json()};
            if (method == "POST") return inject(parse_body(req.body));
            wrong_method();
        }
        if (seg.size() == 3) {
            if (method == "DELETE") return clear(seg[2]);
            wrong_method();
        }
    }
    if (what == "transact" && seg.size() == 2) {
        if (method != "POST") wrong_method();
        return transact(parse_body(req.body));
    }
    if (what == "events" && seg.size() == 2) {
        if (method != "GET") wrong_method();
        std::uint64_t since = 0;
        if (auto it = target.query.find("since"); it != target.query.end()) {
            const auto& v = it->second;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), since);
            if (ec != std::errc{} || p != v.data() + v.size()) throw ValidationError("since must be an integer");
        }
        json out = json::array();
        for (std::size_t i = since; i < log.size(); ++i) out.push_back(log[i].to_json(id));
        return {200, out};
    }
    fail(404, "no_route", "no route for " + method + " " + req.target);
}

Service::Service(sim::Scenario base, ServiceOptions options) : base_(std::move(base)), options_(options) {
    sim::validate(base_);
}

Service::~Service() = default;

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<Service::Session> Service::find_or_create(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto& slot = sessions_[id];
    if (!slot) slot = std::make_shared<Session>(id, base_);
    return slot;
}

bool Service::has_session(const std::string& session) { return find(session) != nullptr; }

std::string Service::create_session() {
    std::string id;
    {
        std::lock_guard lock(mutex_);
        do {
            id = "s" + std::to_string(++session_counter_);
        } while (sessions_.contains(id));
    }
    find_or_create(id);
    return id;
}

Response Service::handle(const Request& request) {
    try {
        const Target target = parse_target(request.target);
        if (target.segments.size() == 2 && target.segments[0] == "api") {
            if (target.segments[1] == "schema") {
                if (request.method != "GET") fail(405, "method_not_allowed", "schema is read-only");
                return {200, schema()};
            }
            if (target.segments[1] == "sessions") {
                if (request.method != "POST") fail(405, "method_not_allowed", "use POST to create a session");
                const std::string id = create_session();
                return {201, {{"session", id}, {"snapshot", pushes(id).front().payload}}};
            }
        }
        std::shared_ptr<Session> session =
            request.session == kDefaultSession ? find_or_create(request.session) : find(request.session);
        if (!session) fail(404, "unknown_session", "no session '" + request.session + "'");
        std::lock_guard lock(session->mutex);
        if (session->closed) fail(404, "unknown_session", "session '" + request.session + "' has expired");
        session->last_active = Clock::now();
        return session->route(request, options_);
    } catch (const HttpError& e) {
        return error_response(e.status(), e.code(), e.what());
    } catch (const MalformedError& e) {
        return error_response(400, "malformed", e.what());
    } catch (const SchemaError& e) {
        return error_response(400, "schema", e.what());
    } catch (const ValidationError& e) {
        return error_response(400, "invalid", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

std::optional<std::uint64_t> Service::subscribe(const std::string& session, Subscriber on_push,
                                                CloseHandler on_close, std::uint64_t from_seq) {
    auto s = session == kDefaultSession ? find_or_create(session) : find(session);
    if (!s) return std::nullopt;
    std::lock_guard lock(s->mutex);
    if (s->closed) return std::nullopt;
    s->last_active = Clock::now();
    for (std::size_t i = from_seq; i < s->log.size(); ++i) on_push(s->log[i].to_json(s->id).dump());
    const auto sid = s->next_subscription++;
    s->subscribers.emplace(sid, std::make_pair(std::move(on_push), std::move(on_close)));
    return sid;
}

void Service::unsubscribe(const std::string& session, std::uint64_t subscription) {
    auto s = find(session);
    if (!s) return;
    std::lock_guard lock(s->mutex);
    s->subscribers.erase(subscription);
}

std::vector<Push> Service::pushes(const std::string& session, std::uint64_t from_seq) {
    auto s = find(session);
    if (!s) return {};
    std::lock_guard lock(s->mutex);
    if (from_seq >= s->log.size()) return {};
    return {s->log.begin() + static_cast<std::ptrdiff_t>(from_seq), s->log.end()};
}

std::size_t Service::expire_idle(Clock::time_point now) {
    std::vector<std::shared_ptr<Session>> expired;
    {
        std::lock_guard lock(mutex_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::lock_guard session_lock(it->second->mutex);
            if (now - it->second->last_active > options_.idle_timeout) {
                expired.push_back(it->second);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& s : expired) {
        std::lock_guard lock(s->mutex);
        s->closed = true;
        for (auto& [sid, sub] : s->subscribers) {
            if (sub.second) sub.second();
        }
        s->subscribers.clear();
    }
    return expired.size();
}

json Service::schema() {
    const json module = {{"id", "string"}, {"site", "string"}, {"address", "integer 0x08..0x77"},
                         {"kind", "imu | temperature"}, {"mass_kg", "number"}};
    const json descriptor = {{"address", "integer 0x08..0x77"},
                             {"kind", "imu | temperature"},
                             {"mass_kg", "number, optional"},
                             {"footprint_mm", "[w, h], optional"},
                             {"registers", "object hex-byte -> byte, optional"},
                             {"sensor", "{slope_c_per_count, intercept_c}, optional"}};
    const json strip = {{"width_mm", "number"}, {"length_mm", "number"}, {"curve", "[[tension_n, strain], ...]"},
                        {"holding_n", "number"}, {"holding_sigma_n", "number"}};
    const json fault = {{"id", "string"},
                        {"type", "open | short_adjacent"},
                        {"channel_a", "vcc | sda_p | sda_n | scl_p | scl_n | gnd"},
                        {"channel_b", "channel, short_adjacent only"},
                        {"group", "string"},
                        {"x_from_cm", "number"},
                        {"x_to_cm", "number"}};
    const json scan = {{"addresses", "[integer]"},
                       {"sites", "[{site, margin_v: number | null, responsive: bool, occupant: string}]"}};
    return {
        {"session_header", kSessionHeader},
        // Heatmap bins, worst to best. A margin falls in the last class whose
        // min_v it reaches; zero and below stay failed.
        {"margin_classes",
         json::array({{{"class", "failed"}, {"min_v", nullptr}, {"note", "margin_v <= 0 or null"}},
                      {{"class", "poor"}, {"min_v", 0.0}, {"note", "0 < margin_v"}},
                      {{"class", "marginal"}, {"min_v", 0.5}},
                      {{"class", "good"}, {"min_v", 1.0}},
                      {{"class", "excellent"}, {"min_v", 2.5}}})},
        {"error", {{"code", "string"}, {"message", "string"}}},
        {"requests",
         {{"POST /api/sessions", json::object()},
          {"POST /api/modules",
           {{"site", "string"}, {"id", "string, optional"}, {"descriptor", descriptor},
            {"connector", strip}, {"temperature_c", "number, optional"}}},
          {"POST /api/motion",
           {{"kind", "walking | running | jumping | rotating"}, {"trials", "integer, optional"},
            {"reattach", "bool, optional"}, {"connector", "strip, optional"}}},
          {"POST /api/placement-eval",
           {{"seeds", "integer, optional"}, {"base_seed", "integer, optional"}, {"model", "noise gains, optional"}}},
          {"POST /api/faults", fault},
          {"POST /api/transact",
           {{"address", "integer"}, {"direction", "read | write"}, {"payload", "[byte]"},
            {"read_length", "integer, reads only"}}}}},
        {"responses",
         {{"GET /api/layout", "layout document plus hub"},
          {"GET /api/modules", json::array({module})},
          {"GET /api/faults", json::array({fault})},
          {"GET /api/scan", scan},
          {"POST /api/placement-eval",
           {{"per_position", "[{index, distance_cm, region, mpjre_deg}]"}, {"ranking", "[index]"},
            {"argmin", "index"}}}}},
        {"push",
         {{"envelope", {{"seq", "integer, strictly increasing from 0"}, {"type", "string"},
                        {"session", "string"}, {"payload", "object"}}},
          {"session_created", {{"modules", "[module]"}, {"faults", "[fault]"}, {"scan", scan}}},
          {"module_attached", module},
          {"module_detached", {{"id", "string"}, {"site", "string"}, {"reason", "removed | motion"}}},
          {"fault_changed", {{"action", "injected | cleared"}, {"fault", "fault, when injected"},
                             {"id", "string, when cleared"}}},
          {"scan_changed", scan}}}};
}

}  // namespace eknit::service
