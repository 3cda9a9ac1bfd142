#include "eknit/sim/engine.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "eknit/placement/calibration.hpp"
#include "eknit/random.hpp"
#include "eknit/topology/misalignment.hpp"

namespace eknit::sim {

using nlohmann::json;

std::uint64_t stream_seed(std::uint64_t master, std::string_view stream, std::uint64_t counter) {
    return derive_seed(master, fnv1a(stream), counter);
}

topology::GarmentLayout effective_layout(const Scenario& s) {
    if (s.misalignment_sigma_mm <= 0.0) return s.layout;
    return topology::sample_misalignment(s.layout, s.misalignment_sigma_mm, s.layout.tolerance_mm(),
                                         stream_seed(s.master_seed, "misalignment", 0));
}

bus::BusModel initial_bus(const Scenario& s) {
    bus::BusModel bus(effective_layout(s), s.hub, s.link);
    for (const auto& m : s.modules) {
        if (!m.site) continue;
        bus.attach(m.id, *m.site, m.descriptor);
        bus.find_module(m.id)->temperature_c = m.temperature_c;
    }
    return bus;
}

namespace {

json bytes_json(const std::vector<std::uint8_t>& v) { return json(v); }

struct Runner {
    const Scenario& s;
    bus::BusModel bus;
    SimResult out;
    std::map<std::string, double> temperature;
    std::map<std::string, std::uint64_t> motion_draws;

    explicit Runner(const Scenario& sc) : s(sc), bus(initial_bus(sc)) {
        for (const auto& m : s.modules) temperature[m.id] = m.temperature_c;
    }

    bus::Transaction log(double t, bus::Transaction tx) {
        tx = bus::transact(bus, std::move(tx));
        out.transactions.push_back({t, tx});
        ++out.summary.transactions;
        switch (tx.result) {
            case bus::ResultKind::Ack: ++out.summary.acks; break;
            case bus::ResultKind::BusFault: ++out.summary.bus_faults; break;
            default: ++out.summary.nacks; break;
        }
        return tx;
    }

    void apply(EventOutcome& o, const AttachAction& a) {
        o.detail = {{"module", a.module}, {"site", a.site}};
        if (bus.find_module(a.module)) {
            o.status = "rejected";
            o.detail["reason"] = "module already attached";
            return;
        }
        if (auto who = bus.occupant(a.site)) {
            o.status = "rejected";
            o.detail["reason"] = "site occupied by " + *who;
            return;
        }
        const ModuleSpec& spec = *s.find_module(a.module);
        bus.attach(spec.id, a.site, spec.descriptor);
        bus.find_module(spec.id)->temperature_c = temperature[spec.id];
        o.detail["address"] = spec.descriptor.address;
        o.status = "ok";
    }

    void apply(EventOutcome& o, const DetachAction& a) {
        o.detail = {{"module", a.module}};
        o.status = bus.detach(a.module) ? "ok" : "not_attached";
    }

    void apply(EventOutcome& o, const MotionAction& a) {
        connector::MotionProfile profile = s.motion(a.kind);
        if (a.trials) profile.trials = *a.trials;
        const std::string kind(connector::motion_name(a.kind));
        const auto n = static_cast<std::size_t>(profile.trials);

        std::vector<int> intact(n, 0);
        json remaining = json::object();
        json detached = json::array();
        std::vector<std::string> to_remove;
        for (const auto& [id, m] : bus.modules()) {
            const ModuleSpec& spec = *s.find_module(id);
            const auto& strip = s.connector_for(spec).strip;
            const auto seed = stream_seed(s.master_seed, "motion/" + id, motion_draws[id]++);
            const auto trial = connector::run_trials(m.descriptor.mass_kg, strip, profile, seed);

            std::vector<bool> off(n, false);
            for (int k : trial.detached_trials) off[static_cast<std::size_t>(k)] = true;
            int kept = 0;
            std::optional<int> first;
            for (std::size_t k = 0; k < n; ++k) {
                if (off[k] && !first) first = static_cast<int>(k);
                const bool on = a.reattach ? !off[k] : !first;
                if (on) {
                    ++intact[k];
                    ++kept;
                }
            }
            remaining[id] = kept;
            if (first) {
                detached.push_back(id);
                out.detachments.push_back({o.time_s, o.index, id, m.site, kind, *first});
                if (!a.reattach) to_remove.push_back(id);
            }
        }
        for (const auto& id : to_remove) bus.detach(id);

        double mean = 0.0;
        for (int c : intact) mean += c;
        mean = n ? mean / static_cast<double>(n) : 0.0;
        out.summary.mean_intact_by_motion[kind] = mean;
        o.detail = {{"kind", kind},
                    {"trials", profile.trials},
                    {"reattach", a.reattach},
                    {"peak_accel_mps2", profile.peak_accel_mps2},
                    {"remaining", remaining},
                    {"intact_per_trial", intact},
                    {"mean_intact", mean},
                    {"detached", detached}};
        o.status = "ok";
    }

    void apply(EventOutcome& o, const TransactAction& a) {
        const auto tx = log(o.time_s, a.transaction);
        o.status = std::string(bus::result_name(tx.result));
        o.detail = transaction_to_json(tx);
        if (tx.result == bus::ResultKind::BusFault) o.detail["fault"] = bus::bus_fault_name(tx.fault);
        if (tx.result == bus::ResultKind::Ack) o.detail["data"] = bytes_json(tx.data);
    }

    void apply(EventOutcome& o, const PollAllAction&) {
        const auto addresses = bus::scan(bus);
        json reads = json::array();
        for (auto addr : addresses) {
            bus::ModuleKind kind = bus::ModuleKind::Imu;
            for (const auto& [id, m] : bus.modules()) {
                if (m.descriptor.address == addr && bus.link(m.site).responsive()) {
                    kind = m.descriptor.kind;
                    break;
                }
            }
            const auto tx = kind == bus::ModuleKind::Imu
                                ? log(o.time_s, bus::read_request(addr, bus::reg::kImuData, bus::reg::kImuDataLength))
                                : log(o.time_s, bus::read_request(addr, bus::reg::kTempData, 2));
            json r = {{"address", addr},
                      {"kind", bus::kind_name(kind)},
                      {"result", bus::result_name(tx.result)},
                      {"data", bytes_json(tx.data)}};
            if (kind == bus::ModuleKind::Temperature && tx.result == bus::ResultKind::Ack && tx.data.size() == 2) {
                const auto raw = static_cast<std::int16_t>((tx.data[0] << 8) | tx.data[1]);
                r["raw"] = raw;
                if (s.calibration) r["temperature_c"] = placement::apply_calibration(*s.calibration, raw);
            }
            reads.push_back(std::move(r));
        }
        o.detail = {{"scan", addresses}, {"reads", reads}};
        o.status = "ok";
    }

    void apply(EventOutcome& o, const InjectFaultAction& a) {
        o.detail = fault_to_json(a.fault);
        for (const auto& f : bus.faults()) {
            if (f.id == a.fault.id) {
                o.status = "rejected";
                o.detail["reason"] = "fault id already active";
                return;
            }
        }
        bus.inject_fault(a.fault);
        o.status = "ok";
    }

    void apply(EventOutcome& o, const ClearFaultAction& a) {
        o.detail = {{"fault", a.fault}};
        o.status = bus.clear_fault(a.fault) ? "ok" : "not_found";
    }

    void apply(EventOutcome& o, const SetTemperatureAction& a) {
        temperature[a.module] = a.temperature_c;
        if (auto* m = bus.find_module(a.module)) m->temperature_c = a.temperature_c;
        o.detail = {{"module", a.module}, {"temperature_c", a.temperature_c}};
        o.status = "ok";
    }

    SimResult run() {
        out.master_seed = s.master_seed;
        out.summary.disconnected_fraction = topology::disconnected_fraction(bus.layout(), s.hub);
        out.initial_scan = bus::scan(bus);
        for (std::size_t i = 0; i < s.events.size(); ++i) {
            const Event& e = s.events[i];
            EventOutcome o;
            o.index = i;
            o.time_s = e.time_s;
            o.type = std::string(action_name(e.action));
            std::visit([&](const auto& a) { apply(o, a); }, e.action);
            out.outcomes.push_back(std::move(o));
        }
        out.final_scan = bus::scan(bus);
        for (std::size_t site = 0; site < bus.layout().sites().size(); ++site) {
            const auto& link = bus.link(site);
            out.eye_margins.push_back({bus.layout().sites()[site].id, link.margin_v(), link.responsive()});
        }
        out.summary.attached = bus.modules().size();
        out.summary.responding = 0;
        for (const auto& [id, m] : bus.modules()) {
            if (bus.link(m.site).responsive()) ++out.summary.responding;
        }
        out.summary.detachments = out.detachments.size();
        return std::move(out);
    }
};

}  // namespace

SimResult run_scenario(const Scenario& s) {
    validate(s);
    return Runner(s).run();
}

json sim_result_to_json(const SimResult& r) {
    json outcomes = json::array();
    for (const auto& o : r.outcomes) {
        outcomes.push_back(
            {{"index", o.index}, {"time_s", o.time_s}, {"type", o.type}, {"status", o.status}, {"detail", o.detail}});
    }
    json detachments = json::array();
    for (const auto& d : r.detachments) {
        detachments.push_back({{"time_s", d.time_s},
                               {"event", d.event_index},
                               {"module", d.module},
                               {"site", d.site},
                               {"motion", d.motion},
                               {"trial", d.trial}});
    }
    json margins = json::array();
    for (const auto& m : r.eye_margins) {
        margins.push_back({{"site", m.site},
                           {"margin_v", m.margin_v ? json(*m.margin_v) : json(nullptr)},
                           {"responsive", m.responsive}});
    }
    json log = json::array();
    for (const auto& line : r.transactions) {
        json t = transaction_to_json(line.transaction);
        t["time_s"] = line.time_s;
        t["result"] = bus::result_name(line.transaction.result);
        log.push_back(t);
    }
    const auto& sm = r.summary;
    return {{"master_seed", r.master_seed},
            {"initial_scan", r.initial_scan},
            {"outcomes", outcomes},
            {"final_scan", r.final_scan},
            {"detachments", detachments},
            {"eye_margins", margins},
            {"transactions", log},
            {"summary",
             {{"disconnected_fraction", sm.disconnected_fraction},
              {"attached", sm.attached},
              {"responding", sm.responding},
              {"transactions", sm.transactions},
              {"acks", sm.acks},
              {"nacks", sm.nacks},
              {"bus_faults", sm.bus_faults},
              {"detachments", sm.detachments},
              {"mean_intact_by_motion", sm.mean_intact_by_motion}}}};
}

std::string serialize(const SimResult& r) { return sim_result_to_json(r).dump(2) + "\n"; }

Statistic summarize(const std::vector<double>& values) {
    Statistic st;
    st.n = values.size();
    if (st.n == 0) return st;
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / static_cast<double>(st.n);
    if (st.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - st.mean) * (v - st.mean);
        st.stddev = std::sqrt(ss / static_cast<double>(st.n - 1));
    }
    const double half = 1.959963984540054 * st.stddev / std::sqrt(static_cast<double>(st.n));
    st.ci95_low = st.mean - half;
    st.ci95_high = st.mean + half;
    return st;
}

std::map<std::string, double> metrics_of(const SimResult& r) {
    const auto& sm = r.summary;
    std::map<std::string, double> m = {
        {"disconnected_fraction", sm.disconnected_fraction},
        {"reachable_fraction", 1.0 - sm.disconnected_fraction},
        {"attached", static_cast<double>(sm.attached)},
        {"responding", static_cast<double>(sm.responding)},
        {"transactions", static_cast<double>(sm.transactions)},
        {"acks", static_cast<double>(sm.acks)},
        {"nacks", static_cast<double>(sm.nacks)},
        {"bus_faults", static_cast<double>(sm.bus_faults)},
        {"detachments", static_cast<double>(sm.detachments)},
    };
    for (const auto& [kind, v] : sm.mean_intact_by_motion) m["mean_intact." + kind] = v;
    return m;
}

std::uint64_t replica_seed(std::uint64_t master, std::size_t i) { return master + i; }

MonteCarloResult run_monte_carlo(const Scenario& s, std::size_t n_seeds, unsigned threads) {
    if (n_seeds == 0) throw ValidationError("Monte-Carlo needs at least one seed");
    validate(s);
    std::vector<std::map<std::string, double>> per_replica(n_seeds);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    const auto worker = [&] {
        for (std::size_t i = next++; i < n_seeds; i = next++) {
            try {
                Scenario replica = s;
                replica.master_seed = replica_seed(s.master_seed, i);
                per_replica[i] = metrics_of(Runner(replica).run());
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_seeds;
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_seeds));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    MonteCarloResult r;
    r.n_seeds = n_seeds;
    r.master_seed = s.master_seed;
    for (const auto& m : per_replica) {
        for (const auto& [k, v] : m) r.samples[k].push_back(v);
    }
    for (const auto& [k, v] : r.samples) r.metrics[k] = summarize(v);
    return r;
}

json monte_carlo_to_json(const MonteCarloResult& r, bool include_samples) {
    json metrics = json::object();
    for (const auto& [k, st] : r.metrics) {
        metrics[k] = {{"n", st.n},
                      {"mean", st.mean},
                      {"stddev", st.stddev},
                      {"ci95", {st.ci95_low, st.ci95_high}}};
        if (include_samples) metrics[k]["samples"] = r.samples.at(k);
    }
    return {{"n_seeds", r.n_seeds}, {"master_seed", r.master_seed}, {"metrics", metrics}};
}

}  // namespace eknit::sim
