#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eknit/bus/bus_model.hpp"
#include "eknit/placement/placement.hpp"
#include "eknit/service/server.hpp"
#include "eknit/service/service.hpp"
#include "eknit/sim/engine.hpp"
#include "eknit/sim/reference.hpp"
#include "eknit/sim/scenario.hpp"
#include "eknit/topology/misalignment.hpp"

namespace {

using nlohmann::json;
using namespace eknit;

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("EKNIT_SEED");
    if (!raw || !*raw) return std::nullopt;
    std::uint64_t v = 0;
    const std::string_view s(raw);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ValidationError("EKNIT_SEED must be an unsigned integer, got '" + std::string(s) + "'");
    }
    return v;
}

sim::Scenario preset(const std::string& name) {
    if (name == "shake-test") return sim::shake_test_scenario();
    if (name == "skin-temperature") return sim::skin_temperature_scenario();
    sim::Scenario s(sim::reference_layout(), sim::kReferenceHub);
    s.connectors.push_back({"pme", connector::PmeStrip{}});
    return s;
}

sim::Scenario load(const std::string& path, const std::string& preset_name = "") {
    sim::Scenario s = path.empty() ? preset(preset_name) : sim::load_scenario_file(path);
    if (auto seed = env_seed()) s.master_seed = *seed;
    sim::validate(s);
    return s;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot open '" + out + "' for writing");
    f << text;
    if (!f) throw IoError("write to '" + out + "' failed");
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string hex(unsigned v) {
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(2) << std::setfill('0') << v;
    return os.str();
}

placement::PlacementReport placement_report(std::size_t seeds, std::uint64_t base) {
    const auto positions = placement::default_arm_positions();
    return placement::rank_placements(positions, placement::reference_flexion_trace(), {}, seeds, base);
}

std::string placement_csv(const placement::PlacementReport& r) {
    std::ostringstream os;
    os << "position_index,distance_cm,mpjre_deg\n" << std::setprecision(10);
    for (const auto& s : r.per_position) os << s.position.index << ',' << s.position.distance_cm << ',' << s.mpjre_deg << '\n';
    return os.str();
}

json placement_json(const placement::PlacementReport& r) {
    json per = json::array();
    for (const auto& s : r.per_position) {
        per.push_back({{"index", s.position.index},
                       {"distance_cm", s.position.distance_cm},
                       {"region", placement::region_name(s.position.region)},
                       {"mpjre_deg", s.mpjre_deg}});
    }
    return {{"per_position", per}, {"ranking", r.ranking}, {"argmin", r.argmin}};
}

std::string waveforms_csv(const sim::Scenario& s) {
    std::ostringstream os;
    os << "position,site,time_s,volts\n" << std::setprecision(10);
    for (const auto& p : sim::attenuation_sweep(s.layout, s.link)) {
        const auto w = signal::probe_waveform(p.scl, s.link);
        // Every 10th sample keeps the file small and the curve smooth.
        for (std::size_t i = 0; i < w.size(); i += 10) {
            os << p.position << ',' << p.site << ',' << w.time_at(i) << ',' << w.samples[i] << '\n';
        }
    }
    return os.str();
}

json waveforms_json(const sim::Scenario& s) {
    json out = json::array();
    for (const auto& p : sim::attenuation_sweep(s.layout, s.link)) {
        const auto w = signal::probe_waveform(p.scl, s.link);
        out.push_back({{"position", p.position},
                       {"site", p.site},
                       {"resistance_ohm", p.scl.plus.resistance_ohm + p.scl.minus.resistance_ohm},
                       {"margin_v", p.eye.margin_v},
                       {"sample_rate_hz", w.sample_rate_hz},
                       {"volts", w.samples}});
    }
    return out;
}

std::string outcomes_csv(const sim::SimResult& r) {
    std::ostringstream os;
    os << "index,time_s,type,status\n";
    for (const auto& o : r.outcomes) os << o.index << ',' << o.time_s << ',' << o.type << ',' << o.status << '\n';
    return os.str();
}

std::string transactions_csv(const sim::SimResult& r) {
    std::ostringstream os;
    os << "time_s,address,direction,result,fault\n";
    for (const auto& rec : r.transactions) {
        const auto& t = rec.transaction;
        os << rec.time_s << ',' << hex(t.address) << ',' << (t.direction == bus::Direction::Read ? "read" : "write")
           << ',' << bus::result_name(t.result) << ',' << bus::bus_fault_name(t.fault) << '\n';
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator for e-textile garments with a shared differential bus"};
    app.require_subcommand(1);

    std::string scenario_path, preset_name, out_path, format = "json", what = "result", motion = "all", metric = "sites";
    std::string place_format = "table";
    std::size_t monte_carlo = 0, seeds = 100, calib_seeds = 1000;
    unsigned threads = 0;
    int trials = 50;
    double holding = -1.0, target = 0.074, tolerance = -1.0;
    bool as_json = false;
    std::uint64_t base_seed = 0;
    std::string host = "127.0.0.1";
    unsigned short port = 8080;
    int idle_minutes = 30;

    auto* simulate = app.add_subcommand("simulate", "Run a scenario and print the result JSON");
    simulate->add_option("scenario", scenario_path, "Scenario file")->required();
    simulate->add_option("-o,--out", out_path, "Output file (default stdout)");
    simulate->add_option("--monte-carlo", monte_carlo, "Aggregate this many replicas instead of one run");
    simulate->add_option("--threads", threads, "Monte-Carlo workers (0 = all cores)");

    auto* scan = app.add_subcommand("scan", "Responding addresses and per-site eye margins");
    scan->add_option("scenario", scenario_path, "Scenario file (default: reference layout, no modules)");
    scan->add_flag("--json", as_json, "JSON output");

    auto* shake = app.add_subcommand("shake-test", "Five IMU modules against the motion profiles");
    shake->add_option("--motion", motion, "walking, running, jumping, rotating or all")
        ->check(CLI::IsMember({"all", "walking", "running", "jumping", "rotating"}));
    shake->add_option("--trials", trials, "Trials per motion")->check(CLI::PositiveNumber);
    shake->add_option("--holding", holding, "Mean connector holding force in N");
    shake->add_flag("--json", as_json, "JSON output");

    auto* place = app.add_subcommand("placement-eval", "MPJRE per arm position");
    place->add_option("--seeds", seeds, "Seeds per position")->check(CLI::PositiveNumber);
    place->add_option("--base-seed", base_seed, "First seed (EKNIT_SEED overrides)");
    place->add_option("--format", place_format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));

    auto* calib = app.add_subcommand("calibrate-misalignment", "Fit the junction offset sigma to a target");
    calib->add_option("--target", target, "Mean disconnected fraction");
    calib->add_option("--seeds", calib_seeds, "Sampled layouts per evaluation");
    calib->add_option("--scenario", scenario_path, "Take layout and hub from this scenario");
    calib->add_option("--tolerance", tolerance, "Junction tolerance in mm (default: the layout's)");
    calib->add_option("--metric", metric, "sites or junctions")->check(CLI::IsMember({"sites", "junctions"}));
    calib->add_option("--write", out_path, "Save the scenario with the fitted sigma here");

    auto* exp = app.add_subcommand("export", "Export results, transactions, waveforms or placement reports");
    exp->add_option("scenario", scenario_path, "Scenario file (default: reference layout)");
    exp->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    exp->add_option("--what", what, "result, transactions, waveforms, placement or scenario")
        ->check(CLI::IsMember({"result", "transactions", "waveforms", "placement", "scenario"}));
    exp->add_option("--preset", preset_name, "Built-in scenario when no file is given")
        ->check(CLI::IsMember({"reference", "shake-test", "skin-temperature"}));
    exp->add_option("-o,--out", out_path, "Output file (default stdout)");

    auto* serve = app.add_subcommand("serve", "HTTP + websocket service");
    serve->add_option("scenario", scenario_path, "Base scenario for new sessions");
    serve->add_option("--port", port, "TCP port");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--idle-timeout", idle_minutes, "Session idle timeout in minutes")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    try {
        if (*simulate) {
            const auto s = load(scenario_path);
            if (monte_carlo > 0) {
                emit(sim::monte_carlo_to_json(sim::run_monte_carlo(s, monte_carlo, threads)).dump(2) + "\n", out_path);
            } else {
                emit(sim::serialize(sim::run_scenario(s)), out_path);
            }
        } else if (*scan) {
            const auto s = load(scenario_path);
            const auto bus = sim::initial_bus(s);
            const auto addrs = bus::scan(bus);
            if (as_json) {
                json sites = json::array();
                for (std::size_t i = 0; i < s.layout.sites().size(); ++i) {
                    const auto m = bus.link(i).margin_v();
                    sites.push_back({{"site", s.layout.sites()[i].id},
                                     {"margin_v", m ? json(*m) : json(nullptr)},
                                     {"responsive", bus.link(i).responsive()}});
                }
                std::cout << json{{"addresses", addrs}, {"sites", sites}}.dump(2) << "\n";
            } else {
                std::cout << "responding:";
                for (auto a : addrs) std::cout << ' ' << hex(a);
                std::cout << "\n\n" << std::left << std::setw(14) << "site" << std::setw(16) << "module"
                          << std::setw(12) << "margin_v" << "responsive\n";
                for (std::size_t i = 0; i < s.layout.sites().size(); ++i) {
                    const auto& id = s.layout.sites()[i].id;
                    const auto m = bus.link(i).margin_v();
                    std::cout << std::setw(14) << id << std::setw(16) << bus.occupant(id).value_or("-")
                              << std::setw(12) << (m ? fmt(*m, 3) : "cut") << (bus.link(i).responsive() ? "yes" : "")
                              << "\n";
                }
            }
        } else if (*shake) {
            sim::Scenario s = sim::shake_test_scenario(trials);
            if (auto seed = env_seed()) s.master_seed = *seed;
            if (holding >= 0.0) s.connectors.front().strip.holding_n = holding;
            if (motion != "all") {
                const auto kind = *connector::motion_from_name(motion);
                std::erase_if(s.events, [&](const sim::Event& e) {
                    const auto* m = std::get_if<sim::MotionAction>(&e.action);
                    return m && m->kind != kind;
                });
                // One poll per remaining motion.
                std::vector<sim::Event> kept;
                for (const auto& e : s.events) {
                    if (std::holds_alternative<sim::PollAllAction>(e.action) &&
                        (kept.empty() || !std::holds_alternative<sim::MotionAction>(kept.back().action))) {
                        continue;
                    }
                    kept.push_back(e);
                }
                s.events = std::move(kept);
            }
            sim::validate(s);
            const auto r = sim::run_scenario(s);
            json rows = json::array();
            for (const auto& o : r.outcomes) {
                if (o.type != "motion") continue;
                rows.push_back({{"motion", o.detail["kind"]},
                                {"trials", o.detail["trials"]},
                                {"mean_intact", o.detail["mean_intact"]},
                                {"remaining", o.detail["remaining"]}});
            }
            if (as_json) {
                std::cout << rows.dump(2) << "\n";
            } else {
                std::cout << std::left << std::setw(10) << "motion" << std::setw(8) << "trials" << "mean intact (of "
                          << s.modules.size() << ")\n";
                for (const auto& row : rows) {
                    std::cout << std::setw(10) << row["motion"].get<std::string>() << std::setw(8)
                              << row["trials"].get<int>() << fmt(row["mean_intact"].get<double>(), 2) << "\n";
                }
            }
        } else if (*place) {
            if (auto seed = env_seed()) base_seed = *seed;
            const auto r = placement_report(seeds, base_seed);
            if (place_format == "csv") {
                std::cout << placement_csv(r);
            } else if (place_format == "json") {
                std::cout << placement_json(r).dump(2) << "\n";
            } else {
                std::cout << std::left << std::setw(6) << "pos" << std::setw(10) << "cm" << std::setw(12) << "region"
                          << "mpjre_deg\n";
                for (const auto& sc : r.per_position) {
                    std::cout << std::setw(6) << sc.position.index << std::setw(10) << fmt(sc.position.distance_cm, 1)
                              << std::setw(12) << placement::region_name(sc.position.region) << fmt(sc.mpjre_deg, 2)
                              << (sc.position.index == r.argmin ? "  <- best" : "") << "\n";
                }
            }
        } else if (*calib) {
            sim::Scenario s = load(scenario_path);
            topology::MisalignmentOptions opt;
            opt.n_seeds = calib_seeds;
            if (auto seed = env_seed()) opt.base_seed = *seed;
            opt.metric = metric == "junctions" ? topology::DisconnectionMetric::Junctions
                                               : topology::DisconnectionMetric::Sites;
            const double tol = tolerance > 0.0 ? tolerance : s.layout.tolerance_mm();
            const auto c = topology::calibrate_misalignment_sigma(s.layout, s.hub, target, tol, opt);
            std::cout << "sigma_mm " << std::setprecision(6) << c.sigma_mm << "\nmean_disconnected "
                      << c.mean_disconnected << "\niterations " << c.iterations << "\n";
            if (!out_path.empty()) {
                s.misalignment_sigma_mm = c.sigma_mm;
                emit(sim::save_scenario(s), out_path);
            }
        } else if (*exp) {
            const auto s = load(scenario_path, preset_name);
            std::string text;
            if (what == "scenario") {
                text = format == "csv" ? throw ValidationError("scenarios export as json only") : sim::save_scenario(s);
            } else if (what == "placement") {
                const auto r = placement_report(seeds, env_seed().value_or(0));
                text = format == "csv" ? placement_csv(r) : placement_json(r).dump(2) + "\n";
            } else if (what == "waveforms") {
                text = format == "csv" ? waveforms_csv(s) : waveforms_json(s).dump() + "\n";
            } else {
                const auto r = sim::run_scenario(s);
                if (what == "transactions") {
                    text = format == "csv" ? transactions_csv(r) : bus::transaction_log_jsonl(r.transactions);
                } else {
                    text = format == "csv" ? outcomes_csv(r) : sim::serialize(r);
                }
            }
            emit(text, out_path);
        } else if (*serve) {
            service::ServiceOptions so;
            so.idle_timeout = std::chrono::minutes(idle_minutes);
            service::Service svc(load(scenario_path), so);
            service::ServerOptions opts;
            opts.address = host;
            opts.port = port;
            service::Server server(svc, opts);
            std::cerr << "listening on http://" << host << ':' << server.port() << "/api\n";
            server.run();
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
