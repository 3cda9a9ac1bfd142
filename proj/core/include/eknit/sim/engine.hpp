#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eknit/bus/bus_model.hpp"
#include "eknit/sim/scenario.hpp"

namespace eknit::sim {

struct EventOutcome {
    std::size_t index = 0;
    double time_s = 0.0;
    std::string type;
    std::string status;  ///< "ok", "rejected", "not_attached", or a transaction result
    nlohmann::json detail = nlohmann::json::object();
};

struct DetachmentRecord {
    double time_s = 0.0;
    std::size_t event_index = 0;
    std::string module;
    std::string site;
    std::string motion;
    int trial = 0;  ///< zero-based trial in which the module first came off
};

struct SiteMargin {
    std::string site;
    std::optional<double> margin_v;
    bool responsive = false;
};

struct SimSummary {
    double disconnected_fraction = 0.0;  ///< sites cut from the hub on some channel, at start
    std::size_t attached = 0;            ///< at the end
    std::size_t responding = 0;          ///< at the end
    std::size_t transactions = 0;
    std::size_t acks = 0;
    std::size_t nacks = 0;
    std::size_t bus_faults = 0;
    std::size_t detachments = 0;
    /// Mean number of intact modules per trial, per motion kind (last event of that kind).
    std::map<std::string, double> mean_intact_by_motion;
};

struct SimResult {
    std::uint64_t master_seed = 0;
    std::vector<std::uint8_t> initial_scan;
    std::vector<EventOutcome> outcomes;
    std::vector<std::uint8_t> final_scan;
    std::vector<DetachmentRecord> detachments;
    std::vector<SiteMargin> eye_margins;
    std::vector<bus::TransactionRecord> transactions;
    SimSummary summary;
};

/// Layout actually simulated: the scenario's own, or a fresh misalignment
/// draw from the master seed when sigma > 0.
topology::GarmentLayout effective_layout(const Scenario& s);

/// Bus with the scenario's initial modules seated.
bus::BusModel initial_bus(const Scenario& s);

/// Seed of the `counter`-th draw on a named stream.
std::uint64_t stream_seed(std::uint64_t master, std::string_view stream, std::uint64_t counter);

SimResult run_scenario(const Scenario& s);

nlohmann::json sim_result_to_json(const SimResult& r);
/// Canonical serialization; byte-identical for identical inputs.
std::string serialize(const SimResult& r);

struct Statistic {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation
    double ci95_low = 0.0;
    double ci95_high = 0.0;

    double ci95_width() const { return ci95_high - ci95_low; }
};

Statistic summarize(const std::vector<double>& values);

struct MonteCarloResult {
    std::size_t n_seeds = 0;
    std::uint64_t master_seed = 0;
    std::map<std::string, Statistic> metrics;
    std::map<std::string, std::vector<double>> samples;  ///< per metric, in seed order
};

/// Named scalar metrics of one run (summary fields flattened).
std::map<std::string, double> metrics_of(const SimResult& r);

/// Master seed of replica `i`; replica 0 is the scenario itself.
std::uint64_t replica_seed(std::uint64_t master, std::size_t i);

/// Replicas run on `threads` workers (0 = hardware concurrency); the reduction
/// is over replicas in seed order, so results do not depend on scheduling.
MonteCarloResult run_monte_carlo(const Scenario& s, std::size_t n_seeds, unsigned threads = 0);

nlohmann::json monte_carlo_to_json(const MonteCarloResult& r, bool include_samples = false);

}  // namespace eknit::sim
