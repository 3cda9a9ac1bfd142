#include "eknit/topology/misalignment.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "eknit/random.hpp"
#include "eknit/topology/graph.hpp"

namespace eknit::topology {

GarmentLayout sample_misalignment(const GarmentLayout& layout, double sigma_mm,
                                  double tolerance_mm, std::uint64_t seed) {
    if (!(sigma_mm >= 0.0) || !std::isfinite(sigma_mm)) {
        throw ValidationError("misalignment sigma must be finite and >= 0");
    }
    Rng rng(seed);
    std::vector<double> offsets(layout.junctions().size());
    for (auto& o : offsets) o = sigma_mm * rng.normal();
    return layout.with_tolerance(tolerance_mm).with_offsets(std::move(offsets));
}

std::uint64_t misalignment_seed(std::uint64_t base_seed, std::size_t i) {
    return derive_seed(base_seed, fnv1a("misalignment"), i);
}

double disconnected_fraction(const GarmentLayout& layout, std::string_view hub,
                             DisconnectionMetric metric) {
    if (metric == DisconnectionMetric::Junctions) {
        const auto& js = layout.junctions();
        if (js.empty()) return 0.0;
        std::size_t open = 0;
        for (const auto& j : js) open += layout.junction_connected(j) ? 0 : 1;
        return static_cast<double>(open) / static_cast<double>(js.size());
    }
    return 1.0 - reachable_fraction(ConductanceGraph(layout), hub);
}

double mean_disconnected_fraction(const GarmentLayout& layout, std::string_view hub,
                                  double sigma_mm, double tolerance_mm,
                                  const MisalignmentOptions& options) {
    if (options.n_seeds == 0) throw ValidationError("n_seeds must be >= 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < options.n_seeds; ++i) {
        const auto sampled = sample_misalignment(layout, sigma_mm, tolerance_mm,
                                                 misalignment_seed(options.base_seed, i));
        sum += disconnected_fraction(sampled, hub, options.metric);
    }
    return sum / static_cast<double>(options.n_seeds);
}

double max_disconnected_fraction(const GarmentLayout& layout, std::string_view hub,
                                 DisconnectionMetric metric) {
    const double beyond = 2.0 * layout.tolerance_mm();
    const std::vector<double> offsets(layout.junctions().size(), beyond);
    return disconnected_fraction(layout.with_offsets(offsets), hub, metric);
}

MisalignmentCalibration calibrate_misalignment_sigma(const GarmentLayout& layout,
                                                     std::string_view hub, double target,
                                                     double tolerance_mm,
                                                     const MisalignmentOptions& options) {
    if (!(target >= 0.0 && target < 1.0)) {
        throw CalibrationError("target fraction must lie in [0, 1)");
    }
    const GarmentLayout base = layout.with_tolerance(tolerance_mm);
    const double window = options.window;
    auto mean_at = [&](double sigma) {
        return mean_disconnected_fraction(base, hub, sigma, tolerance_mm, options);
    };

    MisalignmentCalibration out;
    const double floor = mean_at(0.0);
    if (std::abs(floor - target) <= window) return {0.0, floor, 0};
    if (target < floor) {
        throw CalibrationError("target " + std::to_string(target) +
                               " is below the fraction already lost at zero misalignment");
    }
    const double ceiling = max_disconnected_fraction(base, hub, options.metric);
    if (target > ceiling + window) {
        throw CalibrationError("target " + std::to_string(target) +
                               " exceeds the attainable maximum " + std::to_string(ceiling));
    }

    double lo = 0.0;
    double hi = tolerance_mm;
    double m_hi = mean_at(hi);
    for (int k = 0; m_hi < target; ++k) {
        if (k >= 64) throw CalibrationError("target unreachable with the given seed count");
        lo = hi;
        hi *= 2.0;
        m_hi = mean_at(hi);
        ++out.iterations;
    }

    // Keep halving past the first hit: the mean is a step function of sigma
    // on a fixed seed set, and the step nearest the target is the best estimate.
    std::optional<MisalignmentCalibration> best;
    const auto consider = [&](double sigma, double m) {
        if (std::abs(m - target) > window) return;
        if (!best || std::abs(m - target) < std::abs(best->mean_disconnected - target)) {
            best = MisalignmentCalibration{sigma, m, out.iterations};
        }
    };
    consider(hi, m_hi);
    while (out.iterations < options.max_iterations && hi - lo > options.sigma_resolution_mm) {
        ++out.iterations;
        const double mid = 0.5 * (lo + hi);
        const double m = mean_at(mid);
        consider(mid, m);
        (m < target ? lo : hi) = mid;
    }
    if (!best) {
        throw CalibrationError("disconnected fraction jumps across the target window; "
                               "increase n_seeds or widen the window");
    }
    best->iterations = out.iterations;
    return *best;
}

}  // namespace eknit::topology
