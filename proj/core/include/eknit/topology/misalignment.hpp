#pragma once

#include <cstdint>
#include <string_view>

#include "eknit/topology/layout.hpp"

namespace eknit::topology {

/// Fresh junction offsets drawn independently from Normal(0, sigma_mm); the
/// returned layout uses `tolerance_mm`. Same seed, same layout.
GarmentLayout sample_misalignment(const GarmentLayout& layout, double sigma_mm,
                                  double tolerance_mm, std::uint64_t seed);

/// What the calibration drives to the target.
enum class DisconnectionMetric {
    Sites,      ///< fraction of sites not reachable from the hub on all channels
    Junctions,  ///< fraction of individual junctions out of tolerance
};

struct MisalignmentOptions {
    std::size_t n_seeds = 1000;
    std::uint64_t base_seed = 0;
    double window = 0.005;  ///< accepted |mean - target|
    DisconnectionMetric metric = DisconnectionMetric::Sites;
    int max_iterations = 200;
    double sigma_resolution_mm = 1e-4;  ///< bisection stops once the bracket is this narrow
};

struct MisalignmentCalibration {
    double sigma_mm = 0.0;
    double mean_disconnected = 0.0;
    int iterations = 0;
};

/// Seed `i` of a batch; shared by calibration and verification runs.
std::uint64_t misalignment_seed(std::uint64_t base_seed, std::size_t i);

double disconnected_fraction(const GarmentLayout& layout, std::string_view hub,
                             DisconnectionMetric metric = DisconnectionMetric::Sites);

/// Mean disconnected fraction over `options.n_seeds` sampled layouts.
double mean_disconnected_fraction(const GarmentLayout& layout, std::string_view hub,
                                  double sigma_mm, double tolerance_mm,
                                  const MisalignmentOptions& options);

/// Largest attainable disconnected fraction (every junction open).
double max_disconnected_fraction(const GarmentLayout& layout, std::string_view hub,
                                 DisconnectionMetric metric = DisconnectionMetric::Sites);

class CalibrationError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Bisection on sigma down to `options.sigma_resolution_mm`; returns the
/// evaluated sigma whose seeded mean is nearest `target`, which must be
/// within `options.window`. Offsets scale linearly with sigma for a fixed
/// seed, so the mean is a non-decreasing step function of sigma.
MisalignmentCalibration calibrate_misalignment_sigma(const GarmentLayout& layout,
                                                     std::string_view hub, double target,
                                                     double tolerance_mm,
                                                     const MisalignmentOptions& options = {});

}  // namespace eknit::topology
