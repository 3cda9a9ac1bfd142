#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eknit/common.hpp"

namespace eknit::placement {

/// temperature_c = slope * raw + intercept
struct LinearCalibration {
    double slope_c_per_count = 0.0;
    double intercept_c = 0.0;
    double r2 = 0.0;

    bool operator==(const LinearCalibration&) const = default;
};

class DegenerateInput : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Ordinary least squares of reference temperature on raw counts.
LinearCalibration fit_linear_calibration(std::span<const double> raw_counts,
                                         std::span<const double> reference_c);

double apply_calibration(const LinearCalibration& cal, double raw_counts);

}  // namespace eknit::placement
