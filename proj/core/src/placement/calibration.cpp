#include "eknit/placement/calibration.hpp"

#include <algorithm>
#include <cmath>

namespace eknit::placement {

LinearCalibration fit_linear_calibration(std::span<const double> raw_counts,
                                         std::span<const double> reference_c) {
    if (raw_counts.size() != reference_c.size()) {
        throw ValidationError("raw and reference series differ in length");
    }
    if (raw_counts.size() < 2) throw DegenerateInput("calibration needs at least two readings");
    const auto n = static_cast<double>(raw_counts.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < raw_counts.size(); ++i) {
        mean_x += raw_counts[i];
        mean_y += reference_c[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < raw_counts.size(); ++i) {
        const double dx = raw_counts[i] - mean_x;
        const double dy = reference_c[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DegenerateInput("all raw readings are equal");

    LinearCalibration cal;
    cal.slope_c_per_count = sxy / sxx;
    cal.intercept_c = mean_y - cal.slope_c_per_count * mean_x;
    // A flat reference is explained perfectly by the zero-slope line.
    cal.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    return cal;
}

double apply_calibration(const LinearCalibration& cal, double raw_counts) {
    if (!std::isfinite(cal.slope_c_per_count) || !std::isfinite(cal.intercept_c)) {
        throw ValidationError("calibration coefficients must be finite");
    }
    return cal.slope_c_per_count * raw_counts + cal.intercept_c;
}

}  // namespace eknit::placement
