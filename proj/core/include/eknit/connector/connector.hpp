#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "eknit/common.hpp"
#include "eknit/random.hpp"

namespace eknit::connector {

struct CurvePoint {
    double tension_n = 0.0;
    double strain = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

/// Permanent-magnet-elastomer strip holding one module.
struct PmeStrip {
    double width_mm = 5.0;
    double length_mm = 40.0;
    std::vector<CurvePoint> curve = default_curve();
    double holding_n = 0.03;
    double holding_sigma_n = 0.003;

    /// Placeholder tension-strain curve for a 40 x 5 mm strip; real curves
    /// come from configuration.
    static std::vector<CurvePoint> default_curve() {
        return {{0.0, 0.0}, {0.5, 0.10}, {1.0, 0.25}, {1.5, 0.45}, {2.0, 0.70}};
    }

    bool operator==(const PmeStrip&) const = default;
};

void validate(const PmeStrip& strip);

enum class MotionKind : std::uint8_t { Walking, Running, Jumping, Rotating };

std::string_view motion_name(MotionKind kind);
std::optional<MotionKind> motion_from_name(std::string_view name);

struct MotionProfile {
    MotionKind kind = MotionKind::Walking;
    double peak_accel_mps2 = 0.0;
    double period_s = 5.0;
    int trials = 50;

    bool operator==(const MotionProfile&) const = default;
};

/// Default peak accelerations: walking 3, running 12, jumping 30, rotating 5 m/s^2.
MotionProfile default_motion(MotionKind kind);

void validate(const MotionProfile& motion);

class OutOfDomain : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Piecewise-linear interpolation of the strip's curve; OutOfDomain outside
/// [first knot, last knot].
double strain_at_tension(const PmeStrip& strip, double tension_n);

double peak_inertial_force(double mass_kg, const MotionProfile& motion);

double required_holding_force(const MotionProfile& motion, double mass_kg,
                              double safety_factor = 3.0);

struct TrialOutcome {
    int remaining = 0;
    std::vector<int> detached_trials;  ///< zero-based indices
};

/// Per trial, draw holding H' ~ Normal(H, sigma_H) truncated at 0; the module
/// detaches in that trial iff the peak inertial force exceeds H'.
TrialOutcome run_trials(double mass_kg, const PmeStrip& strip, const MotionProfile& motion,
                        std::uint64_t seed);

/// Number of trials (out of motion.trials) in which the module stayed on.
int detachment_trials(double mass_kg, const PmeStrip& strip, const MotionProfile& motion,
                      std::uint64_t seed);

/// One holding-force draw, exposed so the scenario engine can run single trials.
double sample_holding_force(const PmeStrip& strip, Rng& rng);

}  // namespace eknit::connector
