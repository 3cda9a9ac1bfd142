#include "eknit/connector/connector.hpp"

#include <cmath>
#include <string>

namespace eknit::connector {

void validate(const PmeStrip& strip) {
    if (!(strip.width_mm > 0.0) || !(strip.length_mm > 0.0)) {
        throw ValidationError("PME strip dimensions must be > 0");
    }
    if (strip.curve.size() < 2) throw ValidationError("tension-strain curve needs >= 2 points");
    for (std::size_t i = 1; i < strip.curve.size(); ++i) {
        const auto& a = strip.curve[i - 1];
        const auto& b = strip.curve[i];
        if (!(b.tension_n > a.tension_n) || !(b.strain > a.strain)) {
            throw ValidationError("tension-strain curve must be strictly increasing");
        }
    }
    if (!(strip.holding_n > 0.0) || !std::isfinite(strip.holding_n)) {
        throw ValidationError("holding force must be > 0");
    }
    if (!(strip.holding_sigma_n >= 0.0) || !std::isfinite(strip.holding_sigma_n)) {
        throw ValidationError("holding force spread must be >= 0");
    }
}

std::string_view motion_name(MotionKind kind) {
    switch (kind) {
        case MotionKind::Walking: return "walking";
        case MotionKind::Running: return "running";
        case MotionKind::Jumping: return "jumping";
        case MotionKind::Rotating: return "rotating";
    }
    return "?";
}

std::optional<MotionKind> motion_from_name(std::string_view name) {
    for (auto k : {MotionKind::Walking, MotionKind::Running, MotionKind::Jumping,
                   MotionKind::Rotating}) {
        if (motion_name(k) == name) return k;
    }
    return std::nullopt;
}

MotionProfile default_motion(MotionKind kind) {
    switch (kind) {
        case MotionKind::Walking: return {kind, 3.0};
        case MotionKind::Running: return {kind, 12.0};
        case MotionKind::Jumping: return {kind, 30.0};
        case MotionKind::Rotating: return {kind, 5.0};
    }
    return {kind, 0.0};
}

void validate(const MotionProfile& motion) {
    if (!(motion.peak_accel_mps2 >= 0.0) || !std::isfinite(motion.peak_accel_mps2)) {
        throw ValidationError("peak acceleration must be >= 0");
    }
    if (!(motion.period_s > 0.0)) throw ValidationError("motion period must be > 0");
    if (motion.trials < 1) throw ValidationError("trial count must be >= 1");
}

double strain_at_tension(const PmeStrip& strip, double tension_n) {
    const auto& c = strip.curve;
    if (c.empty() || tension_n < c.front().tension_n || tension_n > c.back().tension_n ||
        !std::isfinite(tension_n)) {
        throw OutOfDomain("tension " + std::to_string(tension_n) + " N is outside the curve");
    }
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (tension_n <= c[i].tension_n) {
            const double f = (tension_n - c[i - 1].tension_n) / (c[i].tension_n - c[i - 1].tension_n);
            return c[i - 1].strain + f * (c[i].strain - c[i - 1].strain);
        }
    }
    return c.back().strain;
}

double peak_inertial_force(double mass_kg, const MotionProfile& motion) {
    if (!(mass_kg > 0.0)) throw ValidationError("module mass must be > 0");
    return mass_kg * motion.peak_accel_mps2;
}

double required_holding_force(const MotionProfile& motion, double mass_kg, double safety_factor) {
    if (!(safety_factor >= 1.0)) throw ValidationError("safety factor must be >= 1");
    return safety_factor * peak_inertial_force(mass_kg, motion);
}

double sample_holding_force(const PmeStrip& strip, Rng& rng) {
    if (strip.holding_sigma_n == 0.0) return strip.holding_n;
    // Truncation by rejection; with sigma at 10% of H this almost never loops.
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double h = rng.normal(strip.holding_n, strip.holding_sigma_n);
        if (h >= 0.0) return h;
    }
    return 0.0;
}

TrialOutcome run_trials(double mass_kg, const PmeStrip& strip, const MotionProfile& motion,
                        std::uint64_t seed) {
    validate(motion);
    const double force = peak_inertial_force(mass_kg, motion);
    Rng rng(seed);
    TrialOutcome out;
    for (int t = 0; t < motion.trials; ++t) {
        if (force > sample_holding_force(strip, rng)) {
            out.detached_trials.push_back(t);
        } else {
            ++out.remaining;
        }
    }
    return out;
}

int detachment_trials(double mass_kg, const PmeStrip& strip, const MotionProfile& motion,
                      std::uint64_t seed) {
    return run_trials(mass_kg, strip, motion, seed).remaining;
}

}  // namespace eknit::connector
