#include "eknit/placement/placement.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "eknit/common.hpp"
#include "eknit/random.hpp"

namespace eknit::placement {

namespace {

constexpr double kMeanAbsTwist = 2.0 * std::numbers::sqrt2 / std::numbers::pi;
constexpr double kMeanAbsTissue = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kMeanAbsDecoupling = 0.816496580927726;  // sqrt(2/3)
constexpr double kForearmTissue = 1.35;
constexpr double kBelowWristTwist = 0.25;

double rms(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::string_view region_name(Region r) {
    switch (r) {
        case Region::BelowWrist: return "below_wrist";
        case Region::Wrist: return "wrist";
        case Region::Forearm: return "forearm";
        case Region::Elbow: return "elbow";
        case Region::UpperArm: return "upper_arm";
    }
    return "?";
}

std::optional<Region> region_from_name(std::string_view name) {
    for (auto r : {Region::BelowWrist, Region::Wrist, Region::Forearm, Region::Elbow,
                   Region::UpperArm}) {
        if (region_name(r) == name) return r;
    }
    return std::nullopt;
}

std::vector<PlacementPosition> default_arm_positions() {
    constexpr double arm_cm = 55.0;
    constexpr Region regions[] = {Region::Wrist,    Region::BelowWrist, Region::Forearm,
                                  Region::Forearm,  Region::Elbow,      Region::UpperArm,
                                  Region::UpperArm, Region::UpperArm};
    std::vector<PlacementPosition> out;
    for (int i = 0; i < 8; ++i) out.push_back({i + 1, arm_cm * i / 7.0, regions[i]});
    return out;
}

RegionWeights ImuNoiseModel::weights(const PlacementPosition& pos) const {
    switch (pos.region) {
        case Region::Wrist: return {1.0, 1.0, 0.0};
        case Region::BelowWrist: return {kBelowWristTwist, 1.0, 0.0};
        case Region::Forearm: return {0.0, kForearmTissue, 0.0};
        case Region::Elbow: return {0.0, kForearmTissue, 0.5};
        case Region::UpperArm: {
            const double past = std::max(0.0, pos.distance_cm - elbow_distance_cm);
            return {0.0, kForearmTissue, 1.0 + past / decoupling_growth_cm};
        }
    }
    return {};
}

bool ImuNoiseModel::respects_ordering_inequalities() const {
    const double t = wrist_twist_deg;
    const double j = soft_tissue_deg;
    const double d = decoupling_deg;
    if (t < 0.0 || j < 0.0 || d < 0.0) return false;
    const bool wrist_worse = t > 0.0;
    const bool forearm_worse =
        (kForearmTissue - 1.0) * kMeanAbsTissue * j > kBelowWristTwist * kMeanAbsTwist * t;
    const bool upper_worst =
        kMeanAbsDecoupling * d >
        std::max(kMeanAbsTwist * t + kMeanAbsTissue * j, kForearmTissue * kMeanAbsTissue * j);
    return wrist_worse && forearm_worse && upper_worst;
}

JointTrace synthesize_flexion_trace(double duration_s, double frequency_hz, double amplitude_deg,
                                    double sample_rate_hz) {
    if (!(duration_s > 0.0) || !(frequency_hz > 0.0) || !(amplitude_deg > 0.0) ||
        !(sample_rate_hz > 0.0)) {
        throw ValidationError("flexion trace needs positive duration, frequency, amplitude, rate");
    }
    const auto frames = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz)));
    JointTrace trace{sample_rate_hz, std::vector<double>(frames)};
    for (std::size_t i = 0; i < frames; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        trace.angle_deg[i] =
            0.5 * amplitude_deg * (1.0 - std::cos(2.0 * std::numbers::pi * frequency_hz * t));
    }
    return trace;
}

JointTrace reference_flexion_trace() { return synthesize_flexion_trace(10.0, 0.5, 90.0, 100.0); }

JointTrace simulate_estimated_trace(const JointTrace& truth, const PlacementPosition& pos,
                                    const ImuNoiseModel& model, std::uint64_t seed) {
    if (!(truth.sample_rate_hz > 0.0)) throw ValidationError("trace sample rate must be > 0");
    const RegionWeights w = model.weights(pos);
    const double dt = 1.0 / truth.sample_rate_hz;

    // Every source is drawn whatever the weights, so all positions sharing a
    // seed see the same underlying processes.
    Rng rng(seed);
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double rho =
        model.tissue_correlation_s > 0.0 ? std::exp(-dt / model.tissue_correlation_s) : 0.0;
    const double innovation = std::sqrt(1.0 - rho * rho);
    const double truth_rms = rms(truth.angle_deg);

    JointTrace est = truth;
    double tissue = rng.normal();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (i > 0) tissue = rho * tissue + innovation * rng.normal();
        const double t = static_cast<double>(i) * dt;
        const double twist =
            std::numbers::sqrt2 * std::sin(2.0 * std::numbers::pi * model.twist_frequency_hz * t + phase);
        const double decoupling = truth_rms > 0.0 ? -truth.angle_deg[i] / truth_rms : 0.0;
        const double error = w.twist * model.wrist_twist_deg * twist +
                             w.tissue * model.soft_tissue_deg * tissue +
                             w.decoupling * model.decoupling_deg * decoupling;
        est.angle_deg[i] += error;
    }
    return est;
}

double mpjre(const JointTrace& est, const JointTrace& truth) {
    if (est.size() != truth.size()) throw ValidationError("MPJRE needs traces of equal length");
    if (truth.size() == 0) throw ValidationError("MPJRE needs at least one frame");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(est.angle_deg[i] - truth.angle_deg[i]);
    return sum / static_cast<double>(truth.size());
}

const PlacementScore& PlacementReport::score(int index) const {
    for (const auto& s : per_position) {
        if (s.position.index == index) return s;
    }
    throw ValidationError("no placement position with index " + std::to_string(index));
}

std::uint64_t placement_seed(std::uint64_t base_seed, std::size_t k) {
    return derive_seed(base_seed, fnv1a("placement"), k);
}

PlacementReport rank_placements(std::span<const PlacementPosition> positions,
                                const JointTrace& truth, const ImuNoiseModel& model,
                                std::size_t seeds_per_position, std::uint64_t base_seed) {
    if (positions.empty()) throw ValidationError("rank_placements needs at least one position");
    if (seeds_per_position == 0) throw ValidationError("seeds per position must be >= 1");
    PlacementReport report;
    for (const auto& pos : positions) {
        double sum = 0.0;
        for (std::size_t k = 0; k < seeds_per_position; ++k) {
            sum += mpjre(simulate_estimated_trace(truth, pos, model, placement_seed(base_seed, k)), truth);
        }
        report.per_position.push_back({pos, sum / static_cast<double>(seeds_per_position)});
    }
    std::vector<PlacementScore> sorted = report.per_position;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.mpjre_deg != b.mpjre_deg) return a.mpjre_deg < b.mpjre_deg;
        return a.position.index < b.position.index;
    });
    for (const auto& s : sorted) report.ranking.push_back(s.position.index);
    report.argmin = report.ranking.front();
    return report;
}

GainCalibration calibrate_noise_gains(std::span<const PlacementPosition> positions,
                                      const JointTrace& truth, ImuNoiseModel model,
                                      double below_wrist_target_deg, double wrist_target_deg,
                                      std::size_t seeds_per_position, std::uint64_t base_seed) {
    const auto find = [&](Region r) {
        const auto it = std::find_if(positions.begin(), positions.end(),
                                     [r](const auto& p) { return p.region == r; });
        if (it == positions.end()) throw ValidationError("calibration needs wrist and below-wrist positions");
        return *it;
    };
    const PlacementPosition bw[] = {find(Region::BelowWrist)};
    const PlacementPosition wr[] = {find(Region::Wrist)};
    const auto score = [&](const PlacementPosition (&p)[1], const ImuNoiseModel& m) {
        return rank_placements(p, truth, m, seeds_per_position, base_seed).per_position[0].mpjre_deg;
    };
    const auto bisect = [](double lo, double hi, auto&& f, double target) {
        for (int i = 0; i < 40; ++i) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };

    const auto fit_tissue = [&](double twist) {
        ImuNoiseModel m = model;
        m.wrist_twist_deg = twist;
        m.soft_tissue_deg = bisect(0.0, 4.0 * below_wrist_target_deg, [&](double j) {
            m.soft_tissue_deg = j;
            return score(bw, m);
        }, below_wrist_target_deg);
        return m;
    };
    const double twist = bisect(0.0, 4.0 * wrist_target_deg, [&](double t) {
        return score(wr, fit_tissue(t));
    }, wrist_target_deg);

    GainCalibration out;
    out.model = fit_tissue(twist);
    out.below_wrist_deg = score(bw, out.model);
    out.wrist_deg = score(wr, out.model);
    return out;
}

}  // namespace eknit::placement
