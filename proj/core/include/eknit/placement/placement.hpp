#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace eknit::placement {

struct JointTrace {
    double sample_rate_hz = 0.0;
    std::vector<double> angle_deg;

    std::size_t size() const { return angle_deg.size(); }
    bool operator==(const JointTrace&) const = default;
};

enum class Region : std::uint8_t { BelowWrist, Wrist, Forearm, Elbow, UpperArm };

std::string_view region_name(Region r);
std::optional<Region> region_from_name(std::string_view name);

struct PlacementPosition {
    int index = 1;
    double distance_cm = 0.0;  ///< from the wrist, towards the shoulder
    Region region = Region::Wrist;

    bool operator==(const PlacementPosition&) const = default;
};

/// Eight equidistant positions from the wrist (index 1) to the shoulder (index 8).
std::vector<PlacementPosition> default_arm_positions();

/// How strongly each error source shows up in a region. Weights are part of
/// the model, not fitted.
struct RegionWeights {
    double twist = 0.0;
    double tissue = 0.0;
    double decoupling = 0.0;
};

/// Additive IMU error model. Each source is a unit-RMS process scaled by its
/// gain (degrees RMS) and by the position's region weight:
///   twist       sinusoid at `twist_frequency_hz` with a random phase
///   tissue      AR(1) Gaussian process with `tissue_correlation_s`
///   decoupling  the normalised flexion itself, with a negative sign: an IMU
///               past the elbow does not see the forearm rotate
///
/// Ordering guarantees (with m_tw = 2*sqrt(2)/pi, m_ti = sqrt(2/pi),
/// m_dec = sqrt(2/3) the mean absolute values of the unit processes):
///   Wrist > BelowWrist          whenever wrist_twist_deg > 0
///   Forearm > BelowWrist        when 0.35 * m_ti * tissue > 0.25 * m_tw * twist
///   UpperArm > every forearm    when m_dec * decoupling >
///                                 max(m_tw * twist + m_ti * tissue, 1.35 * m_ti * tissue)
struct ImuNoiseModel {
    // Twist and tissue gains as fitted by calibrate_noise_gains on the
    // reference trace (100 seeds, base seed 0, targets 8.24 / 10.63 deg).
    double wrist_twist_deg = 8.4354322922888425;
    double soft_tissue_deg = 10.051762384032916;
    double decoupling_deg = 30.0;
    double twist_frequency_hz = 0.5;
    double tissue_correlation_s = 0.1;
    double elbow_distance_cm = 27.0;
    double decoupling_growth_cm = 25.0;

    RegionWeights weights(const PlacementPosition& pos) const;
    bool respects_ordering_inequalities() const;
};

/// angle(t) = amplitude/2 * (1 - cos(2 pi f t)).
JointTrace synthesize_flexion_trace(double duration_s, double frequency_hz, double amplitude_deg,
                                    double sample_rate_hz = 100.0);

/// 10 s of 0.5 Hz, 90 degree flexion at 100 Hz.
JointTrace reference_flexion_trace();

JointTrace simulate_estimated_trace(const JointTrace& truth, const PlacementPosition& pos,
                                    const ImuNoiseModel& model, std::uint64_t seed);

/// Mean over frames of |est - truth|, in degrees.
double mpjre(const JointTrace& est, const JointTrace& truth);

struct PlacementScore {
    PlacementPosition position;
    double mpjre_deg = 0.0;
};

struct PlacementReport {
    std::vector<PlacementScore> per_position;  ///< input order
    std::vector<int> ranking;                  ///< position indices, best first
    int argmin = 0;

    const PlacementScore& score(int index) const;
};

/// Seed `k` of a study, shared by every position (common random numbers).
std::uint64_t placement_seed(std::uint64_t base_seed, std::size_t k);

PlacementReport rank_placements(std::span<const PlacementPosition> positions,
                                const JointTrace& truth, const ImuNoiseModel& model,
                                std::size_t seeds_per_position, std::uint64_t base_seed = 0);

struct GainCalibration {
    ImuNoiseModel model;
    double below_wrist_deg = 0.0;
    double wrist_deg = 0.0;
};

/// Nested bisection: soft-tissue gain pins the below-wrist MPJRE, wrist-twist
/// gain pins the wrist MPJRE. Other gains are left as given.
GainCalibration calibrate_noise_gains(std::span<const PlacementPosition> positions,
                                      const JointTrace& truth, ImuNoiseModel model,
                                      double below_wrist_target_deg, double wrist_target_deg,
                                      std::size_t seeds_per_position, std::uint64_t base_seed = 0);

}  // namespace eknit::placement
