#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eknit/placement/calibration.hpp"
#include "eknit/placement/placement.hpp"
#include "eknit/random.hpp"

using namespace eknit;
using namespace eknit::placement;

namespace {

ImuNoiseModel only(double twist, double tissue, double decoupling) {
    ImuNoiseModel m;
    m.wrist_twist_deg = twist;
    m.soft_tissue_deg = tissue;
    m.decoupling_deg = decoupling;
    return m;
}

PlacementPosition at(Region r, double cm = 0.0) { return {1, cm, r}; }

double mean_mpjre(const PlacementPosition& p, const ImuNoiseModel& m, std::size_t seeds) {
    const PlacementPosition one[] = {p};
    return rank_placements(one, reference_flexion_trace(), m, seeds).per_position[0].mpjre_deg;
}

}  // namespace

TEST(Mpjre, Basics) {
    const auto x = reference_flexion_trace();
    EXPECT_EQ(mpjre(x, x), 0.0);
    for (double c : {-3.5, 0.25, 12.0}) {
        auto y = x;
        for (auto& v : y.angle_deg) v += c;
        EXPECT_NEAR(mpjre(y, x), std::abs(c), 1e-12);
    }
    JointTrace shorter{100.0, {1.0}};
    EXPECT_THROW(mpjre(shorter, x), ValidationError);
}

TEST(Mpjre, NonNegativeOnRandomTraces) {
    Rng rng(1);
    const auto x = reference_flexion_trace();
    for (int k = 0; k < 50; ++k) {
        auto y = x;
        for (auto& v : y.angle_deg) v += 10.0 * rng.normal();
        EXPECT_GE(mpjre(y, x), 0.0);
    }
}

TEST(FlexionTrace, ClosedFormAndDerivative) {
    const double a = 90.0, f = 0.5, rate = 100.0;
    const auto tr = synthesize_flexion_trace(10.0, f, a, rate);
    ASSERT_EQ(tr.size(), 1000u);
    for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        EXPECT_NEAR(tr.angle_deg[i], 0.5 * a * (1.0 - std::cos(2.0 * std::numbers::pi * f * t)), 1e-9);
        // Central difference against d/dt = a*pi*f*sin(2 pi f t); truncation error <= h^2/6 * max|x'''|.
        const double fd = (tr.angle_deg[i + 1] - tr.angle_deg[i - 1]) * rate / 2.0;
        const double w = 2.0 * std::numbers::pi * f;
        const double exact = 0.5 * a * w * std::sin(w * t);
        const double h = 1.0 / rate;
        EXPECT_NEAR(fd, exact, h * h / 6.0 * 0.5 * a * w * w * w + 1e-9);
    }
    EXPECT_DOUBLE_EQ(tr.angle_deg.front(), 0.0);
}

TEST(Estimate, ZeroGainIsIdentity) {
    const auto x = reference_flexion_trace();
    for (auto p : default_arm_positions()) EXPECT_EQ(simulate_estimated_trace(x, p, only(0, 0, 0), 5), x);
}

// A unit sinusoid scaled by sqrt(2) has mean |.| of 2*sqrt(2)/pi over whole periods.
TEST(Estimate, TwistOnlyMatchesSinusoidMeanAbs) {
    const double gain = 6.0;
    EXPECT_NEAR(mean_mpjre(at(Region::Wrist), only(gain, 0, 0), 20), gain * 2.0 * std::sqrt(2.0) / std::numbers::pi,
                0.01);
}

// Unit-variance Gaussian: E|X| = sqrt(2/pi).
TEST(Estimate, TissueOnlyMatchesHalfNormalMean) {
    const double gain = 5.0;
    EXPECT_NEAR(mean_mpjre(at(Region::Wrist), only(0, gain, 0), 200), gain * std::sqrt(2.0 / std::numbers::pi),
                0.05 * gain);
}

// Decoupling is deterministic: mean(angle)/rms(angle) = sqrt(2/3) for 1 - cos.
TEST(Estimate, DecouplingOnlyIsExact) {
    const auto m = only(0, 0, 20.0);
    for (double cm : {27.0, 40.0, 55.0}) {
        const double w = 1.0 + (cm - m.elbow_distance_cm) / m.decoupling_growth_cm;
        EXPECT_NEAR(mean_mpjre(at(Region::UpperArm, cm), m, 3), w * 20.0 * std::sqrt(2.0 / 3.0), 1e-3);
    }
}

TEST(Placement, DefaultPositionsSpanTheArm) {
    const auto p = default_arm_positions();
    ASSERT_EQ(p.size(), 8u);
    EXPECT_EQ(p.front().index, 1);
    EXPECT_EQ(p.back().index, 8);
    for (std::size_t i = 1; i < p.size(); ++i) EXPECT_GT(p[i].distance_cm, p[i - 1].distance_cm);
}

TEST(Placement, RankingIsSortedAndDeterministic) {
    const auto pos = default_arm_positions();
    const auto a = rank_placements(pos, reference_flexion_trace(), {}, 20, 3);
    const auto b = rank_placements(pos, reference_flexion_trace(), {}, 20, 3);
    EXPECT_EQ(a.ranking, b.ranking);
    for (std::size_t i = 1; i < a.ranking.size(); ++i) {
        EXPECT_LE(a.score(a.ranking[i - 1]).mpjre_deg, a.score(a.ranking[i]).mpjre_deg);
    }
    EXPECT_EQ(a.argmin, a.ranking.front());
}

TEST(Placement, ShippedGainsRespectInequalities) { EXPECT_TRUE(ImuNoiseModel{}.respects_ordering_inequalities()); }

TEST(Placement, InequalitiesRejectZeroTwist) { EXPECT_FALSE(only(0.0, 10.0, 40.0).respects_ordering_inequalities()); }

TEST(Calibration, ExactLine) {
    const std::vector<double> raw = {0, 10, 20, 35, 50};
    std::vector<double> ref;
    for (double r : raw) ref.push_back(2.0 * r + 1.0);
    const auto c = fit_linear_calibration(raw, ref);
    EXPECT_NEAR(c.slope_c_per_count, 2.0, 1e-12);
    EXPECT_NEAR(c.intercept_c, 1.0, 1e-12);
    EXPECT_NEAR(c.r2, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(apply_calibration(c, 0.0), c.intercept_c);
}

TEST(Calibration, TwoPointsInterpolate) {
    const std::vector<double> raw = {100, 300}, ref = {20.0, 45.0};
    const auto c = fit_linear_calibration(raw, ref);
    EXPECT_NEAR(apply_calibration(c, 100), 20.0, 1e-12);
    EXPECT_NEAR(apply_calibration(c, 300), 45.0, 1e-12);
    EXPECT_NEAR(c.r2, 1.0, 1e-12);
}

TEST(Calibration, DegenerateInput) {
    const std::vector<double> raw = {5, 5, 5}, ref = {1, 2, 3};
    EXPECT_THROW(fit_linear_calibration(raw, ref), DegenerateInput);
    const std::vector<double> one = {1}, one_ref = {2};
    EXPECT_THROW(fit_linear_calibration(one, one_ref), DegenerateInput);
}

TEST(Calibration, ResidualsOrthogonalToDesign) {
    Rng rng(8);
    std::vector<double> raw, ref;
    for (int i = 0; i < 40; ++i) {
        raw.push_back(300 + 20 * i);
        ref.push_back(0.06 * raw.back() - 9.0 + rng.normal(0.0, 0.3));
    }
    const auto c = fit_linear_calibration(raw, ref);
    double s1 = 0, sx = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double e = ref[i] - apply_calibration(c, raw[i]);
        s1 += e;
        sx += e * raw[i];
    }
    EXPECT_NEAR(s1, 0.0, 1e-9);
    EXPECT_NEAR(sx, 0.0, 1e-6);
}

TEST(Calibration, ZeroSlopeIsConstant) {
    const LinearCalibration c{0.0, 21.5, 1.0};
    EXPECT_DOUBLE_EQ(apply_calibration(c, -400), 21.5);
    EXPECT_DOUBLE_EQ(apply_calibration(c, 1e6), 21.5);
}
