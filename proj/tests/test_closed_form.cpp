#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "finterp/closed_form.hpp"
#include "finterp/rng.hpp"

using namespace finterp;

namespace {

Schedule linear() { return Schedule::builtin(GammaFamily::zero); }
Schedule sqrt_s() { return Schedule::builtin(GammaFamily::sqrt_bridge); }
std::vector<double> v1(double x) { return {x}; }

}  // namespace

TEST(LogWeights, SingleAnchor) {
    auto X = TrainingSet::from_points({{0.4, -1.0}});
    auto w = log_weights(std::vector<double>{3.0, 2.0}, 0.3, X, sqrt_s());
    ASSERT_EQ(w.w.size(), 1u);
    EXPECT_DOUBLE_EQ(w.w[0], 1.0);
}

TEST(LogWeights, Equidistant) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    auto w = log_weights(v1(0.25), 0.5, X, linear());
    EXPECT_NEAR(w.w[0], 0.5, 1e-15);
    EXPECT_NEAR(w.w[1], 0.5, 1e-15);
    EXPECT_EQ(w.argmax, 0u);
}

TEST(LogWeights, TwoAnchorValue) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    auto w = log_weights(v1(0.5), 0.5, X, linear());
    EXPECT_NEAR(w.w[0], 0.37754, 1e-5);
    EXPECT_NEAR(w.w[1], 0.62246, 1e-5);
    EXPECT_NEAR(w.w[0] + w.w[1], 1.0, 1e-15);
}

TEST(LogWeights, Errors) {
    auto X = TrainingSet::from_points({{0.0}});
    EXPECT_THROW(log_weights(v1(0.0), 0.0, X, linear()), SingularTimeError);
    EXPECT_THROW(log_weights(v1(NAN), 0.5, X, linear()), NumericError);
}

TEST(LogWeights, Sharpening) {
    auto X = TrainingSet::from_points({{0.0, 0.0}, {1.0, 0.2}, {0.3, 0.9}});
    auto s = sqrt_s();
    std::vector<double> z{0.95, 0.25};
    double prev = 0.0;
    for (double t : {0.1, 0.01, 0.001}) {
        auto w = log_weights(z, t, X, s);
        double mx = w.w[w.argmax];
        EXPECT_GE(mx, prev);
        prev = mx;
    }
    EXPECT_GT(prev, 1.0 - 1e-9);
}

TEST(Velocity, SingleAnchorLinear) {
    auto X = TrainingSet::from_points({{0.0}});
    EXPECT_NEAR(velocity(v1(1.0), 0.5, X, linear()).value[0], 2.0, 1e-14);
}

TEST(Velocity, TwoAnchorValue) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    EXPECT_NEAR(velocity(v1(0.5), 0.5, X, linear()).value[0], -0.24492, 1e-5);
}

TEST(Velocity, SingleAnchorLinearGeneral) {
    RandomStream r(5);
    for (int k = 0; k < 100; ++k) {
        double x = 4 * r.uniform() - 2, z = 4 * r.uniform() - 2, t = 0.01 + 0.99 * r.uniform();
        auto X = TrainingSet::from_points({{x}});
        EXPECT_NEAR(velocity(v1(z), t, X, linear()).value[0], (z - x) / t, 1e-10 * (1 + std::abs(z - x) / t));
    }
}

TEST(Velocity, MatchesUnstableFormula) {
    auto X = TrainingSet::from_points({{0.1, 0.7}, {0.9, 0.2}, {0.5, 0.5}});
    auto s = sqrt_s();
    std::vector<double> z{0.3, -0.4};
    for (double t : {0.2, 0.5, 0.9}) {
        auto v = s.values(t);
        auto c = coeffs(s, t);
        auto w = log_weights(z, t, X, s);
        for (std::size_t k = 0; k < 2; ++k) {
            double ref = 0;
            for (std::size_t i = 0; i < 3; ++i) ref += w.w[i] * (c.c1 * z[k] - c.c2 * X.point(i)[k]) / c.c3;
            EXPECT_NEAR(velocity(z, t, X, s).value[k], ref, 1e-12);
        }
        (void)v;
    }
}

TEST(Score, TwoAnchorValue) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    EXPECT_NEAR(score(v1(0.5), 0.5, X, linear()).value[0], -0.75508, 1e-5);
}

TEST(Score, MixtureGradientIdentity) {
    auto X = TrainingSet::from_points({{0.1, 0.7}, {0.9, 0.2}, {0.5, 0.5}, {-1.0, 0.0}});
    auto s = sqrt_s();
    RandomStream r(12);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> z{3 * r.uniform() - 1.5, 3 * r.uniform() - 1.5};
        double t = 0.05 + 0.9 * r.uniform();
        auto v = s.values(t);
        auto c = coeffs(s, t);
        auto w = log_weights(z, t, X, s);
        auto sc = score(z, t, X, s).value;
        for (std::size_t j = 0; j < 2; ++j) {
            double ref = 0;
            for (std::size_t i = 0; i < X.size(); ++i) ref += w.w[i] * (v.alpha * X.point(i)[j] - z[j]) / c.c3;
            EXPECT_NEAR(sc[j], ref, 1e-10 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST(Score, SingleAnchorLinear) {
    auto X = TrainingSet::from_points({{0.7}});
    for (double t : {0.1, 0.4, 0.8}) {
        double z = 0.3;
        EXPECT_NEAR(score(v1(z), t, X, linear()).value[0], ((1 - t) * 0.7 - z) / (t * t), 1e-9);
    }
}

TEST(Score, ZeroAtMean) {
    auto X = TrainingSet::from_points({{0.6, -0.2}});
    double t = 0.3, a = 1 - t;
    auto sc = score(std::vector<double>{a * 0.6, a * -0.2}, t, X, sqrt_s()).value;
    EXPECT_NEAR(sc[0], 0.0, 1e-14);
    EXPECT_NEAR(sc[1], 0.0, 1e-14);
}

TEST(Score, SingularWhenBVanishes) {
    ScheduleFunctions f;
    // alpha, beta, gamma all flat: B = 0 everywhere
    f.alpha = [](double) { return 0.5; };
    f.dalpha = [](double) { return 0.0; };
    f.beta = [](double) { return 0.0; };
    f.dbeta = [](double) { return 0.0; };
    f.gamma = [](double) { return 1.0; };
    f.dgamma = [](double) { return 0.0; };
    auto X = TrainingSet::from_points({{0.0}});
    EXPECT_THROW(score(v1(0.1), 0.5, X, Schedule::custom("flat", f)), SingularScoreError);
}

TEST(LogDensity, StandardNormal) {
    auto X = TrainingSet::from_points({{0.0}});
    // linear schedule: C3 = t^2 = 1 at t = 1
    EXPECT_NEAR(log_density(v1(0.0), 1.0, X, linear()), -0.5 * std::log(2 * std::numbers::pi), 1e-14);
}

TEST(LogDensity, FarPointFinite) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    double ld = log_density(v1(1e3), 1e-4, X, sqrt_s());
    EXPECT_TRUE(std::isfinite(ld));
}

TEST(TwoSided, SinglePair) {
    auto X = TrainingSet::from_points({{0.2}}), Y = TrainingSet::from_points({{-0.7}});
    auto s = sqrt_s();
    double t = 0.3, z = 0.45;
    auto v = s.values(t);
    double r = v.dgamma / v.gamma;
    double ref = r * z + (v.dalpha - r * v.alpha) * 0.2 + (v.dbeta - r * v.beta) * -0.7;
    auto out = velocity_two_sided(v1(z), t, X, Y, s);
    EXPECT_NEAR(out.value[0], ref, 1e-12);
    EXPECT_DOUBLE_EQ(out.weights.w[0], 1.0);
}

TEST(TwoSided, AnchorsAtOrigin) {
    auto X = TrainingSet::from_points({{0.0}}), Y = TrainingSet::from_points({{0.0}});
    auto s = sqrt_s();
    for (double t : {0.2, 0.6}) {
        auto v = s.values(t);
        EXPECT_NEAR(velocity_two_sided(v1(1.3), t, X, Y, s).value[0], v.dgamma / v.gamma * 1.3, 1e-12);
    }
}

TEST(TwoSided, SymmetricPairsShareWeight) {
    auto X = TrainingSet::from_points({{-1.0}, {1.0}}), Y = TrainingSet::from_points({{-1.0}, {1.0}});
    auto out = velocity_two_sided(v1(0.0), 0.5, X, Y, sqrt_s());
    // pairs (0,0) and (1,1) are mirror images about z = 0
    ASSERT_EQ(out.weights.w.size(), 4u);
    EXPECT_NEAR(out.weights.w[0], out.weights.w[3], 1e-15);
    EXPECT_NEAR(out.weights.w[1], out.weights.w[2], 1e-15);
}

TEST(TwoSided, Errors) {
    auto X = TrainingSet::from_points({{0.0}});
    EXPECT_THROW(velocity_two_sided(v1(0.0), 0.5, X, X, linear()), NotApplicableError);
    EXPECT_THROW(velocity_two_sided(v1(0.0), 0.0, X, X, sqrt_s()), SingularTimeError);
    EXPECT_THROW(velocity_two_sided(v1(0.0), 1.0, X, X, sqrt_s()), SingularTimeError);
}
