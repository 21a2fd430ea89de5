#include <gtest/gtest.h>

#include <cmath>

#include "finterp/analysis.hpp"
#include "finterp/rng.hpp"

using namespace finterp;

namespace {

Schedule linear() { return Schedule::builtin(GammaFamily::zero); }
Schedule sqrt_s() { return Schedule::builtin(GammaFamily::sqrt_bridge); }
std::vector<double> v1(double x) { return {x}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

}  // namespace

TEST(NearestNeighbor, Basic) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    auto nn = nearest_neighbor(v1(0.2), X);
    EXPECT_EQ(nn.index1, 0u);
    EXPECT_NEAR(nn.d1, 0.2, 1e-15);
    ASSERT_TRUE(nn.index2);
    EXPECT_EQ(*nn.index2, 1u);
    EXPECT_NEAR(nn.d2, 0.8, 1e-15);
}

TEST(NearestNeighbor, TieGoesToSmallerIndex) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    EXPECT_EQ(nearest_neighbor(v1(0.5), X).index1, 0u);
    auto Y = TrainingSet::from_points({{1.0}, {0.0}});
    EXPECT_EQ(nearest_neighbor(v1(0.5), Y).index1, 0u);
}

TEST(NearestNeighbor, SingleAnchor) {
    auto X = TrainingSet::from_points({{3.0}});
    EXPECT_FALSE(nearest_neighbor(v1(0.0), X).index2);
}

TEST(Memorization, RatioExamples) {
    auto X = TrainingSet::from_points({{0.0}, {0.7}});
    std::vector<std::vector<double>> yes{{0.1}}, no{{-1.0}};
    EXPECT_TRUE(memorization_test(yes, X).memorized[0]);  // 0.01 / 0.36
    auto Y = TrainingSet::from_points({{0.0}, {2.5}});
    EXPECT_FALSE(memorization_test(std::vector<std::vector<double>>{{1.0}}, Y).memorized[0]);  // 1 / 2.25
}

TEST(Memorization, BoundaryInclusive) {
    // d1^2 = 1, d2^2 = 4: ratio exactly 0.25
    auto X = TrainingSet::from_points({{0.0}, {3.0}});
    std::vector<std::vector<double>> z{{1.0}};
    EXPECT_TRUE(memorization_test(z, X, 0.25).memorized[0]);
    EXPECT_FALSE(memorization_test(z, X, 0.2499999).memorized[0]);
    // d1 / d2 = 0.577 sits just under sqrt(1/3)
    auto Y = TrainingSet::from_points({{0.0}, {1.577}});
    EXPECT_TRUE(memorization_test(std::vector<std::vector<double>>{{0.577}}, Y).memorized[0]);
}

TEST(Memorization, NeedsTwoAnchors) {
    auto X = TrainingSet::from_points({{0.0}});
    EXPECT_THROW(memorization_test(std::vector<std::vector<double>>{{0.0}}, X), DomainError);
}

TEST(Classify, Kinds) {
    auto X = TrainingSet::from_points({{0.0, 0.0}, {1.0, 0.0}});
    EXPECT_EQ(classify_endpoint(std::vector<double>{0.005, 0.0}, false, X).kind, EndpointKind::converged);
    EXPECT_EQ(classify_endpoint(std::vector<double>{0.5, 0.3}, false, X).kind, EndpointKind::vicinity);
    EXPECT_EQ(classify_endpoint(std::vector<double>{25.0, 0.0}, false, X).kind, EndpointKind::diverged);
    EXPECT_EQ(classify_endpoint(std::vector<double>{0.0, 0.0}, true, X).kind, EndpointKind::diverged);
    auto c = classify_endpoint(std::vector<double>{1.001, 0.0}, false, X);
    EXPECT_EQ(c.index, 1u);
}

TEST(ResidualVariance, ExactAnchorsGiveZero) {
    auto X = uniform_toy(5, 2, 1);
    std::vector<std::vector<double>> s;
    for (int k = 0; k < 40; ++k) {
        auto p = X.point(k % 5);
        s.emplace_back(p.begin(), p.end());
    }
    EXPECT_EQ(residual_variance(s, X).sigma2, 0.0);
}

TEST(ResidualVariance, NeedsThirtySamples) {
    auto X = uniform_toy(5, 2, 1);
    std::vector<std::vector<double>> s(29, std::vector<double>{0.0, 0.0});
    EXPECT_THROW(residual_variance(s, X), InsufficientDataError);
}

TEST(ResidualVariance, SyntheticGaussian) {
    auto X = TrainingSet::from_points({{0.0, 0.0}, {10.0, 10.0}});
    double mean_est = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        RandomStream r(substream_key(77, rep));
        std::vector<std::vector<double>> s;
        for (int k = 0; k < 2000; ++k) {
            double sd = std::sqrt(0.016);
            double off = (k % 2) ? 10.0 : 0.0;
            s.push_back({off + sd * r.normal(), off + sd * r.normal()});
        }
        double est = residual_variance(s, X).sigma2;
        if (rep == 0) EXPECT_NEAR(est, 0.016, 0.15 * 0.016);
        mean_est += est / 20;
    }
    EXPECT_NEAR(mean_est, 0.016, 0.02 * 0.016);
}

TEST(MonotoneDivergence, RadialEscape) {
    auto X = TrainingSet::from_points({{0.0, 0.0}, {1.0, 0.0}});
    Trajectory tr;
    tr.dim = 2;
    for (int k = 0; k < 10; ++k) {
        tr.times.push_back(1.0 - 0.1 * k);
        tr.states.push_back(-2.0 - k);
        tr.states.push_back(0.0);
    }
    EXPECT_TRUE(monotone_divergence(tr, X));
}

TEST(MonotoneDivergence, ConvergingRunIsFalse) {
    auto X = uniform_toy(5, 2, 1);
    SamplerConfig c;
    c.steps = 2000;
    c.t_end = 1e-3;
    c.record_trajectory = true;
    EXPECT_FALSE(monotone_divergence(sample_deterministic(c, X, sqrt_s()), X));
}

TEST(MonotoneDivergence, NeedsRecording) {
    auto X = uniform_toy(5, 2, 1);
    Trajectory tr;
    tr.dim = 2;
    tr.endpoint = {0.0, 0.0};
    EXPECT_THROW(monotone_divergence(tr, X), DomainError);
}

TEST(GaussHermite, IntegratesMoments) {
    auto gh = gauss_hermite(128);
    double m0 = 0, m2 = 0, m4 = 0;
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
        double x = gh.nodes[k];
        m0 += gh.weights[k];
        m2 += gh.weights[k] * x * x;
        m4 += gh.weights[k] * x * x * x * x;
    }
    const double sp = std::sqrt(std::numbers::pi);
    EXPECT_NEAR(m0, sp, 1e-12);
    EXPECT_NEAR(m2, sp / 2, 1e-12);
    EXPECT_NEAR(m4, 3 * sp / 4, 1e-11);
}

TEST(VelocityOracle, TwoAnchorValue) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    EXPECT_NEAR(mc_velocity_oracle(0.5, 0.5, X, linear()), -0.24492, 1e-5);
}

TEST(VelocityOracle, FarPoint) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    for (const auto& s : {linear(), sqrt_s()}) {
        double z = 10.5;
        EXPECT_LE(rel(mc_velocity_oracle(z, 0.5, X, s), velocity(v1(z), 0.5, X, s).value[0]), 1e-3);
    }
}

TEST(VelocityOracle, RandomPoints) {
    auto X = uniform_toy(4, 1, 3);
    RandomStream r(21);
    for (const auto& s : {linear(), sqrt_s()})
        for (int k = 0; k < 50; ++k) {
            double z = -2.0 + 5.0 * r.uniform(), t = 0.05 + 0.9 * r.uniform();
            EXPECT_LE(rel(mc_velocity_oracle(z, t, X, s), velocity(v1(z), t, X, s).value[0]), 1e-3);
        }
}

TEST(VelocityOracle, OnlyOneDimension) {
    auto X = uniform_toy(4, 2, 3);
    EXPECT_THROW(mc_velocity_oracle(0.0, 0.5, X, linear()), NotApplicableError);
}

TEST(FdScore, ZeroAtMean) {
    auto X = TrainingSet::from_points({{0.6, -0.2}});
    double t = 0.3, a = 1 - t;
    auto g = fd_score_oracle(std::vector<double>{a * 0.6, a * -0.2}, t, X, sqrt_s());
    EXPECT_NEAR(g[0], 0.0, 1e-9);
    EXPECT_NEAR(g[1], 0.0, 1e-9);
}

TEST(FdScore, MatchesClosedForm) {
    auto X = uniform_toy(5, 2, 4);
    RandomStream r(8);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> z{-2 + 5 * r.uniform(), -2 + 5 * r.uniform()};
        double t = 0.05 + 0.9 * r.uniform();
        auto fd = fd_score_oracle(z, t, X, sqrt_s());
        auto cf = score(z, t, X, sqrt_s()).value;
        for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(fd[j] - cf[j]), 1e-6 * std::max(1.0, std::abs(cf[j])));
    }
}

TEST(FdScore, TranslationEquivariant) {
    auto X = TrainingSet::from_points({{0.1}, {0.9}});
    auto Xs = TrainingSet::from_points({{2.1}, {2.9}});
    double t = 0.4, a = 1 - t, z = 0.3;
    // shifting anchors by c shifts the mixture by alpha c
    auto g0 = fd_score_oracle(v1(z), t, X, sqrt_s());
    auto g1 = fd_score_oracle(v1(z + a * 2.0), t, Xs, sqrt_s());
    EXPECT_NEAR(g0[0], g1[0], 1e-8);
    EXPECT_NEAR(score(v1(z), t, X, sqrt_s()).value[0], score(v1(z + a * 2.0), t, Xs, sqrt_s()).value[0], 1e-10);
}
