#include <gtest/gtest.h>

#include <cmath>

#include "finterp/analysis.hpp"
#include "finterp/sampler.hpp"

using namespace finterp;

namespace {

Schedule linear() { return Schedule::builtin(GammaFamily::zero); }
Schedule sqrt_s() { return Schedule::builtin(GammaFamily::sqrt_bridge); }

SamplerConfig grid(std::size_t n, double t_end) {
    SamplerConfig c;
    c.steps = n;
    c.t_end = t_end;
    return c;
}

}  // namespace

TEST(SamplerConfig, Validation) {
    EXPECT_THROW(grid(1, 1e-3).validate(), ValidationError);
    EXPECT_THROW(grid(100, 0.0).validate(), ValidationError);
    EXPECT_THROW(grid(100, 0.5).validate(), ValidationError);
    auto g = grid(10, 1e-3).grid();
    EXPECT_EQ(g.front(), 1.0);
    EXPECT_EQ(g.back(), 1e-3);
}

TEST(Deterministic, SingleAnchorLinearIsExact) {
    auto X = TrainingSet::from_points({{0.0}});
    for (std::size_t n : {10, 2000, 20000}) {
        auto tr = sample_deterministic(grid(n, 1e-3), X, linear(), std::vector<double>{1.0});
        EXPECT_NEAR(tr.endpoint[0], 1e-3, 1e-15) << n;
    }
}

TEST(Deterministic, FixedPoint) {
    auto X = TrainingSet::from_points({{0.0}});
    auto tr = sample_deterministic(grid(500, 1e-3), X, sqrt_s(), std::vector<double>{0.0});
    EXPECT_EQ(tr.endpoint[0], 0.0);
}

TEST(Deterministic, Determinism) {
    auto X = uniform_toy(5, 2, 3);
    auto a = sample_deterministic(grid(1000, 1e-3), X, sqrt_s(), std::nullopt, 7);
    auto b = sample_deterministic(grid(1000, 1e-3), X, sqrt_s(), std::nullopt, 7);
    EXPECT_EQ(a.start, b.start);
    EXPECT_EQ(a.endpoint, b.endpoint);
}

TEST(Deterministic, Recording) {
    auto X = uniform_toy(3, 2, 3);
    auto c = grid(50, 1e-2);
    c.record_trajectory = true;
    auto tr = sample_deterministic(c, X, sqrt_s());
    ASSERT_EQ(tr.recorded_states(), 51u);
    EXPECT_EQ(tr.times.front(), 1.0);
    EXPECT_EQ(tr.times.back(), 1e-2);
    EXPECT_EQ(std::vector<double>(tr.state(50).begin(), tr.state(50).end()), tr.endpoint);
}

TEST(Deterministic, GridRefinementIsFirstOrder) {
    auto X = TrainingSet::from_points({{0.0}, {1.0}});
    std::vector<double> e;
    for (std::size_t n : {2000, 4000, 8000, 16000})
        e.push_back(sample_deterministic(grid(n, 1e-3), X, sqrt_s(), std::vector<double>{0.3}).endpoint[0]);
    for (std::size_t i = 0; i + 2 < e.size(); ++i) {
        double ratio = (e[i + 1] - e[i]) / (e[i + 2] - e[i + 1]);
        EXPECT_GE(ratio, 1.5);
        EXPECT_LE(ratio, 2.5);
    }
}

TEST(Deterministic, EndpointsNearAnchorsAtDefaults) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto X = uniform_toy(2 + seed * 2, 1 + seed % 3, seed);
        SamplerConfig c;
        c.master_seed = seed;
        auto batch = sample_batch(c, X, sqrt_s(), 60);
        int ok = 0;
        for (auto& tr : batch) ok += nearest_neighbor(tr.endpoint, X).d1 <= 1e-2;
        EXPECT_GE(ok, 59) << "seed " << seed;
    }
}

TEST(Deterministic, DivergenceFlagged) {
    // C1 = gamma gamma' + beta' beta ~ -1e3 gives an expansion factor ~ 1 + 1e3 h per step
    ScheduleFunctions f;
    f.alpha = [](double t) { return 1.0 - t; };
    f.dalpha = [](double) { return -1.0; };
    f.beta = [](double t) { return t; };
    f.dbeta = [](double) { return 1.0; };
    f.gamma = [](double) { return 1.0; };
    f.dgamma = [](double) { return -1e3; };
    auto X = TrainingSet::from_points({{0.0}});
    auto tr = sample_deterministic(grid(50, 0.3), X, Schedule::custom("blowup", f), std::vector<double>{1.0});
    EXPECT_TRUE(tr.diverged);
    EXPECT_LT(tr.steps_taken, 50u);
    EXPECT_TRUE(std::isfinite(tr.endpoint[0]));
}

TEST(Stochastic, ZeroZetaMatchesDeterministic) {
    auto X = uniform_toy(5, 2, 4);
    auto c = grid(400, 1e-3);
    c.record_trajectory = true;
    auto a = sample_deterministic(c, X, sqrt_s(), std::nullopt, 3);
    auto b = sample_stochastic(c, X, sqrt_s(), std::nullopt, 3);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
}

TEST(Stochastic, NoiseChangesPath) {
    auto X = uniform_toy(5, 2, 4);
    auto s = Schedule::builtin(GammaFamily::sqrt_bridge, ZetaFamily::constant, 0.008);
    auto a = sample_stochastic(grid(400, 1e-3), X, s, std::nullopt, 3);
    auto b = sample_stochastic(grid(400, 1e-3), X, s, std::nullopt, 3);
    auto c = sample_stochastic(grid(400, 1e-3), X, s, std::nullopt, 4);
    EXPECT_EQ(a.endpoint, b.endpoint);
    EXPECT_NE(a.endpoint, c.endpoint);
}

TEST(Batch, ThreadCountIndependent) {
    auto X = uniform_toy(5, 2, 8);
    auto c = grid(300, 1e-3);
    c.master_seed = 99;
    auto serial = sample_batch(c, X, sqrt_s(), 16, 1);
    auto parallel = sample_batch(c, X, sqrt_s(), 16, 4);
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(serial[k].endpoint, parallel[k].endpoint);
}

TEST(Batch, CountOneMatchesDirectCall) {
    auto X = uniform_toy(5, 2, 8);
    auto c = grid(300, 1e-3);
    auto batch = sample_batch(c, X, sqrt_s(), 1);
    EXPECT_EQ(batch[0].endpoint, sample_deterministic(c, X, sqrt_s(), std::nullopt, 0).endpoint);
    EXPECT_THROW(sample_batch(c, X, sqrt_s(), 0), ValidationError);
}

TEST(TwoSided, SinglePairReachesBothEnds) {
    auto X = TrainingSet::from_points({{0.0, 0.0}}), Y = TrainingSet::from_points({{1.0, 1.0}});
    auto c = grid(100000, 1e-3);
    auto tx = sample_two_sided(c, X, Y, sqrt_s(), TwoSidedDirection::to_x, std::vector<double>{0.998, 1.001});
    EXPECT_LE(nearest_neighbor(tx.endpoint, X).d1, 1e-2);
    auto ty = sample_two_sided(c, X, Y, sqrt_s(), TwoSidedDirection::to_y, std::vector<double>{0.001, -0.002});
    EXPECT_LE(nearest_neighbor(ty.endpoint, Y).d1, 1e-2);
}

TEST(TwoSided, OffsetFromStartAnchorIsTransported) {
    // single pair: Z_t = alpha X + beta Y + gamma eta, so the start offset is scaled by gamma(lo)/gamma(hi) = 1
    auto X = TrainingSet::from_points({{0.0}});
    auto c = grid(100000, 1e-3);
    for (auto dir : {TwoSidedDirection::to_x, TwoSidedDirection::to_y}) {
        EXPECT_NEAR(sample_two_sided(c, X, X, sqrt_s(), dir, std::vector<double>{0.0}).endpoint[0], 0.0, 1e-12);
        EXPECT_NEAR(sample_two_sided(c, X, X, sqrt_s(), dir, std::vector<double>{0.004}).endpoint[0], 0.004, 2e-4);
    }
}

TEST(TwoSided, LinearNotApplicable) {
    auto X = TrainingSet::from_points({{0.0}});
    EXPECT_THROW(sample_two_sided(SamplerConfig{}, X, X, linear(), TwoSidedDirection::to_x, std::vector<double>{0.0}),
                 NotApplicableError);
}
