#include <gtest/gtest.h>

#include <cmath>

#include "finterp/schedule.hpp"

using namespace finterp;

namespace {

Schedule linear() { return Schedule::builtin(GammaFamily::zero); }
Schedule sqrt_s() { return Schedule::builtin(GammaFamily::sqrt_bridge); }

}  // namespace

TEST(EvalSchedule, LinearAtHalf) {
    auto v = eval_schedule(linear(), 0.5);
    EXPECT_DOUBLE_EQ(v.alpha, 0.5);
    EXPECT_DOUBLE_EQ(v.dalpha, -1.0);
    EXPECT_DOUBLE_EQ(v.beta, 0.5);
    EXPECT_DOUBLE_EQ(v.dbeta, 1.0);
    EXPECT_DOUBLE_EQ(v.gamma, 0.0);
    EXPECT_DOUBLE_EQ(v.dgamma, 0.0);
}

TEST(EvalSchedule, SqrtAtHalf) {
    auto v = eval_schedule(sqrt_s(), 0.5);
    EXPECT_DOUBLE_EQ(v.gamma, 0.5);
    EXPECT_NEAR(v.dgamma, 0.0, 1e-15);
}

TEST(EvalSchedule, BoundaryAtOne) {
    for (auto g : Schedule::all_gamma_families()) {
        auto v = eval_schedule(Schedule::builtin(g), 1.0);
        EXPECT_EQ(v.alpha, 0.0);
        EXPECT_EQ(v.beta, 1.0);
    }
}

TEST(EvalSchedule, OutOfRangeThrows) {
    EXPECT_THROW(eval_schedule(linear(), -0.1), DomainError);
    EXPECT_THROW(eval_schedule(linear(), 1.1), DomainError);
    EXPECT_THROW(eval_schedule(linear(), NAN), DomainError);
}

TEST(EvalSchedule, SqrtGammaDGammaFiniteAtEnds) {
    auto s = sqrt_s();
    EXPECT_DOUBLE_EQ(s.values(0.0).gamma_dgamma, 0.5);
    EXPECT_DOUBLE_EQ(s.values(1.0).gamma_dgamma, -0.5);
}

TEST(Coeffs, LinearAtHalf) {
    auto c = coeffs(linear(), 0.5);
    EXPECT_DOUBLE_EQ(c.c1, 0.5);
    EXPECT_DOUBLE_EQ(c.c2, 0.5);
    EXPECT_DOUBLE_EQ(c.c3, 0.25);
    EXPECT_DOUBLE_EQ(c.b, -0.5);
}

TEST(Coeffs, SqrtAtHalf) {
    auto c = coeffs(sqrt_s(), 0.5);
    EXPECT_DOUBLE_EQ(c.c1, 0.5);
    EXPECT_DOUBLE_EQ(c.c2, 0.75);
    EXPECT_DOUBLE_EQ(c.c3, 0.5);
    EXPECT_DOUBLE_EQ(c.b, -0.75);
}

TEST(Coeffs, LinearGeneralT) {
    for (double t : {0.01, 0.1, 0.33, 0.7, 0.99, 1.0}) {
        auto c = coeffs(linear(), t);
        EXPECT_NEAR(c.c1, t, 1e-15);
        EXPECT_NEAR(c.c2, t, 1e-15);
        EXPECT_NEAR(c.c3, t * t, 1e-15);
        EXPECT_NEAR(c.b, -t, 1e-15);
    }
}

TEST(Coeffs, BEqualsMinusC2) {
    for (auto g : Schedule::all_gamma_families())
        for (double t : {0.05, 0.3, 0.5, 0.8}) {
            auto c = coeffs(Schedule::builtin(g), t);
            EXPECT_NEAR(c.b, -c.c2, 1e-14) << Schedule::gamma_family_name(g) << " t=" << t;
        }
}

TEST(Coeffs, SingularAtZero) { EXPECT_THROW(coeffs(linear(), 0.0), SingularTimeError); }

TEST(ValidateSchedule, BuiltinsPass) {
    EXPECT_TRUE(validate_schedule(linear()).ok());
    EXPECT_TRUE(validate_schedule(sqrt_s()).ok());
    EXPECT_TRUE(validate_schedule(Schedule::builtin(GammaFamily::bridge)).ok());
    EXPECT_TRUE(validate_schedule(Schedule::builtin(GammaFamily::quadratic_bridge)).ok());
}

TEST(ValidateSchedule, AlphaEqualsTFails) {
    ScheduleFunctions f;
    f.alpha = [](double t) { return t; };
    f.dalpha = [](double) { return 1.0; };
    f.beta = [](double t) { return t; };
    f.dbeta = [](double) { return 1.0; };
    f.gamma = [](double) { return 0.0; };
    f.dgamma = [](double) { return 0.0; };
    auto rep = validate_schedule(Schedule::custom("alpha=t", f));
    EXPECT_FALSE(rep.ok());
    ASSERT_NE(rep.find("alpha(0)=1"), nullptr);
    EXPECT_FALSE(rep.find("alpha(0)=1")->passed);
}

TEST(ValidateSchedule, QuadraticViolatesGammaAtOne) {
    auto rep = validate_schedule(Schedule::builtin(GammaFamily::quadratic));
    ASSERT_NE(rep.find("gamma(1)=0"), nullptr);
    EXPECT_FALSE(rep.find("gamma(1)=0")->passed);
}

TEST(ValidateSchedule, WrongDerivativeDetected) {
    ScheduleFunctions f;
    f.alpha = [](double t) { return 1.0 - t; };
    f.dalpha = [](double) { return -1.0; };
    f.beta = [](double t) { return t; };
    f.dbeta = [](double) { return 2.0; };
    f.gamma = [](double) { return 0.0; };
    f.dgamma = [](double) { return 0.0; };
    EXPECT_FALSE(validate_schedule(Schedule::custom("bad-dbeta", f)).ok());
}

TEST(NoiseVariance, Examples) {
    EXPECT_NEAR(noise_variance(Schedule::builtin(GammaFamily::sqrt_bridge, ZetaFamily::constant, 0.008)), 0.016, 1e-12);
    EXPECT_EQ(noise_variance(sqrt_s()), 0.0);
    ScheduleFunctions f;
    f.alpha = [](double t) { return 1.0 - t; };
    f.dalpha = [](double) { return -1.0; };
    f.beta = [](double t) { return t; };
    f.dbeta = [](double) { return 1.0; };
    f.gamma = [](double) { return 0.0; };
    f.dgamma = [](double) { return 0.0; };
    f.zeta = [](double t) { return t; };
    EXPECT_NEAR(noise_variance(Schedule::custom("zeta=t", f)), 1.0, 1e-12);
}

TEST(NoiseVariance, NonFiniteThrows) {
    ScheduleFunctions f;
    f.alpha = [](double t) { return 1.0 - t; };
    f.dalpha = [](double) { return -1.0; };
    f.beta = [](double t) { return t; };
    f.dbeta = [](double) { return 1.0; };
    f.gamma = [](double) { return 0.0; };
    f.dgamma = [](double) { return 0.0; };
    f.zeta = [](double t) { return 1.0 / (t - 0.5); };
    EXPECT_THROW(noise_variance(Schedule::custom("bad-zeta", f)), NumericError);
}

TEST(RegimeLimit, ThreeExemplars) {
    auto a = regime_limit(sqrt_s());
    EXPECT_EQ(a.regime, Regime::vanishes);
    EXPECT_NEAR(a.slope, 0.5, 0.01);
    auto b = regime_limit(Schedule::builtin(GammaFamily::bridge));
    EXPECT_EQ(b.regime, Regime::finite);
    EXPECT_NEAR(b.slope, 0.0, 0.01);
    auto c = regime_limit(Schedule::builtin(GammaFamily::quadratic));
    EXPECT_EQ(c.regime, Regime::diverges);
    EXPECT_NEAR(c.slope, -1.0, 0.01);
}

TEST(RegimeLimit, BridgeSquaredIsFinite) {
    EXPECT_EQ(regime_limit(Schedule::builtin(GammaFamily::bridge_squared)).regime, Regime::finite);
}

TEST(RegimeLimit, QuadraticBridgeDiverges) {
    EXPECT_EQ(regime_limit(Schedule::builtin(GammaFamily::quadratic_bridge)).regime, Regime::diverges);
}

TEST(RegimeLimit, ZeroGammaNotApplicable) { EXPECT_THROW(regime_limit(linear()), NotApplicableError); }

TEST(ScheduleNames, RoundTrip) {
    for (auto g : Schedule::all_gamma_families()) {
        auto s = Schedule::from_name(Schedule::gamma_family_name(g));
        EXPECT_EQ(s.kind(), Schedule::gamma_family_name(g));
    }
    EXPECT_THROW(Schedule::from_name("nope"), ValidationError);
}
