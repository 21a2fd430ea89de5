#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "finterp/analysis.hpp"
#include "finterp/error_model.hpp"
#include "finterp/rng.hpp"

namespace expcli {

using namespace finterp;

namespace {

double rel_err(double a, double b, double floor = 1.0) { return std::abs(a - b) / std::max(std::abs(b), floor); }

CheckResult make(const char* suite, std::string name, double measured, double tol, std::string detail = {}) {
    return {suite, std::move(name), measured, tol, measured <= tol, std::move(detail)};
}

std::vector<double> score_under(Fault fault, std::span<const double> z, double t, const TrainingSet& X, const Schedule& s) {
    if (fault == Fault::none) return score(z, t, X, s).value;
    const auto v = s.values(t);
    const auto c = coeffs(s, t);
    const auto b = velocity(z, t, X, s).value;
    std::vector<double> out(z.size());
    detail::score_from_velocity(b, z, v, -c.b, out);
    return out;
}

void oracle_checks(std::vector<CheckResult>& out, Fault fault) {
    {
        const auto X = uniform_toy(5, 2, 7);
        const auto s = Schedule::builtin(GammaFamily::sqrt_bridge);
        RandomStream r(101);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            std::vector<double> z{-2.0 + 5.0 * r.uniform(), -2.0 + 5.0 * r.uniform()};
            const double t = 0.05 + 0.9 * r.uniform();
            const auto fd = fd_score_oracle(z, t, X, s);
            const auto cf = score_under(fault, z, t, X, s);
            for (std::size_t j = 0; j < z.size(); ++j) worst = std::max(worst, rel_err(cf[j], fd[j]));
        }
        out.push_back(make("oracles", "score vs finite-difference gradient (100 pts)", worst, 1e-6));
    }
    for (auto g : {GammaFamily::zero, GammaFamily::sqrt_bridge}) {
        const auto X = uniform_toy(4, 1, 3);
        const auto s = Schedule::builtin(g);
        RandomStream r(202);
        double worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            const double z = -2.0 + 5.0 * r.uniform(), t = 0.05 + 0.9 * r.uniform();
            const std::vector<double> zv{z};
            worst = std::max(worst, rel_err(velocity(zv, t, X, s).value[0], mc_velocity_oracle(z, t, X, s), 1e-12));
        }
        out.push_back(make("oracles", "velocity vs Gauss-Hermite quadrature, " + s.kind() + " (50 pts)", worst, 1e-3));
    }
}

void invariant_checks(std::vector<CheckResult>& out, unsigned threads) {
    const auto X = uniform_toy(5, 2, 7);
    const auto sq = Schedule::builtin(GammaFamily::sqrt_bridge);
    {
        RandomStream r(303);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            std::vector<double> z{-2.0 + 5.0 * r.uniform(), -2.0 + 5.0 * r.uniform()};
            const double t = 0.05 + 0.9 * r.uniform();
            const auto v = sq.values(t);
            const auto c = coeffs(sq, t);
            const auto w = log_weights(z, t, X, sq);
            const auto sc = score(z, t, X, sq).value;
            for (std::size_t j = 0; j < 2; ++j) {
                double ref = 0.0;
                for (std::size_t i = 0; i < X.size(); ++i) ref += w.w[i] * (v.alpha * X.point(i)[j] - z[j]) / c.c3;
                worst = std::max(worst, rel_err(sc[j], ref));
            }
        }
        out.push_back(make("invariants", "score equals mixture gradient", worst, 1e-10));
    }
    {
        double worst = 0.0;
        for (auto g : Schedule::all_gamma_families())
            for (double t : {0.01, 0.2, 0.5, 0.77, 0.99}) {
                const auto c = coeffs(Schedule::builtin(g), t);
                worst = std::max(worst, std::abs(c.b + c.c2));
            }
        out.push_back(make("invariants", "B(t) = -C2(t) for all built-in schedules", worst, 1e-13));
    }
    {
        double worst = 0.0;
        const auto lin = Schedule::builtin(GammaFamily::zero);
        for (double t : {0.01, 0.3, 0.5, 0.9, 1.0}) {
            const auto c = coeffs(lin, t);
            worst = std::max({worst, std::abs(c.c1 - t), std::abs(c.c2 - t), std::abs(c.c3 - t * t), std::abs(c.b + t)});
        }
        out.push_back(make("invariants", "linear schedule coefficients (t, t, t^2, -t)", worst, 1e-15));
    }
    {
        RandomStream r(404);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            std::vector<double> z{-5.0 + 10.0 * r.uniform(), -5.0 + 10.0 * r.uniform()};
            const double t = 1e-4 + r.uniform() * (1.0 - 1e-4);
            const auto w = log_weights(z, t, X, sq);
            double sum = 0.0;
            for (double x : w.w) sum += x;
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        out.push_back(make("invariants", "softmax weights sum to one", worst, 1e-12));
    }
    {
        const std::vector<double> z{X.point(2)[0] + 0.05, X.point(2)[1] - 0.03};
        double prev = 0.0, drops = 0.0, last = 0.0;
        for (double t : {0.1, 0.01, 0.001}) {
            const auto w = log_weights(z, t, X, sq);
            const double mx = *std::max_element(w.w.begin(), w.w.end());
            drops += std::max(0.0, prev - mx);
            prev = last = mx;
        }
        out.push_back(make("invariants", "softmax sharpens as t decreases", drops + std::max(0.0, (1.0 - 1e-9) - last), 0.0));
    }
    {
        SamplerConfig c;
        c.steps = 500;
        c.t_end = 1e-3;
        c.record_trajectory = true;
        const auto a = sample_deterministic(c, X, sq, std::nullopt, 4);
        const auto b = sample_stochastic(c, X, sq, std::nullopt, 4);
        double worst = a.states.size() == b.states.size() ? 0.0 : INFINITY;
        for (std::size_t i = 0; i < std::min(a.states.size(), b.states.size()); ++i)
            worst = std::max(worst, std::abs(a.states[i] - b.states[i]));
        out.push_back(make("invariants", "zeta = 0 stochastic run equals deterministic run", worst, 1e-15));
    }
    {
        SamplerConfig c;
        c.steps = 500;
        c.t_end = 1e-3;
        c.master_seed = 17;
        const auto a = sample_batch(c, X, sq, 12, 1);
        const auto b = sample_batch(c, X, sq, 12, std::max(2u, threads));
        double worst = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t j = 0; j < 2; ++j) worst = std::max(worst, std::abs(a[k].endpoint[j] - b[k].endpoint[j]));
        out.push_back(make("invariants", "batch results independent of thread count", worst, 0.0));
    }
    {
        const auto one = TrainingSet::from_points({{0.0}});
        double worst = 0.0;
        for (std::size_t n : {10, 1000}) {
            SamplerConfig c;
            c.steps = n;
            c.t_end = 1e-3;
            worst = std::max(worst, std::abs(sample_deterministic(c, one, Schedule::builtin(GammaFamily::zero),
                                                                  std::vector<double>{1.0})
                                                 .endpoint[0] -
                                             1e-3));
        }
        out.push_back(make("invariants", "Euler exact on the single-anchor linear flow", worst, 1e-15));
    }
    {
        const double v = noise_variance(Schedule::builtin(GammaFamily::sqrt_bridge, ZetaFamily::constant, 0.008));
        out.push_back(make("invariants", "noise variance of constant zeta 0.008", std::abs(v - 0.016), 1e-12));
    }
    {
        const bool ok = regime_limit(sq).regime == Regime::vanishes &&
                        regime_limit(Schedule::builtin(GammaFamily::bridge)).regime == Regime::finite &&
                        regime_limit(Schedule::builtin(GammaFamily::quadratic)).regime == Regime::diverges;
        out.push_back(make("invariants", "regime classes of the three exemplar schedules", ok ? 0.0 : 1.0, 0.0));
    }
}

}  // namespace

std::vector<CheckResult> run_verify(Suite suite, Fault fault, unsigned threads) {
    std::vector<CheckResult> out;
    if (suite != Suite::invariants) oracle_checks(out, fault);
    if (suite != Suite::oracles) invariant_checks(out, threads);
    return out;
}

bool print_checks(std::ostream& os, const std::vector<CheckResult>& checks) {
    bool all = true;
    char line[256];
    std::snprintf(line, sizeof line, "%-11s %-58s %12s %12s  %s\n", "suite", "check", "measured", "tolerance", "status");
    os << line;
    for (const auto& c : checks) {
        std::snprintf(line, sizeof line, "%-11s %-58s %12.3e %12.3e  %s\n", c.suite.c_str(), c.name.c_str(), c.measured,
                      c.tolerance, c.passed ? "PASS" : "FAIL");
        os << line;
        all = all && c.passed;
    }
    os << (all ? "all checks passed\n" : "verification FAILED\n");
    return all;
}

}  // namespace expcli
