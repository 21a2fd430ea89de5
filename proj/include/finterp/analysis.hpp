#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "finterp/closed_form.hpp"
#include "finterp/dataset.hpp"
#include "finterp/errors.hpp"
#include "finterp/sampler.hpp"
#include "finterp/schedule.hpp"

namespace finterp {

struct NNResult {
    std::size_t index1 = 0;
    double d1 = 0.0;
    std::optional<std::size_t> index2;  // absent when n = 1
    double d2 = std::numeric_limits<double>::infinity();
    double d1_sq = 0.0;
    double d2_sq = std::numeric_limits<double>::infinity();
};

/// Exact nearest and second-nearest anchors; ties go to the smaller index.
inline NNResult nearest_neighbor(std::span<const double> z, const TrainingSet& X) {
    if (z.size() != X.dim())
        throw DomainError("nearest_neighbor: point has dimension " + std::to_string(z.size()) + ", expected " +
                          std::to_string(X.dim()));
    NNResult r;
    r.d1_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double s = detail::squared_distance_scaled(z, X.point(i), 1.0);
        if (s < r.d1_sq) {
            r.d2_sq = r.d1_sq;
            r.index2 = i == 0 ? std::nullopt : std::optional<std::size_t>(r.index1);
            r.d1_sq = s;
            r.index1 = i;
        } else if (s < r.d2_sq) {
            r.d2_sq = s;
            r.index2 = i;
        }
    }
    r.d1 = std::sqrt(r.d1_sq);
    r.d2 = std::sqrt(r.d2_sq);
    return r;
}

enum class EndpointKind { converged, vicinity, diverged };

constexpr std::string_view endpoint_kind_name(EndpointKind k) {
    switch (k) {
        case EndpointKind::converged: return "CONVERGED";
        case EndpointKind::vicinity: return "VICINITY";
        case EndpointKind::diverged: return "DIVERGED";
    }
    return "?";
}

struct EndpointClass {
    EndpointKind kind = EndpointKind::vicinity;
    std::size_t index = 0;  // nearest anchor; meaningful for CONVERGED
};

struct ClassCounts {
    std::size_t converged = 0, vicinity = 0, diverged = 0;

    std::size_t total() const noexcept { return converged + vicinity + diverged; }
};

inline ClassCounts count_classes(std::span<const EndpointClass> classes) {
    ClassCounts c;
    for (const auto& e : classes) {
        switch (e.kind) {
            case EndpointKind::converged: ++c.converged; break;
            case EndpointKind::vicinity: ++c.vicinity; break;
            case EndpointKind::diverged: ++c.diverged; break;
        }
    }
    return c;
}

struct MemorizationReport {
    std::vector<NNResult> neighbors;
    std::vector<bool> memorized;
    double memorized_fraction = 0.0;
    double threshold = 1.0 / 3.0;
};

/// Flags a sample when ||X_(1) - Z||^2 / ||X_(2) - Z||^2 <= threshold.
inline MemorizationReport memorization_test(std::span<const std::vector<double>> samples, const TrainingSet& X,
                                            double threshold = 1.0 / 3.0) {
    if (X.size() < 2) throw DomainError("memorization_test: needs at least two anchors");
    MemorizationReport rep;
    rep.threshold = threshold;
    rep.neighbors.reserve(samples.size());
    rep.memorized.reserve(samples.size());
    std::size_t hits = 0;
    for (const auto& z : samples) {
        auto nn = nearest_neighbor(z, X);
        // d1^2 / d2^2 <= threshold, including d2 = 0 only when d1 = 0 as well
        const bool flag = nn.d2_sq == 0.0 ? true : nn.d1_sq / nn.d2_sq <= threshold;
        hits += flag ? 1 : 0;
        rep.memorized.push_back(flag);
        rep.neighbors.push_back(nn);
    }
    rep.memorized_fraction = samples.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(samples.size());
    return rep;
}

struct ClassifyOptions {
    double tol_conv = 1e-2;
    std::optional<double> r_div;  // default 10 (1 + max_i ||X_i||)
};

inline double default_divergence_radius(const TrainingSet& X) { return 10.0 * (1.0 + X.max_norm()); }

inline EndpointClass classify_endpoint(std::span<const double> z, bool diverged_flag, const TrainingSet& X,
                                       const ClassifyOptions& opt = {}) {
    const double r_div = opt.r_div.value_or(default_divergence_radius(X));
    bool finite = true;
    for (double x : z) finite = finite && std::isfinite(x);
    if (diverged_flag || !finite || detail::norm(z) > r_div) return {EndpointKind::diverged, 0};
    const auto nn = nearest_neighbor(z, X);
    if (nn.d1 <= opt.tol_conv) return {EndpointKind::converged, nn.index1};
    return {EndpointKind::vicinity, nn.index1};
}

inline std::vector<EndpointClass> classify_endpoints(std::span<const Trajectory> trajectories, const TrainingSet& X,
                                                     const ClassifyOptions& opt = {}) {
    std::vector<EndpointClass> out;
    out.reserve(trajectories.size());
    for (const auto& tr : trajectories) out.push_back(classify_endpoint(tr.endpoint, tr.diverged, X, opt));
    return out;
}

struct ResidualFit {
    double sigma2 = 0.0;               // pooled per-coordinate variance
    std::vector<double> mean;          // per-coordinate residual mean
    std::vector<std::size_t> anchor;   // nearest-anchor assignment of each sample
    std::size_t count = 0;
};

/// Residuals sample - nearest anchor, pooled over samples and coordinates (unbiased, per coordinate).
inline ResidualFit residual_variance(std::span<const std::vector<double>> samples, const TrainingSet& X) {
    if (samples.size() < 30)
        throw InsufficientDataError("residual_variance: " + std::to_string(samples.size()) +
                                    " samples, at least 30 required");
    const std::size_t d = X.dim();
    ResidualFit fit;
    fit.count = samples.size();
    fit.mean.assign(d, 0.0);
    fit.anchor.reserve(samples.size());
    std::vector<double> residuals;
    residuals.reserve(samples.size() * d);
    for (const auto& z : samples) {
        const auto nn = nearest_neighbor(z, X);
        fit.anchor.push_back(nn.index1);
        auto x = X.point(nn.index1);
        for (std::size_t k = 0; k < d; ++k) {
            residuals.push_back(z[k] - x[k]);
            fit.mean[k] += z[k] - x[k];
        }
    }
    const double n = static_cast<double>(samples.size());
    for (double& m : fit.mean) m /= n;
    double pooled = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        double ss = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double e = residuals[i * d + k] - fit.mean[k];
            ss += e * e;
        }
        pooled += ss / (n - 1.0);
    }
    fit.sigma2 = pooled / static_cast<double>(d);
    return fit;
}

/// True iff every recorded step strictly increases the distance to every anchor.
inline bool monotone_divergence(const Trajectory& tr, const TrainingSet& X) {
    if (!tr.recorded()) throw DomainError("monotone_divergence: trajectory was not recorded");
    if (tr.recorded_states() < 2) return false;
    std::vector<double> prev(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) prev[i] = detail::squared_distance_scaled(tr.state(0), X.point(i), 1.0);
    for (std::size_t k = 1; k < tr.recorded_states(); ++k) {
        for (std::size_t i = 0; i < X.size(); ++i) {
            const double cur = detail::squared_distance_scaled(tr.state(k), X.point(i), 1.0);
            if (!(cur > prev[i])) return false;
            prev[i] = cur;
        }
    }
    return true;
}

/// Gauss-Hermite rule for integral of exp(-x^2) f(x); nodes ascending.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> log_weights;
};

/// Newton iteration on orthonormal Hermite functions with the usual asymptotic starting guesses.
inline GaussHermite gauss_hermite(std::size_t n) {
    if (n == 0) throw DomainError("gauss_hermite: need at least one node");
    constexpr double pim4 = 0.7511255444649425;  // pi^(-1/4)
    GaussHermite gh;
    gh.nodes.assign(n, 0.0);
    gh.weights.assign(n, 0.0);
    gh.log_weights.assign(n, 0.0);
    const std::size_t m = (n + 1) / 2;
    const double dn = static_cast<double>(n);
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * dn + 1.0) - 1.85575 * std::pow(2.0 * dn + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(dn, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * gh.nodes[n - 1];
        else if (i == 3)
            z = 1.91 * z - 0.91 * gh.nodes[n - 2];
        else
            z = 2.0 * z - gh.nodes[n - 1 - (i - 2)];
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double dj = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / (dj + 1.0)) * p2 - std::sqrt(dj / (dj + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * dn) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-14 * std::max(1.0, std::abs(z))) break;
        }
        gh.nodes[n - 1 - i] = z;
        gh.nodes[i] = -z;
        const double w = 2.0 / (pp * pp);
        gh.weights[n - 1 - i] = gh.weights[i] = w;
        gh.log_weights[n - 1 - i] = gh.log_weights[i] = std::log(2.0) - 2.0 * std::log(std::abs(pp));
    }
    return gh;
}

/// Quadrature evaluation of E[alpha' Z0 + beta' Z1 + gamma' eta | Z_t = z] in one dimension, with
/// Z0 uniform on the anchors and Z1, eta independent standard normals.
///
/// For each anchor the constraint beta z1 + gamma eta = z - alpha X_i leaves one free variable; the
/// larger-coefficient variable is eliminated and the free one is integrated with Gauss-Hermite nodes
/// centred and scaled at the mode of the integrand. The closed-form velocity is not used.
inline double mc_velocity_oracle(double z, double t, const TrainingSet& X, const Schedule& s, std::size_t nodes = 128) {
    if (X.dim() != 1) throw NotApplicableError("mc_velocity_oracle: only defined for d = 1");
    if (!(t > 0.0 && t < 1.0)) throw DomainError("mc_velocity_oracle: t must lie in (0,1)");
    const auto v = s.values(t);
    if (v.gamma < 0.0) throw DomainError("mc_velocity_oracle: gamma(t) < 0");
    const auto gh = gauss_hermite(nodes);

    const bool eliminate_z1 = v.beta >= v.gamma;  // free variable is eta, else z1
    const double a = eliminate_z1 ? v.beta : v.gamma;   // coefficient of the eliminated variable
    const double c = eliminate_z1 ? v.gamma : v.beta;   // coefficient of the free variable
    if (!(a > 0.0)) throw DomainError("mc_velocity_oracle: beta(t) and gamma(t) both vanish");

    const double precision = 1.0 + (c * c) / (a * a);
    const double scale = std::sqrt(2.0 / precision);
    const double log_norm_2pi = std::log(2.0 * std::numbers::pi);

    std::vector<double> log_terms, values;
    log_terms.reserve(X.size() * nodes);
    values.reserve(X.size() * nodes);
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double xi = X.point(i)[0];
        const double r = z - v.alpha * xi;
        const double mode = (r * c / (a * a)) / precision;
        for (std::size_t k = 0; k < nodes; ++k) {
            const double free = mode + scale * gh.nodes[k];
            const double dep = (r - c * free) / a;
            // log of phi(free) phi(dep) / a, the joint density of (z1, eta) on the constraint line
            const double log_integrand = -0.5 * free * free - 0.5 * dep * dep - std::log(a) - log_norm_2pi;
            log_terms.push_back(gh.log_weights[k] + gh.nodes[k] * gh.nodes[k] + std::log(scale) + log_integrand);
            const double z1 = eliminate_z1 ? dep : free;
            const double eta = eliminate_z1 ? free : dep;
            const double gdeta = v.gamma == 0.0 ? 0.0 : v.dgamma * eta;
            values.push_back(v.dalpha * xi + v.dbeta * z1 + gdeta);
        }
    }
    double top = -INFINITY;
    for (double l : log_terms) top = std::max(top, l);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < log_terms.size(); ++j) {
        const double w = std::exp(log_terms[j] - top);
        num += w * values[j];
        den += w;
    }
    return num / den;
}

/// Central-difference gradient of log_density.
inline std::vector<double> fd_score_oracle(std::span<const double> z, double t, const TrainingSet& X,
                                           const Schedule& s, double step = 1e-5) {
    if (!(step > 0.0)) throw DomainError("fd_score_oracle: step must be positive");
    std::vector<double> zp(z.begin(), z.end()), grad(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double orig = zp[k];
        zp[k] = orig + step;
        const double fp = log_density(zp, t, X, s);
        zp[k] = orig - step;
        const double fm = log_density(zp, t, X, s);
        zp[k] = orig;
        grad[k] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

}  // namespace finterp
