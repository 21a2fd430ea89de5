#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "finterp/dataset.hpp"
#include "finterp/errors.hpp"
#include "finterp/schedule.hpp"

// Exact finite-sample fields of a stochastic interpolant whose data end is the empirical measure
// on the anchors and whose noise end is N(0, I_d):
//
//   b*(z,t)    = sum_i w_i (C1 z - C2 X_i) / C3
//   s*(z,t)    = (alpha / B) b*(z,t) - (alpha' / B) z
//   rho_t(z)   = (1/n) sum_i N(z; alpha X_i, C3 I)
//
// with w = softmax_i(-||z - alpha X_i||^2 / (2 C3)). All weights are formed in the log domain.

namespace finterp {

struct Weights {
    std::vector<double> log_w;
    std::vector<double> w;
    std::size_t argmax = 0;  // smallest index attaining the maximum weight
};

struct FieldValue {
    std::vector<double> value;
    Weights weights;
    double t = 0.0;
    std::vector<double> z;
};

namespace detail {

inline void check_point(std::span<const double> z, std::size_t d, const char* what) {
    if (z.size() != d)
        throw DomainError(std::string(what) + ": point has dimension " + std::to_string(z.size()) + ", expected " +
                          std::to_string(d));
    for (double x : z)
        if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite point");
}

inline void check_open_left(double t, const char* what) {
    if (!(t <= 1.0) || std::isnan(t)) throw DomainError(std::string(what) + ": time outside (0,1]");
    if (!(t > 0.0)) throw SingularTimeError(std::string(what) + ": fields are singular at t <= 0");
}

/// Turns logits into log-softmax in place. Returns logsumexp of the input and the argmax.
inline std::pair<double, std::size_t> log_softmax(std::span<double> logits) {
    std::size_t arg = 0;
    double top = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > top) {
            top = logits[i];
            arg = i;
        }
    }
    double acc = 0.0;
    for (double l : logits) acc += std::exp(l - top);
    const double lse = top + std::log(acc);
    for (double& l : logits) l -= lse;
    return {lse, arg};
}

inline double squared_distance_scaled(std::span<const double> z, std::span<const double> x, double a) {
    double s = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double diff = z[k] - a * x[k];
        s += diff * diff;
    }
    return s;
}

/// Reusable scratch for field evaluation at many (z, t). Not thread-safe; give each worker its own.
class FieldWorkspace {
public:
    FieldWorkspace(const TrainingSet& anchors, const Schedule& schedule)
        : anchors_(&anchors), schedule_(&schedule), logw_(anchors.size()), mean_(anchors.dim()) {}

    const TrainingSet& anchors() const noexcept { return *anchors_; }
    const Schedule& schedule() const noexcept { return *schedule_; }

    /// Computes log-weights and the weighted anchor mean sum_i w_i X_i. Returns logsumexp of the
    /// logits -||z - alpha X_i||^2 / (2 C3).
    double posterior(std::span<const double> z, double alpha, double c3) {
        const auto& X = *anchors_;
        const double inv = -0.5 / c3;
        for (std::size_t i = 0; i < X.size(); ++i) logw_[i] = inv * squared_distance_scaled(z, X.point(i), alpha);
        const auto [lse, arg] = log_softmax(logw_);
        argmax_ = arg;
        std::fill(mean_.begin(), mean_.end(), 0.0);
        for (std::size_t i = 0; i < X.size(); ++i) {
            const double w = std::exp(logw_[i]);
            if (w == 0.0) continue;
            auto x = X.point(i);
            for (std::size_t k = 0; k < mean_.size(); ++k) mean_[k] += w * x[k];
        }
        return lse;
    }

    /// b*(z,t) written as C1 (z - alpha m) / C3 + alpha' m, which equals sum_i w_i (C1 z - C2 X_i) / C3
    /// because C1 alpha - C2 = C3 alpha' and the weights sum to one.
    void velocity(std::span<const double> z, const ScheduleValues& v, const Coeffs& c, std::span<double> out) {
        posterior(z, v.alpha, c.c3);
        velocity_from_posterior(z, v, c, out);
    }

    void velocity_from_posterior(std::span<const double> z, const ScheduleValues& v, const Coeffs& c,
                                 std::span<double> out) const {
        const double r = c.c1 / c.c3;
        for (std::size_t k = 0; k < z.size(); ++k) out[k] = r * (z[k] - v.alpha * mean_[k]) + v.dalpha * mean_[k];
    }

    std::span<const double> log_weights() const noexcept { return logw_; }
    std::span<const double> mean() const noexcept { return mean_; }
    std::size_t argmax() const noexcept { return argmax_; }

    Weights weights() const {
        Weights w;
        w.log_w = logw_;
        w.w.resize(logw_.size());
        std::transform(logw_.begin(), logw_.end(), w.w.begin(), [](double l) { return std::exp(l); });
        w.argmax = argmax_;
        return w;
    }

private:
    const TrainingSet* anchors_;
    const Schedule* schedule_;
    std::vector<double> logw_;
    std::vector<double> mean_;
    std::size_t argmax_ = 0;
};

/// s* from b* via the score identity; `b_sign` = -1 flips the sign of B (fault injection only).
inline void score_from_velocity(std::span<const double> b, std::span<const double> z, const ScheduleValues& v,
                                double B, std::span<double> out) {
    const double ra = v.alpha / B, rd = v.dalpha / B;
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = ra * b[k] - rd * z[k];
}

constexpr double singular_b_threshold = 1e-14;

}  // namespace detail

/// Normalised anchor weights at (z, t).
inline Weights log_weights(std::span<const double> z, double t, const TrainingSet& X, const Schedule& s) {
    detail::check_open_left(t, "log_weights");
    detail::check_point(z, X.dim(), "log_weights");
    const auto v = s.values(t);
    const auto c = detail::coeffs_from(v);
    if (!(c.c3 > 0.0)) throw SingularTimeError("log_weights: C3(t) = 0");
    detail::FieldWorkspace ws(X, s);
    ws.posterior(z, v.alpha, c.c3);
    return ws.weights();
}

/// Optimal velocity b*(z,t).
inline FieldValue velocity(std::span<const double> z, double t, const TrainingSet& X, const Schedule& s) {
    detail::check_open_left(t, "velocity");
    detail::check_point(z, X.dim(), "velocity");
    const auto v = s.values(t);
    const auto c = detail::coeffs_from(v);
    if (!(c.c3 > 0.0)) throw SingularTimeError("velocity: C3(t) = 0");
    detail::FieldWorkspace ws(X, s);
    FieldValue out;
    out.value.resize(z.size());
    ws.velocity(z, v, c, out.value);
    out.weights = ws.weights();
    out.t = t;
    out.z.assign(z.begin(), z.end());
    return out;
}

/// Optimal score s*(z,t) = (alpha/B) b* - (alpha'/B) z.
inline FieldValue score(std::span<const double> z, double t, const TrainingSet& X, const Schedule& s) {
    detail::check_open_left(t, "score");
    detail::check_point(z, X.dim(), "score");
    const auto v = s.values(t);
    const auto c = detail::coeffs_from(v);
    if (!(c.c3 > 0.0)) throw SingularTimeError("score: C3(t) = 0");
    if (std::abs(c.b) < detail::singular_b_threshold)
        throw SingularScoreError("score: |B(t)| < 1e-14 at t=" + std::to_string(t));
    detail::FieldWorkspace ws(X, s);
    std::vector<double> b(z.size());
    ws.velocity(z, v, c, b);
    FieldValue out;
    out.value.resize(z.size());
    detail::score_from_velocity(b, z, v, c.b, out.value);
    out.weights = ws.weights();
    out.t = t;
    out.z.assign(z.begin(), z.end());
    return out;
}

/// log rho_t(z) of the Gaussian mixture (1/n) sum_i N(alpha X_i, C3 I).
inline double log_density(std::span<const double> z, double t, const TrainingSet& X, const Schedule& s) {
    detail::check_open_left(t, "log_density");
    detail::check_point(z, X.dim(), "log_density");
    const auto v = s.values(t);
    const auto c = detail::coeffs_from(v);
    if (!(c.c3 > 0.0)) throw SingularTimeError("log_density: C3(t) = 0");
    detail::FieldWorkspace ws(X, s);
    const double lse = ws.posterior(z, v.alpha, c.c3);
    const double d = static_cast<double>(X.dim());
    return lse - std::log(static_cast<double>(X.size())) - 0.5 * d * std::log(2.0 * std::numbers::pi * c.c3);
}

namespace detail {

/// Scratch for the two-sided field: logits over all n*m anchor pairs.
class PairWorkspace {
public:
    PairWorkspace(const TrainingSet& X, const SecondSet& Y)
        : X_(&X), Y_(&Y), logw_(X.size() * Y.size()), mean_x_(X.dim()), mean_y_(X.dim()) {
        if (X.dim() != Y.dim()) throw DomainError("two-sided field: anchor sets differ in dimension");
    }

    /// b2*(z,t) = (gamma'/gamma) (z - alpha mX - beta mY) + alpha' mX + beta' mY, where mX and mY are
    /// the pair-weighted means of X_i and Y_j.
    void velocity(std::span<const double> z, const ScheduleValues& v, std::span<double> out) {
        const auto& X = *X_;
        const auto& Y = *Y_;
        const std::size_t d = X.dim(), m = Y.size();
        const double inv = -0.5 / (v.gamma * v.gamma);
        for (std::size_t i = 0; i < X.size(); ++i) {
            auto x = X.point(i);
            for (std::size_t j = 0; j < m; ++j) {
                auto y = Y.point(j);
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = z[k] - v.alpha * x[k] - v.beta * y[k];
                    s += diff * diff;
                }
                logw_[i * m + j] = inv * s;
            }
        }
        argmax_ = log_softmax(logw_).second;
        std::fill(mean_x_.begin(), mean_x_.end(), 0.0);
        std::fill(mean_y_.begin(), mean_y_.end(), 0.0);
        for (std::size_t i = 0; i < X.size(); ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double w = std::exp(logw_[i * m + j]);
                if (w == 0.0) continue;
                auto x = X.point(i);
                auto y = Y.point(j);
                for (std::size_t k = 0; k < d; ++k) {
                    mean_x_[k] += w * x[k];
                    mean_y_[k] += w * y[k];
                }
            }
        }
        const double r = v.dgamma / v.gamma;
        for (std::size_t k = 0; k < d; ++k)
            out[k] = r * (z[k] - v.alpha * mean_x_[k] - v.beta * mean_y_[k]) + v.dalpha * mean_x_[k] +
                     v.dbeta * mean_y_[k];
    }

    Weights weights() const {
        Weights w;
        w.log_w = logw_;
        w.w.resize(logw_.size());
        std::transform(logw_.begin(), logw_.end(), w.w.begin(), [](double l) { return std::exp(l); });
        w.argmax = argmax_;
        return w;
    }

private:
    const TrainingSet* X_;
    const SecondSet* Y_;
    std::vector<double> logw_;
    std::vector<double> mean_x_, mean_y_;
    std::size_t argmax_ = 0;
};

inline void check_two_sided_time(const Schedule& s, double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError(std::string(what) + ": time outside (0,1)");
    if (t == 0.0 || t == 1.0) throw SingularTimeError(std::string(what) + ": singular at t in {0,1}");
    if (s.gamma_is_zero()) throw NotApplicableError(std::string(what) + ": requires gamma > 0 on (0,1)");
}

}  // namespace detail

/// Velocity of the interpolant between two empirical measures, rho_0 on {X_i} and rho_1 on {Y_j}.
/// Weights are indexed i * m + j.
inline FieldValue velocity_two_sided(std::span<const double> z, double t, const TrainingSet& X, const SecondSet& Y,
                                     const Schedule& s) {
    detail::check_two_sided_time(s, t, "velocity_two_sided");
    detail::check_point(z, X.dim(), "velocity_two_sided");
    const auto v = s.values(t);
    if (!(v.gamma > 0.0)) throw NotApplicableError("velocity_two_sided: gamma(t) = 0");
    detail::PairWorkspace ws(X, Y);
    FieldValue out;
    out.value.resize(z.size());
    ws.velocity(z, v, out.value);
    out.weights = ws.weights();
    out.t = t;
    out.z.assign(z.begin(), z.end());
    return out;
}

}  // namespace finterp
