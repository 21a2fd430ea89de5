#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "finterp/closed_form.hpp"
#include "finterp/dataset.hpp"
#include "finterp/errors.hpp"
#include "finterp/parallel.hpp"
#include "finterp/rng.hpp"
#include "finterp/sampler.hpp"
#include "finterp/schedule.hpp"

namespace finterp {

/// Families of injected velocity error eps = b_hat - b*.
///
///   bounded          ||eps||   = sqrt(lambda)
///   gamma_scaled     ||eps||   = sqrt(lambda) / gamma(t)
///   density_inverse  ||eps||   = lambda / sum_j exp(-||z - alpha X_j||^2 / (2 C3))
enum class ErrorFamily { bounded, gamma_scaled, density_inverse };

constexpr std::string_view error_family_name(ErrorFamily f) {
    switch (f) {
        case ErrorFamily::bounded: return "bounded";
        case ErrorFamily::gamma_scaled: return "gamma_scaled";
        case ErrorFamily::density_inverse: return "density_inverse";
    }
    return "?";
}

inline ErrorFamily error_family_from_name(std::string_view name) {
    for (auto f : {ErrorFamily::bounded, ErrorFamily::gamma_scaled, ErrorFamily::density_inverse})
        if (error_family_name(f) == name) return f;
    throw ValidationError("unknown error family '" + std::string(name) + "'");
}

/// Same direction at every evaluation.
struct FixedDirection {
    std::vector<double> unit;
};

/// Fresh uniform direction on the sphere per (seed, sample, step).
struct RandomPerStep {
    std::uint64_t seed = 0;
};

using DirectionPolicy = std::variant<FixedDirection, RandomPerStep>;

struct ErrorModel {
    ErrorFamily family = ErrorFamily::bounded;
    double lambda = 0.0;
    DirectionPolicy direction = RandomPerStep{};
    double clip = 1e12;

    static ErrorModel fixed(ErrorFamily family, double lambda, std::vector<double> direction, double clip = 1e12) {
        double n2 = 0.0;
        for (double x : direction) n2 += x * x;
        if (!(n2 > 0.0)) throw ValidationError("error model: fixed direction must be non-zero");
        const double inv = 1.0 / std::sqrt(n2);
        for (double& x : direction) x *= inv;
        ErrorModel m{family, lambda, FixedDirection{std::move(direction)}, clip};
        m.validate();
        return m;
    }

    static ErrorModel random(ErrorFamily family, double lambda, std::uint64_t seed, double clip = 1e12) {
        ErrorModel m{family, lambda, RandomPerStep{seed}, clip};
        m.validate();
        return m;
    }

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("error model: lambda must be finite and >= 0");
        if (!(clip > 0.0)) throw ValidationError("error model: clip must be > 0");
        if (const auto* f = std::get_if<FixedDirection>(&direction)) {
            double n2 = 0.0;
            for (double x : f->unit) n2 += x * x;
            if (f->unit.empty() || std::abs(n2 - 1.0) > 1e-12)
                throw ValidationError("error model: fixed direction must be a unit vector");
        }
    }

    std::string id() const {
        std::string out = std::string(error_family_name(family)) + "(lambda=" + format_real(lambda);
        if (const auto* f = std::get_if<FixedDirection>(&direction)) {
            out += ",fixed:";
            for (std::size_t k = 0; k < f->unit.size(); ++k) out += (k ? ";" : "") + format_real(f->unit[k]);
        } else {
            out += ",random:" + std::to_string(std::get<RandomPerStep>(direction).seed);
        }
        return out + ")";
    }
};

struct EpsilonValue {
    std::vector<double> vector;
    double norm = 0.0;
    bool clipped = false;
};

namespace detail {

/// log ||eps|| before clipping. For density_inverse this is log(lambda) - logsumexp(logits).
/// With `zero_where_undefined`, a gamma_scaled error at gamma(t) = 0 is taken as zero instead of an error.
inline double log_error_magnitude(const ErrorModel& m, std::span<const double> z, const ScheduleValues& v,
                                  const Coeffs& c, const TrainingSet& X, bool zero_where_undefined = false) {
    if (m.lambda == 0.0) return -INFINITY;
    switch (m.family) {
        case ErrorFamily::bounded:
            return 0.5 * std::log(m.lambda);
        case ErrorFamily::gamma_scaled:
            if (!(v.gamma > 0.0)) {
                if (zero_where_undefined) return -INFINITY;
                throw DomainError("gamma_scaled error: gamma(t) = 0");
            }
            return 0.5 * std::log(m.lambda) - std::log(v.gamma);
        case ErrorFamily::density_inverse: {
            const double inv = -0.5 / c.c3;
            double top = -INFINITY;
            for (std::size_t i = 0; i < X.size(); ++i)
                top = std::max(top, inv * squared_distance_scaled(z, X.point(i), v.alpha));
            double acc = 0.0;
            for (std::size_t i = 0; i < X.size(); ++i)
                acc += std::exp(inv * squared_distance_scaled(z, X.point(i), v.alpha) - top);
            return std::log(m.lambda) - (top + std::log(acc));
        }
    }
    return -INFINITY;
}

/// Writes eps into `out`; `rng_key` selects the random direction for this (sample, step).
inline StepInfo error_into(const ErrorModel& m, std::span<const double> z, const ScheduleValues& v, const Coeffs& c,
                           const TrainingSet& X, std::size_t sample_id, std::size_t step, std::span<double> out,
                           bool zero_where_undefined = false) {
    const double log_mag = log_error_magnitude(m, z, v, c, X, zero_where_undefined);
    StepInfo info;
    double mag = 0.0;
    if (log_mag > std::log(m.clip)) {
        mag = m.clip;
        info.clipped = true;
    } else {
        mag = std::exp(log_mag);
    }
    info.eps_norm = mag;
    if (const auto* f = std::get_if<FixedDirection>(&m.direction)) {
        if (f->unit.size() != out.size()) throw DomainError("error model: fixed direction has the wrong dimension");
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = mag * f->unit[k];
    } else {
        const auto seed = std::get<RandomPerStep>(m.direction).seed;
        RandomStream rng(substream_key(substream_key(seed, sample_id), step));
        rng.unit_vector(out);
        for (double& x : out) x *= mag;
    }
    return info;
}

}  // namespace detail

/// eps(z, t) for evaluation number `step_index` of trajectory `sample_id`.
inline EpsilonValue epsilon(const ErrorModel& m, std::span<const double> z, double t, const TrainingSet& X,
                            const Schedule& s, std::size_t step_index, std::size_t sample_id = 0) {
    m.validate();
    detail::check_open_left(t, "epsilon");
    detail::check_point(z, X.dim(), "epsilon");
    const auto v = s.values(t);
    const auto c = detail::coeffs_from(v);
    EpsilonValue out;
    out.vector.resize(z.size());
    const auto info = detail::error_into(m, z, v, c, X, sample_id, step_index, out.vector);
    out.norm = info.eps_norm;
    out.clipped = info.clipped;
    return out;
}

/// Deterministic Euler with b_hat = b* + eps:  Z_{k+1} = Z_k - (b* + eps)(Z_k, t_k) h.
/// A gamma_scaled error is zero at grid points where gamma vanishes (t = 1 for bridge schedules).
inline Trajectory sample_with_error(const SamplerConfig& cfg, const ErrorModel& m, const TrainingSet& X,
                                    const Schedule& s, const std::optional<std::vector<double>>& start = std::nullopt,
                                    std::size_t sample_id = 0) {
    cfg.validate();
    m.validate();
    const auto grid = cfg.grid();
    detail::check_grid_coeffs(s, grid, false);
    if (m.family == ErrorFamily::gamma_scaled && s.gamma_is_zero())
        throw DomainError("sample_with_error: gamma_scaled error needs gamma > 0");
    const std::uint64_t key = substream_key(cfg.master_seed, sample_id);
    RandomStream rng(key);
    auto z0 = detail::initial_state(start, X.dim(), rng);

    detail::FieldWorkspace ws(X, s);
    std::vector<double> b(X.dim()), eps(X.dim());
    const double h = cfg.step_size();
    auto tr = detail::integrate(grid, std::move(z0), detail::divergence_radius(X.max_norm()), cfg.record_trajectory,
                                true, [&](std::span<double> z, std::size_t k) {
                                    const auto v = s.values(grid[k]);
                                    const auto c = detail::coeffs_from(v);
                                    ws.velocity(z, v, c, b);
                                    const auto info = detail::error_into(m, z, v, c, X, sample_id, k, eps, true);
                                    for (std::size_t j = 0; j < z.size(); ++j) z[j] -= (b[j] + eps[j]) * h;
                                    return info;
                                });
    tr.sample_id = sample_id;
    tr.seed = key;
    tr.provenance = {s.id(), m.id(), std::string(sampler_mode_name(SamplerMode::deterministic))};
    return tr;
}

inline std::vector<Trajectory> sample_batch_with_error(const SamplerConfig& cfg, const ErrorModel& m,
                                                       const TrainingSet& X, const Schedule& s, std::size_t count,
                                                       unsigned threads = 0) {
    if (count == 0) throw ValidationError("sample_batch_with_error: count must be >= 1");
    std::vector<Trajectory> out(count);
    parallel_for(count, threads, [&](std::size_t k) { out[k] = sample_with_error(cfg, m, X, s, std::nullopt, k); });
    return out;
}

struct RegimePrediction {
    Regime regime;
    double slope;
    std::string_view outcome;  // "converges" | "vicinity" | "diverges"
};

constexpr std::string_view regime_outcome(Regime r) {
    switch (r) {
        case Regime::vanishes: return "converges";
        case Regime::finite: return "vicinity";
        case Regime::diverges: return "diverges";
    }
    return "?";
}

/// Predicted endpoint behaviour of a gamma-scaled error under schedule s.
inline RegimePrediction regime_report(const ErrorModel& m, const Schedule& s) {
    if (m.family != ErrorFamily::gamma_scaled)
        throw NotApplicableError("regime_report: only defined for the gamma_scaled error family");
    const auto est = regime_limit(s);
    return {est.regime, est.slope, regime_outcome(est.regime)};
}

}  // namespace finterp
