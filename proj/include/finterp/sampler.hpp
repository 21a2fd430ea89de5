#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finterp/closed_form.hpp"
#include "finterp/dataset.hpp"
#include "finterp/errors.hpp"
#include "finterp/parallel.hpp"
#include "finterp/rng.hpp"
#include "finterp/schedule.hpp"

namespace finterp {

enum class SamplerMode { deterministic, stochastic };

constexpr std::string_view sampler_mode_name(SamplerMode m) {
    return m == SamplerMode::deterministic ? "deterministic" : "stochastic";
}

/// Uniform explicit Euler (or Euler-Maruyama) grid from t = 1 down to t_end.
struct SamplerConfig {
    /// Endpoint bias of the exact flow scales like sqrt(max(t_end, h)) for the square-root family,
    /// so the defaults push both well below the 1e-2 coincidence radius.
    static constexpr std::size_t default_steps = 100000;
    static constexpr double default_t_end = 1e-6;

    std::size_t steps = default_steps;
    double t_end = default_t_end;
    SamplerMode mode = SamplerMode::deterministic;
    bool record_trajectory = false;
    std::uint64_t master_seed = 0;

    double step_size() const noexcept { return (1.0 - t_end) / static_cast<double>(steps); }

    void validate() const {
        if (steps < 2) throw ValidationError("sampler: steps must be >= 2");
        if (!(t_end > 0.0 && t_end < 0.5)) throw ValidationError("sampler: t_end must lie in (0, 0.5)");
    }

    /// t_k = 1 - k h for k = 0..N, with t_N pinned to t_end.
    std::vector<double> grid() const {
        std::vector<double> t(steps + 1);
        const double h = step_size();
        for (std::size_t k = 0; k <= steps; ++k) t[k] = 1.0 - static_cast<double>(k) * h;
        t[steps] = t_end;
        return t;
    }
};

struct Provenance {
    std::string schedule_id;
    std::string error_model_id;  // empty when no error model is active
    std::string mode;
};

/// One generated path. States are stored row-major, one row per recorded time.
struct Trajectory {
    std::size_t sample_id = 0;
    std::uint64_t seed = 0;  // key of the private random substream
    std::size_t dim = 0;
    std::vector<double> start;
    std::vector<double> endpoint;
    double end_time = 0.0;
    bool diverged = false;
    std::size_t steps_taken = 0;

    // Filled only when record_trajectory is set.
    std::vector<double> times;
    std::vector<double> states;
    std::vector<double> eps_norms;      // per step, error-model runs only
    std::vector<std::uint8_t> clipped;  // per step, error-model runs only

    Provenance provenance;

    bool recorded() const noexcept { return !times.empty(); }
    std::size_t recorded_states() const noexcept { return times.size(); }
    std::span<const double> state(std::size_t k) const noexcept { return {states.data() + k * dim, dim}; }
};

/// Per-step diagnostics returned by an integrator step.
struct StepInfo {
    double eps_norm = 0.0;
    bool clipped = false;
};

namespace detail {

/// ||Z|| beyond which integration stops and flags divergence.
inline double divergence_radius(double anchor_norm) { return 1e6 * (1.0 + anchor_norm); }

inline double norm(std::span<const double> z) {
    double s = 0.0;
    for (double x : z) s += x * x;
    return std::sqrt(s);
}

/// Runs `step(z, k)` for k = 0..grid.size()-2, which advances z from grid[k] to grid[k+1] in place.
/// Stops early and flags divergence on a non-finite state or ||z|| > radius.
template <class Step>
Trajectory integrate(const std::vector<double>& grid, std::vector<double> z, double radius, bool record,
                     bool record_eps, Step&& step) {
    Trajectory tr;
    tr.dim = z.size();
    tr.start = z;
    const std::size_t steps = grid.size() - 1;
    if (record) {
        tr.times.reserve(grid.size());
        tr.states.reserve(grid.size() * z.size());
        tr.times.push_back(grid[0]);
        tr.states.insert(tr.states.end(), z.begin(), z.end());
        if (record_eps) {
            tr.eps_norms.reserve(steps);
            tr.clipped.reserve(steps);
        }
    }
    std::vector<double> prev = z;
    tr.end_time = grid[0];
    for (std::size_t k = 0; k < steps; ++k) {
        prev = z;
        const StepInfo info = step(std::span<double>(z), k);
        if (record && record_eps) {
            tr.eps_norms.push_back(info.eps_norm);
            tr.clipped.push_back(info.clipped ? 1 : 0);
        }
        bool finite = true;
        for (double x : z) finite = finite && std::isfinite(x);
        if (!finite) {
            tr.diverged = true;
            tr.steps_taken = k;
            z = prev;  // keep the last finite state as the endpoint
            break;
        }
        tr.steps_taken = k + 1;
        tr.end_time = grid[k + 1];
        if (record) {
            tr.times.push_back(grid[k + 1]);
            tr.states.insert(tr.states.end(), z.begin(), z.end());
        }
        if (norm(z) > radius) {
            tr.diverged = true;
            break;
        }
    }
    tr.endpoint = std::move(z);
    return tr;
}

/// Starting point: the supplied one, or a N(0, I_d) draw from the trajectory's substream.
inline std::vector<double> initial_state(const std::optional<std::vector<double>>& start, std::size_t d,
                                         RandomStream& rng) {
    if (start) {
        check_point(*start, d, "sampler start");
        return *start;
    }
    std::vector<double> z(d);
    rng.fill_normal(z);
    return z;
}

inline void check_grid_coeffs(const Schedule& s, const std::vector<double>& grid, bool need_score) {
    for (double t : grid) {
        const auto v = s.values(t);
        const auto c = coeffs_from(v);
        if (!(c.c3 > 0.0) || !std::isfinite(c.c1) || !std::isfinite(c.c2))
            throw ValidationError("sampler: schedule coefficients singular at grid time " + std::to_string(t));
        if (need_score && v.zeta != 0.0 && std::abs(c.b) < singular_b_threshold)
            throw SingularScoreError("sampler: |B(t)| < 1e-14 at grid time " + std::to_string(t));
    }
}

}  // namespace detail

/// Explicit Euler on dZ = b*(Z,t) dt from t = 1 to t_end:  Z_{k+1} = Z_k - b*(Z_k, t_k) h.
inline Trajectory sample_deterministic(const SamplerConfig& cfg, const TrainingSet& X, const Schedule& s,
                                       const std::optional<std::vector<double>>& start = std::nullopt,
                                       std::size_t sample_id = 0) {
    cfg.validate();
    const auto grid = cfg.grid();
    detail::check_grid_coeffs(s, grid, false);
    const std::uint64_t key = substream_key(cfg.master_seed, sample_id);
    RandomStream rng(key);
    auto z0 = detail::initial_state(start, X.dim(), rng);

    detail::FieldWorkspace ws(X, s);
    std::vector<double> b(X.dim());
    const double h = cfg.step_size();
    auto tr = detail::integrate(grid, std::move(z0), detail::divergence_radius(X.max_norm()), cfg.record_trajectory,
                                false, [&](std::span<double> z, std::size_t k) {
                                    const auto v = s.values(grid[k]);
                                    const auto c = detail::coeffs_from(v);
                                    ws.velocity(z, v, c, b);
                                    for (std::size_t j = 0; j < z.size(); ++j) z[j] -= b[j] * h;
                                    return StepInfo{};
                                });
    tr.sample_id = sample_id;
    tr.seed = key;
    tr.provenance = {s.id(), {}, std::string(sampler_mode_name(SamplerMode::deterministic))};
    return tr;
}

/// Euler-Maruyama for dZ = (b* - zeta s*) dt + sqrt(2 zeta) dW integrated backward from t = 1:
///   Z_{k+1} = Z_k - [b* - zeta s*](Z_k, t_k) h + sqrt(2 zeta(t_k) h) xi_k.
/// Grid times with zeta = 0 take a plain Euler step and draw no noise.
inline Trajectory sample_stochastic(const SamplerConfig& cfg, const TrainingSet& X, const Schedule& s,
                                    const std::optional<std::vector<double>>& start = std::nullopt,
                                    std::size_t sample_id = 0) {
    cfg.validate();
    const auto grid = cfg.grid();
    detail::check_grid_coeffs(s, grid, true);
    const std::uint64_t key = substream_key(cfg.master_seed, sample_id);
    RandomStream rng(key);
    auto z0 = detail::initial_state(start, X.dim(), rng);

    detail::FieldWorkspace ws(X, s);
    const std::size_t d = X.dim();
    std::vector<double> b(d), sc(d), xi(d);
    const double h = cfg.step_size();
    auto tr = detail::integrate(grid, std::move(z0), detail::divergence_radius(X.max_norm()), cfg.record_trajectory,
                                false, [&](std::span<double> z, std::size_t k) {
                                    const auto v = s.values(grid[k]);
                                    const auto c = detail::coeffs_from(v);
                                    ws.velocity(z, v, c, b);
                                    if (v.zeta == 0.0) {
                                        for (std::size_t j = 0; j < d; ++j) z[j] -= b[j] * h;
                                        return StepInfo{};
                                    }
                                    detail::score_from_velocity(b, z, v, c.b, sc);
                                    rng.fill_normal(xi);
                                    const double amp = std::sqrt(2.0 * v.zeta * h);
                                    for (std::size_t j = 0; j < d; ++j)
                                        z[j] = z[j] - (b[j] - v.zeta * sc[j]) * h + amp * xi[j];
                                    return StepInfo{};
                                });
    tr.sample_id = sample_id;
    tr.seed = key;
    tr.provenance = {s.id(), {}, std::string(sampler_mode_name(SamplerMode::stochastic))};
    return tr;
}

/// `count` trajectories; trajectory k uses substream (master_seed, k) so results do not depend on
/// the worker count.
inline std::vector<Trajectory> sample_batch(const SamplerConfig& cfg, const TrainingSet& X, const Schedule& s,
                                            std::size_t count, unsigned threads = 0) {
    if (count == 0) throw ValidationError("sample_batch: count must be >= 1");
    cfg.validate();
    std::vector<Trajectory> out(count);
    parallel_for(count, threads, [&](std::size_t k) {
        out[k] = cfg.mode == SamplerMode::deterministic ? sample_deterministic(cfg, X, s, std::nullopt, k)
                                                        : sample_stochastic(cfg, X, s, std::nullopt, k);
    });
    return out;
}

enum class TwoSidedDirection { to_x, to_y };

constexpr std::string_view direction_name(TwoSidedDirection d) {
    return d == TwoSidedDirection::to_x ? "to_x" : "to_y";
}

/// Euler on dZ = b2*(Z,t) dt between two anchor sets. TO_X runs t from 1 - t_end down to t_end,
/// TO_Y from t_end up to 1 - t_end, with h = (1 - 2 t_end) / N.
inline Trajectory sample_two_sided(const SamplerConfig& cfg, const TrainingSet& X, const SecondSet& Y,
                                   const Schedule& s, TwoSidedDirection direction, std::span<const double> start,
                                   std::size_t sample_id = 0) {
    cfg.validate();
    if (s.gamma_is_zero()) throw NotApplicableError("sample_two_sided: requires gamma > 0 on (0,1)");
    if (X.dim() != Y.dim()) throw DomainError("sample_two_sided: anchor sets differ in dimension");
    detail::check_point(start, X.dim(), "sample_two_sided start");

    const std::size_t N = cfg.steps;
    const double lo = cfg.t_end, hi = 1.0 - cfg.t_end;
    const double h = (hi - lo) / static_cast<double>(N);
    std::vector<double> grid(N + 1);
    for (std::size_t k = 0; k <= N; ++k)
        grid[k] = direction == TwoSidedDirection::to_x ? hi - static_cast<double>(k) * h : lo + static_cast<double>(k) * h;
    grid[N] = direction == TwoSidedDirection::to_x ? lo : hi;
    for (double t : grid)
        if (!(s.values(t).gamma > 0.0)) throw ValidationError("sample_two_sided: gamma(t) = 0 at a grid time");

    const double dt = direction == TwoSidedDirection::to_x ? -h : h;
    detail::PairWorkspace ws(X, Y);
    std::vector<double> b(X.dim());
    auto tr = detail::integrate(grid, std::vector<double>(start.begin(), start.end()),
                                detail::divergence_radius(std::max(X.max_norm(), Y.max_norm())),
                                cfg.record_trajectory, false, [&](std::span<double> z, std::size_t k) {
                                    ws.velocity(z, s.values(grid[k]), b);
                                    for (std::size_t j = 0; j < z.size(); ++j) z[j] += b[j] * dt;
                                    return StepInfo{};
                                });
    tr.sample_id = sample_id;
    tr.seed = substream_key(cfg.master_seed, sample_id);
    tr.provenance = {s.id(), {}, "two-sided:" + std::string(direction_name(direction))};
    return tr;
}

}  // namespace finterp
