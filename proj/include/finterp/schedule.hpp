#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "finterp/errors.hpp"

namespace finterp {

/// Noise profile gamma(t) of a linear (alpha = 1 - t, beta = t) interpolant.
enum class GammaFamily {
    zero,              // gamma = 0
    sqrt_bridge,       // sqrt(t(1-t))
    bridge,            // t(1-t)
    bridge_squared,    // t(1-t)^2
    quadratic,         // t^2 (gamma(1) != 0, fails validation; kept as the divergent exemplar)
    quadratic_bridge,  // t^2 (1-t)
};

/// Diffusion strength zeta(t) used by stochastic generation.
enum class ZetaFamily {
    none,      // 0
    constant,  // c
    bridge,    // c t(1-t)
};

/// Values of the schedule functions at one time.
///
/// `gamma_dgamma` is the product gamma * gamma' evaluated analytically; it stays finite at the
/// endpoints for the square-root family where gamma' itself is unbounded.
struct ScheduleValues {
    double alpha = 0, dalpha = 0;
    double beta = 0, dbeta = 0;
    double gamma = 0, dgamma = 0;
    double gamma_dgamma = 0;
    double zeta = 0;
};

/// User-supplied schedule functions. `gamma_dgamma` may be left empty, in which case gamma * gamma'
/// is used.
struct ScheduleFunctions {
    std::function<double(double)> alpha, dalpha;
    std::function<double(double)> beta, dbeta;
    std::function<double(double)> gamma, dgamma;
    std::function<double(double)> gamma_dgamma;
    std::function<double(double)> zeta;
};

/// Interpolation schedule (alpha, beta, gamma, zeta). Immutable value type.
class Schedule {
public:
    static Schedule builtin(GammaFamily gamma, ZetaFamily zeta = ZetaFamily::none, double zeta_scale = 0.0) {
        if (!std::isfinite(zeta_scale)) throw NumericError("schedule: zeta scale must be finite");
        if (zeta == ZetaFamily::none) zeta_scale = 0.0;
        return Schedule(Builtin{gamma, zeta, zeta_scale});
    }

    /// Builds a schedule from its configuration name, e.g. ("sqrt", "constant", 0.008).
    static Schedule from_name(std::string_view kind, std::string_view zeta = "none", double zeta_scale = 0.0) {
        return builtin(gamma_family_from_name(kind), zeta_family_from_name(zeta), zeta_scale);
    }

    static Schedule custom(std::string id, ScheduleFunctions fns) {
        if (!fns.alpha || !fns.dalpha || !fns.beta || !fns.dbeta || !fns.gamma || !fns.dgamma)
            throw ValidationError("custom schedule '" + id + "': alpha, beta, gamma and their derivatives are required");
        if (!fns.zeta) fns.zeta = [](double) { return 0.0; };
        return Schedule(Custom{std::move(id), std::make_shared<const ScheduleFunctions>(std::move(fns))});
    }

    /// Evaluates every schedule function at t without range checks.
    ScheduleValues values(double t) const {
        if (const auto* b = std::get_if<Builtin>(&impl_)) return b->values(t);
        const auto& f = *std::get<Custom>(impl_).fns;
        ScheduleValues v;
        v.alpha = f.alpha(t);
        v.dalpha = f.dalpha(t);
        v.beta = f.beta(t);
        v.dbeta = f.dbeta(t);
        v.gamma = f.gamma(t);
        v.dgamma = f.dgamma(t);
        v.gamma_dgamma = f.gamma_dgamma ? f.gamma_dgamma(t) : v.gamma * v.dgamma;
        v.zeta = f.zeta(t);
        return v;
    }

    double zeta(double t) const { return values(t).zeta; }

    /// True when gamma vanishes for every t (the deterministic flow-matching interpolant).
    bool gamma_is_zero() const {
        if (const auto* b = std::get_if<Builtin>(&impl_)) return b->gamma == GammaFamily::zero;
        const auto& f = *std::get<Custom>(impl_).fns;
        for (int k = 1; k < 100; ++k)
            if (f.gamma(k / 100.0) != 0.0) return false;
        return true;
    }

    bool zeta_is_zero() const {
        if (const auto* b = std::get_if<Builtin>(&impl_)) return b->zeta == ZetaFamily::none || b->zeta_scale == 0.0;
        const auto& f = *std::get<Custom>(impl_).fns;
        for (int k = 0; k <= 100; ++k)
            if (f.zeta(k / 100.0) != 0.0) return false;
        return true;
    }

    bool is_builtin() const { return std::holds_alternative<Builtin>(impl_); }

    /// Configuration names; only meaningful for built-in schedules.
    std::string kind() const {
        if (const auto* b = std::get_if<Builtin>(&impl_)) return std::string(gamma_family_name(b->gamma));
        return std::get<Custom>(impl_).id;
    }
    std::string zeta_kind() const {
        if (const auto* b = std::get_if<Builtin>(&impl_)) return std::string(zeta_family_name(b->zeta));
        return "custom";
    }
    double zeta_scale() const {
        if (const auto* b = std::get_if<Builtin>(&impl_)) return b->zeta_scale;
        return 0.0;
    }

    /// Stable identifier used in trajectory provenance.
    std::string id() const {
        if (!is_builtin()) return std::get<Custom>(impl_).id;
        std::string out = kind();
        if (!zeta_is_zero()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", zeta_scale());
            out += "+zeta:" + zeta_kind() + "(" + buf + ")";
        }
        return out;
    }

    static GammaFamily gamma_family_from_name(std::string_view name) {
        for (auto g : all_gamma_families())
            if (gamma_family_name(g) == name) return g;
        throw ValidationError("unknown schedule kind '" + std::string(name) + "'");
    }

    static ZetaFamily zeta_family_from_name(std::string_view name) {
        for (auto z : {ZetaFamily::none, ZetaFamily::constant, ZetaFamily::bridge})
            if (zeta_family_name(z) == name) return z;
        throw ValidationError("unknown zeta kind '" + std::string(name) + "'");
    }

    static constexpr std::string_view gamma_family_name(GammaFamily g) {
        switch (g) {
            case GammaFamily::zero: return "linear";
            case GammaFamily::sqrt_bridge: return "sqrt";
            case GammaFamily::bridge: return "bridge";
            case GammaFamily::bridge_squared: return "bridge2";
            case GammaFamily::quadratic: return "quadratic";
            case GammaFamily::quadratic_bridge: return "quadratic-bridge";
        }
        return "?";
    }

    static constexpr std::string_view gamma_family_formula(GammaFamily g) {
        switch (g) {
            case GammaFamily::zero: return "0";
            case GammaFamily::sqrt_bridge: return "sqrt(t(1-t))";
            case GammaFamily::bridge: return "t(1-t)";
            case GammaFamily::bridge_squared: return "t(1-t)^2";
            case GammaFamily::quadratic: return "t^2";
            case GammaFamily::quadratic_bridge: return "t^2(1-t)";
        }
        return "?";
    }

    static constexpr std::string_view zeta_family_name(ZetaFamily z) {
        switch (z) {
            case ZetaFamily::none: return "none";
            case ZetaFamily::constant: return "constant";
            case ZetaFamily::bridge: return "bridge";
        }
        return "?";
    }

    static std::vector<GammaFamily> all_gamma_families() {
        return {GammaFamily::zero,           GammaFamily::sqrt_bridge, GammaFamily::bridge,
                GammaFamily::bridge_squared, GammaFamily::quadratic,   GammaFamily::quadratic_bridge};
    }

private:
    struct Builtin {
        GammaFamily gamma;
        ZetaFamily zeta;
        double zeta_scale;

        ScheduleValues values(double t) const {
            ScheduleValues v;
            v.alpha = 1.0 - t;
            v.dalpha = -1.0;
            v.beta = t;
            v.dbeta = 1.0;
            const double u = 1.0 - t;
            switch (gamma) {
                case GammaFamily::zero:
                    break;
                case GammaFamily::sqrt_bridge: {
                    const double p = t * u;
                    v.gamma = std::sqrt(p);
                    v.dgamma = (1.0 - 2.0 * t) / (2.0 * v.gamma);  // +-inf at the endpoints
                    v.gamma_dgamma = 0.5 * (1.0 - 2.0 * t);
                    break;
                }
                case GammaFamily::bridge:
                    v.gamma = t * u;
                    v.dgamma = 1.0 - 2.0 * t;
                    v.gamma_dgamma = v.gamma * v.dgamma;
                    break;
                case GammaFamily::bridge_squared:
                    v.gamma = t * u * u;
                    v.dgamma = u * (1.0 - 3.0 * t);
                    v.gamma_dgamma = v.gamma * v.dgamma;
                    break;
                case GammaFamily::quadratic:
                    v.gamma = t * t;
                    v.dgamma = 2.0 * t;
                    v.gamma_dgamma = v.gamma * v.dgamma;
                    break;
                case GammaFamily::quadratic_bridge:
                    v.gamma = t * t * u;
                    v.dgamma = t * (2.0 - 3.0 * t);
                    v.gamma_dgamma = v.gamma * v.dgamma;
                    break;
            }
            switch (zeta) {
                case ZetaFamily::none: v.zeta = 0.0; break;
                case ZetaFamily::constant: v.zeta = zeta_scale; break;
                case ZetaFamily::bridge: v.zeta = zeta_scale * t * u; break;
            }
            return v;
        }
    };

    struct Custom {
        std::string id;
        std::shared_ptr<const ScheduleFunctions> fns;
    };

    explicit Schedule(std::variant<Builtin, Custom> impl) : impl_(std::move(impl)) {}

    std::variant<Builtin, Custom> impl_;
};

/// Schedule-derived coefficients at one time.
struct Coeffs {
    double c1 = 0, c2 = 0, c3 = 0, b = 0;
};

namespace detail {

inline void check_time(double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError(std::string(what) + ": time " + std::to_string(t) + " outside [0,1]");
}

inline Coeffs coeffs_from(const ScheduleValues& v) {
    Coeffs c;
    c.c1 = v.gamma_dgamma + v.dbeta * v.beta;
    c.c3 = v.gamma * v.gamma + v.beta * v.beta;
    c.c2 = c.c1 * v.alpha - c.c3 * v.dalpha;
    // beta (alpha' beta - alpha beta') + gamma (gamma alpha' - gamma' alpha), with gamma gamma' kept as one factor
    c.b = v.beta * (v.dalpha * v.beta - v.alpha * v.dbeta) + v.gamma * v.gamma * v.dalpha - v.gamma_dgamma * v.alpha;
    return c;
}

}  // namespace detail

/// Evaluates (alpha, alpha', beta, beta', gamma, gamma', zeta) at t in [0,1].
inline ScheduleValues eval_schedule(const Schedule& s, double t) {
    detail::check_time(t, "eval_schedule");
    return s.values(t);
}

/// C1, C2, C3 and B at t in (0,1].
inline Coeffs coeffs(const Schedule& s, double t) {
    detail::check_time(t, "coeffs");
    if (t == 0.0) throw SingularTimeError("coeffs: C3(0) = 0, coefficients are singular at t = 0");
    return detail::coeffs_from(s.values(t));
}

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    const ValidationCheck* find(std::string_view name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

/// Checks the boundary, positivity and derivative conditions on a 1000-point grid.
inline ValidationReport validate_schedule(const Schedule& s) {
    constexpr double boundary_tol = 1e-12;
    constexpr int grid = 1000;
    ValidationReport report;
    auto add = [&](std::string name, bool ok, std::string detail = {}) {
        report.checks.push_back({std::move(name), ok, std::move(detail)});
    };
    auto near = [&](double value, double target) { return std::abs(value - target) <= boundary_tol; };

    const auto v0 = s.values(0.0);
    const auto v1 = s.values(1.0);
    add("alpha(0)=1", near(v0.alpha, 1.0), "alpha(0)=" + std::to_string(v0.alpha));
    add("alpha(1)=0", near(v1.alpha, 0.0), "alpha(1)=" + std::to_string(v1.alpha));
    add("beta(0)=0", near(v0.beta, 0.0), "beta(0)=" + std::to_string(v0.beta));
    add("beta(1)=1", near(v1.beta, 1.0), "beta(1)=" + std::to_string(v1.beta));
    add("gamma(0)=0", near(v0.gamma, 0.0), "gamma(0)=" + std::to_string(v0.gamma));
    add("gamma(1)=0", near(v1.gamma, 0.0), "gamma(1)=" + std::to_string(v1.gamma));

    bool gamma_nonneg = true, any_zero = false, any_pos = false, zeta_nonneg = true, finite = true;
    double worst_t = -1.0;
    for (int k = 0; k <= grid; ++k) {
        const double t = static_cast<double>(k) / grid;
        const auto v = s.values(t);
        if (!std::isfinite(v.alpha) || !std::isfinite(v.beta) || !std::isfinite(v.gamma) || !std::isfinite(v.zeta))
            finite = false;
        if (v.zeta < 0.0) zeta_nonneg = false;
        if (k == 0 || k == grid) continue;
        if (v.gamma < 0.0) {
            gamma_nonneg = false;
            worst_t = t;
        }
        if (v.gamma == 0.0) any_zero = true;
        if (v.gamma > 0.0) any_pos = true;
    }
    add("finite values", finite);
    add("gamma>=0 on (0,1)", gamma_nonneg, worst_t >= 0 ? "negative at t=" + std::to_string(worst_t) : "");
    add("gamma==0 or gamma>0 on (0,1)", !(any_zero && any_pos));
    add("zeta>=0 on [0,1]", zeta_nonneg);

    // Central differences at interior grid points; derivative compared with mixed abs/rel scale.
    constexpr double step = 1e-6, tol = 1e-6;
    double worst = 0.0;
    std::string worst_name;
    for (int k = 1; k < grid; ++k) {
        const double t = static_cast<double>(k) / grid;
        const auto v = s.values(t);
        const auto lo = s.values(t - step);
        const auto hi = s.values(t + step);
        const std::pair<const char*, std::array<double, 3>> triples[] = {
            {"alpha'", {v.dalpha, lo.alpha, hi.alpha}},
            {"beta'", {v.dbeta, lo.beta, hi.beta}},
            {"gamma'", {v.dgamma, lo.gamma, hi.gamma}},
        };
        for (const auto& [name, tr] : triples) {
            const double fd = (tr[2] - tr[1]) / (2.0 * step);
            const double err = std::abs(fd - tr[0]) / std::max(1.0, std::abs(tr[0]));
            if (!(err <= worst)) {
                worst = std::isnan(err) ? INFINITY : err;
                worst_name = name;
            }
        }
    }
    add("derivatives match finite differences", worst <= tol, "max rel error " + std::to_string(worst) + " (" + worst_name + ")");
    return report;
}

namespace detail {

template <class F>
double simpson_recurse(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                       int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    if (!std::isfinite(flm) || !std::isfinite(frm)) throw NumericError("quadrature: non-finite integrand sample");
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f on [a,b].
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
        throw NumericError("quadrature: non-finite integrand sample");
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_recurse(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// sigma^2 = 2 * integral_0^1 zeta(t) dt.
inline double noise_variance(const Schedule& s) {
    return 2.0 * adaptive_simpson([&](double t) { return s.zeta(t); }, 0.0, 1.0);
}

enum class Regime { vanishes, finite, diverges };

constexpr std::string_view regime_name(Regime r) {
    switch (r) {
        case Regime::vanishes: return "VANISHES";
        case Regime::finite: return "FINITE";
        case Regime::diverges: return "DIVERGES";
    }
    return "?";
}

struct RegimeEstimate {
    Regime regime = Regime::finite;
    double slope = 0.0;  // d log(ratio) / d log(t) over the grid
};

/// Small-t behaviour of C3(t) / (C1(t) gamma(t)), classified from the log-log slope on
/// t in [1e-8, 1e-2].
inline RegimeEstimate regime_limit(const Schedule& s) {
    if (s.gamma_is_zero()) throw NotApplicableError("regime_limit: gamma is identically zero");
    constexpr int points = 25;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < points; ++k) {
        const double lt = std::log(1e-2) + (std::log(1e-8) - std::log(1e-2)) * k / (points - 1);
        const double t = std::exp(lt);
        const auto v = s.values(t);
        const auto c = detail::coeffs_from(v);
        const double ratio = c.c3 / (c.c1 * v.gamma);
        if (!(ratio > 0.0) || !std::isfinite(ratio))
            throw NumericError("regime_limit: ratio C3/(C1 gamma) not positive and finite at t=" + std::to_string(t));
        const double ly = std::log(ratio);
        sx += lt;
        sy += ly;
        sxx += lt * lt;
        sxy += lt * ly;
    }
    const double slope = (points * sxy - sx * sy) / (points * sxx - sx * sx);
    RegimeEstimate out;
    out.slope = slope;
    if (slope > 0.1)
        out.regime = Regime::vanishes;
    else if (slope < -0.1)
        out.regime = Regime::diverges;
    else
        out.regime = Regime::finite;
    return out;
}

}  // namespace finterp
