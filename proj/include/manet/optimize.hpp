#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "manet/loss.hpp"
#include "manet/objective.hpp"

namespace manet {

namespace vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace vec

// ---- limited-memory inverse-Hessian approximation ---------------------------

/// Ring of (step, gradient-difference) pairs with the two-loop recursion.
/// Every stored pair satisfies the curvature condition s.y > 0.
class LbfgsMemory {
public:
    explicit LbfgsMemory(std::size_t capacity = 10) : capacity_(capacity) {}

    /// Stores the pair unless its curvature is degenerate
    /// (s.y <= 1e-10 * |s| |y|); returns whether it was kept.
    bool push(std::vector<double> s, std::vector<double> y) {
        const double sy = vec::dot(s, y);
        if (sy <= 1e-10 * vec::l2_norm(s) * vec::l2_norm(y)) return false;
        pairs_.push_back({std::move(s), std::move(y), sy});
        if (pairs_.size() > capacity_) pairs_.pop_front();
        return true;
    }

    std::size_t size() const { return pairs_.size(); }
    void clear() { pairs_.clear(); }

    /// Two-loop recursion; the initial scaling is (s.y)/(y.y) of the newest
    /// pair. With empty memory this is plain steepest descent.
    std::vector<double> direction(std::span<const double> grad) const {
        std::vector<double> q(grad.begin(), grad.end());
        if (!pairs_.empty()) {
            std::vector<double> alpha(pairs_.size());
            for (std::size_t i = pairs_.size(); i-- > 0;) {
                const Pair& p = pairs_[i];
                alpha[i] = vec::dot(p.s, q) / p.sy;
                for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * p.y[k];
            }
            const Pair& newest = pairs_.back();
            const double scale = newest.sy / vec::dot(newest.y, newest.y);
            for (double& v : q) v *= scale;
            for (std::size_t i = 0; i < pairs_.size(); ++i) {
                const Pair& p = pairs_[i];
                const double beta = vec::dot(p.y, q) / p.sy;
                for (std::size_t k = 0; k < q.size(); ++k) q[k] += (alpha[i] - beta) * p.s[k];
            }
        }
        for (double& v : q) v = -v;
        if (!vec::all_finite(q))
            throw std::runtime_error("lbfgs direction: numerical breakdown (non-finite)");
        return q;
    }

private:
    struct Pair {
        std::vector<double> s, y;
        double sy;
    };
    std::size_t capacity_;
    std::deque<Pair> pairs_;
};

// ---- More-Thuente line search -----------------------------------------------

struct LineSearchOptions {
    double c1 = 1e-4;        // sufficient decrease
    double c2 = 0.9;         // strong curvature
    int max_evals = 16;      // function/gradient evaluations per search
    double step_min = 1e-20;
    double step_max = 1e20;
    double xtol = 1e-15;     // relative width of the interval of uncertainty
};

struct LineSearchResult {
    double step = 0.0;
    int evals = 0;
    bool success = false;
};

namespace detail {

inline double cubic_minimizer(double u, double fu, double du, double v, double fv, double dv) {
    const double d = v - u;
    const double theta = 3.0 * (fu - fv) / d + du + dv;
    const double s = std::max({std::abs(theta), std::abs(du), std::abs(dv)});
    const double a = theta / s;
    double gamma = s * std::sqrt(a * a - (du / s) * (dv / s));
    if (v < u) gamma = -gamma;
    const double p = gamma - du + theta;
    const double q = gamma - du + gamma + dv;
    return u + p / q * d;
}

inline double cubic_minimizer_bounded(double u, double fu, double du, double v, double fv,
                                      double dv, double tmin, double tmax) {
    const double d = v - u;
    const double theta = 3.0 * (fu - fv) / d + du + dv;
    const double s = std::max({std::abs(theta), std::abs(du), std::abs(dv)});
    const double a = theta / s;
    double gamma = a * a - (du / s) * (dv / s);
    gamma = gamma > 0.0 ? s * std::sqrt(gamma) : 0.0;
    if (u < v) gamma = -gamma;
    const double p = gamma - dv + theta;
    const double q = gamma - dv + gamma + du;
    const double r = p / q;
    if (r < 0.0 && gamma != 0.0) return v - r * d;
    return a < 0.0 ? tmax : tmin;
}

inline double quad_minimizer(double u, double fu, double du, double v, double fv) {
    const double a = v - u;
    return u + du / ((fu - fv) / a + du) / 2.0 * a;
}

inline double quad_minimizer_secant(double u, double du, double v, double dv) {
    const double a = u - v;
    return v + dv / (dv - du) * a;
}

/// Safeguarded trial value and interval update (More & Thuente 1994, dcstep).
/// x carries the best step so far, y the other endpoint, t the trial.
/// Returns nonzero when the inputs are inconsistent.
inline int update_trial_interval(double& x, double& fx, double& dx, double& y, double& fy,
                                 double& dy, double& t, double& ft, double& dt, double tmin,
                                 double tmax, bool& brackt) {
    if (brackt) {
        if (t <= std::min(x, y) || std::max(x, y) <= t) return 1;  // trial outside interval
        if (dx * (t - x) >= 0.0) return 1;                         // not a descent from x
        if (tmax < tmin) return 1;
    }

    const bool deriv_sign_differs = dt * (dx / std::abs(dx)) < 0.0;
    double newt;
    bool bound;

    if (fx < ft) {
        // higher value: minimum bracketed between x and t
        brackt = true;
        bound = true;
        const double mc = cubic_minimizer(x, fx, dx, t, ft, dt);
        const double mq = quad_minimizer(x, fx, dx, t, ft);
        newt = std::abs(mc - x) < std::abs(mq - x) ? mc : mc + 0.5 * (mq - mc);
    } else if (deriv_sign_differs) {
        // lower value, opposite slopes: bracketed
        brackt = true;
        bound = false;
        const double mc = cubic_minimizer(x, fx, dx, t, ft, dt);
        const double mq = quad_minimizer_secant(x, dx, t, dt);
        newt = std::abs(mc - t) > std::abs(mq - t) ? mc : mq;
    } else if (std::abs(dt) < std::abs(dx)) {
        // slope magnitude decreasing
        bound = true;
        const double mc = cubic_minimizer_bounded(x, fx, dx, t, ft, dt, tmin, tmax);
        const double mq = quad_minimizer_secant(x, dx, t, dt);
        if (brackt)
            newt = std::abs(t - mc) < std::abs(t - mq) ? mc : mq;
        else
            newt = std::abs(t - mc) > std::abs(t - mq) ? mc : mq;
    } else {
        bound = false;
        if (brackt)
            newt = cubic_minimizer(t, ft, dt, y, fy, dy);
        else
            newt = x < t ? tmax : tmin;
    }

    // interval update
    if (fx < ft) {
        y = t;
        fy = ft;
        dy = dt;
    } else {
        if (deriv_sign_differs) {
            y = x;
            fy = fx;
            dy = dx;
        }
        x = t;
        fx = ft;
        dx = dt;
    }

    newt = std::clamp(newt, tmin, tmax);
    if (brackt && bound) {
        const double mid = x + 0.66 * (y - x);
        newt = x < y ? std::min(newt, mid) : std::max(newt, mid);
    }
    t = newt;
    return 0;
}

}  // namespace detail

/// Strong-Wolfe line search along a descent direction. Evaluates the
/// objective at x0 + step * direction, writing the final point, gradient
/// and value into the out buffers. Fails (success = false) when no
/// acceptable step is found within max_evals evaluations.
inline LineSearchResult more_thuente_search(const Objective& obj, std::span<const double> x0,
                                            double f0, std::span<const double> g0,
                                            std::span<const double> direction, double initial_step,
                                            std::span<double> x_out, std::span<double> g_out,
                                            double& f_out, const LineSearchOptions& opts = {}) {
    const std::size_t n = x0.size();
    const double dginit = vec::dot(g0, direction);
    if (dginit >= 0.0)
        throw std::invalid_argument("line search: direction is not a descent direction");
    if (initial_step <= 0.0) throw std::invalid_argument("line search: initial step must be > 0");

    bool brackt = false;
    bool stage1 = true;
    int uinfo = 0;
    const double finit = f0;
    const double dgtest = opts.c1 * dginit;
    double width = opts.step_max - opts.step_min;
    double prev_width = 2.0 * width;

    double stx = 0.0, fx = finit, dgx = dginit;
    double sty = 0.0, fy = finit, dgy = dginit;
    double stp = initial_step;
    double f = f0, dg = 0.0;
    int count = 0;

    for (;;) {
        double stmin, stmax;
        if (brackt) {
            stmin = std::min(stx, sty);
            stmax = std::max(stx, sty);
        } else {
            stmin = stx;
            stmax = stp + 4.0 * (stp - stx);
        }
        stp = std::clamp(stp, opts.step_min, opts.step_max);

        // on an unusual termination fall back to the best step so far
        if ((brackt && (stp <= stmin || stmax <= stp || opts.max_evals <= count + 1 || uinfo != 0)) ||
            (brackt && stmax - stmin <= opts.xtol * stmax)) {
            stp = stx;
        }

        for (std::size_t i = 0; i < n; ++i) x_out[i] = x0[i] + stp * direction[i];
        f = obj.value_and_gradient(x_out, g_out);
        dg = vec::dot(g_out, direction);
        const double ftest = finit + stp * dgtest;
        ++count;

        if (brackt && (stp <= stmin || stmax <= stp || uinfo != 0))
            return {stp, count, false};  // rounding errors prevent progress
        if (stp == opts.step_max && f <= ftest && dg <= dgtest) return {stp, count, false};
        if (stp == opts.step_min && (ftest < f || dgtest <= dg)) return {stp, count, false};
        if (brackt && stmax - stmin <= opts.xtol * stmax) return {stp, count, false};
        if (f <= ftest && std::abs(dg) <= opts.c2 * (-dginit)) {
            f_out = f;
            return {stp, count, true};  // strong Wolfe conditions hold
        }
        if (count >= opts.max_evals) return {stp, count, false};

        if (stage1 && f <= ftest && dg >= std::min(opts.c1, opts.c2) * dginit) stage1 = false;

        if (stage1 && ftest < f && f <= fx) {
            // modified function keeps the auxiliary problem well-scaled
            double fm = f - stp * dgtest;
            double fxm = fx - stx * dgtest;
            double fym = fy - sty * dgtest;
            double dgm = dg - dgtest;
            double dgxm = dgx - dgtest;
            double dgym = dgy - dgtest;
            uinfo = detail::update_trial_interval(stx, fxm, dgxm, sty, fym, dgym, stp, fm, dgm,
                                                  stmin, stmax, brackt);
            fx = fxm + stx * dgtest;
            fy = fym + sty * dgtest;
            dgx = dgxm + dgtest;
            dgy = dgym + dgtest;
        } else {
            uinfo = detail::update_trial_interval(stx, fx, dgx, sty, fy, dgy, stp, f, dg, stmin,
                                                  stmax, brackt);
        }

        if (brackt) {
            if (0.66 * prev_width <= std::abs(sty - stx)) stp = stx + 0.5 * (sty - stx);
            prev_width = width;
            width = std::abs(sty - stx);
        }
    }
}

// ---- run records -------------------------------------------------------------

enum class TerminationReason { LinesearchFailed, Timeout, MaxIter, GradTol };

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::LinesearchFailed: return "linesearch_failed";
        case TerminationReason::Timeout: return "timeout";
        case TerminationReason::MaxIter: return "max_iter";
        case TerminationReason::GradTol: return "grad_tol";
    }
    return "?";
}

struct RunRow {
    std::size_t iter = 0;
    double time_s = 0.0;  // optimization wall time; metric evaluation excluded
    LossBreakdown loss;
    double metric = std::numeric_limits<double>::quiet_NaN();  // e.g. NMAE, when available
};

struct RunRecord {
    std::vector<RunRow> rows;
    TerminationReason reason = TerminationReason::MaxIter;
};

/// Optional per-iteration instrumentation. The breakdown hook reports the
/// loss components of the latest accepted evaluation; the metric hook is
/// evaluated outside the optimization clock.
struct RunHooks {
    std::function<LossBreakdown()> breakdown;
    std::function<double(std::span<const double>)> metric;
};

struct OptimizeResult {
    std::vector<double> params;
    double value = 0.0;
    RunRecord record;
};

struct LbfgsOptions {
    std::size_t memory = 10;
    double timeout_s = 15.0;
    std::size_t max_iter = std::numeric_limits<std::size_t>::max();
    double grad_tol = 1e-10;  // infinity norm
    LineSearchOptions linesearch{};
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double timeout_s = 15.0;
    std::size_t max_iter = std::numeric_limits<std::size_t>::max();
};

namespace detail {

/// Wall clock that can exclude time spent in metric callbacks.
class RunClock {
public:
    RunClock() : start_(std::chrono::steady_clock::now()) {}

    double elapsed() const {
        const auto now = std::chrono::steady_clock::now();
        return std::chrono::duration<double>(now - start_).count() - excluded_;
    }

    template <class Fn>
    auto excluding(Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        auto result = fn();
        excluded_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }

private:
    std::chrono::steady_clock::time_point start_;
    double excluded_ = 0.0;
};

inline RunRow make_row(std::size_t iter, double time_s, double value, const RunHooks& hooks,
                       detail::RunClock& clock, std::span<const double> params) {
    RunRow row;
    row.iter = iter;
    row.time_s = time_s;
    if (hooks.breakdown) {
        row.loss = hooks.breakdown();
    } else {
        row.loss.total = value;
    }
    if (hooks.metric) row.metric = clock.excluding([&] { return hooks.metric(params); });
    return row;
}

}  // namespace detail

/// L-BFGS driver with the More-Thuente search. Terminates on the first of:
/// line-search failure, timeout (checked between iterations), iteration
/// limit, or gradient tolerance.
inline OptimizeResult run_lbfgs(const Objective& obj, std::vector<double> init,
                                const LbfgsOptions& opts = {}, const RunHooks& hooks = {}) {
    detail::RunClock clock;
    const std::size_t n = init.size();
    std::vector<double> x = std::move(init);
    std::vector<double> g(n), x_new(n), g_new(n);

    double f = obj.value_and_gradient(x, g);
    if (!std::isfinite(f)) throw std::runtime_error("lbfgs: non-finite loss at initial parameters");

    RunRecord record;
    record.rows.push_back(detail::make_row(0, clock.elapsed(), f, hooks, clock, x));

    LbfgsMemory memory(opts.memory);
    std::size_t iter = 0;
    TerminationReason reason;

    for (;;) {
        if (clock.elapsed() >= opts.timeout_s) {
            reason = TerminationReason::Timeout;
            break;
        }
        if (iter >= opts.max_iter) {
            reason = TerminationReason::MaxIter;
            break;
        }
        if (vec::inf_norm(g) <= opts.grad_tol) {
            reason = TerminationReason::GradTol;
            break;
        }

        std::vector<double> dir = memory.direction(g);
        if (vec::dot(dir, g) >= 0.0) {
            // stale curvature produced a non-descent direction; restart
            memory.clear();
            for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
        }
        const double step0 = iter == 0 ? 1.0 / vec::l2_norm(g) : 1.0;

        double f_new = f;
        const LineSearchResult ls =
            more_thuente_search(obj, x, f, g, dir, step0, x_new, g_new, f_new, opts.linesearch);
        if (!ls.success) {
            reason = TerminationReason::LinesearchFailed;
            break;
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        memory.push(std::move(s), std::move(y));
        x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        ++iter;
        record.rows.push_back(detail::make_row(iter, clock.elapsed(), f, hooks, clock, x));
    }

    record.reason = reason;
    return {std::move(x), f, std::move(record)};
}

/// Full-batch deterministic Adam baseline with bias correction.
inline OptimizeResult run_adam(const Objective& obj, std::vector<double> init,
                               const AdamOptions& opts = {}, const RunHooks& hooks = {}) {
    detail::RunClock clock;
    const std::size_t n = init.size();
    std::vector<double> x = std::move(init);
    std::vector<double> g(n), m(n, 0.0), v(n, 0.0);

    double f = obj.value_and_gradient(x, g);
    if (!std::isfinite(f)) throw std::runtime_error("adam: non-finite loss at initial parameters");

    RunRecord record;
    record.rows.push_back(detail::make_row(0, clock.elapsed(), f, hooks, clock, x));

    std::size_t iter = 0;
    TerminationReason reason;
    double b1t = 1.0, b2t = 1.0;

    for (;;) {
        if (clock.elapsed() >= opts.timeout_s) {
            reason = TerminationReason::Timeout;
            break;
        }
        if (iter >= opts.max_iter) {
            reason = TerminationReason::MaxIter;
            break;
        }
        b1t *= opts.beta1;
        b2t *= opts.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g[i];
            v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g[i] * g[i];
            const double mhat = m[i] / (1.0 - b1t);
            const double vhat = v[i] / (1.0 - b2t);
            x[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
        }
        f = obj.value_and_gradient(x, g);
        if (!std::isfinite(f)) throw std::runtime_error("adam: loss diverged");
        ++iter;
        record.rows.push_back(detail::make_row(iter, clock.elapsed(), f, hooks, clock, x));
    }

    record.reason = reason;
    return {std::move(x), f, std::move(record)};
}

}  // namespace manet
