#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace hierlogit {

struct LbfgsOptions {
    std::size_t history = 10;
    std::size_t max_iterations = 500;
    double gradient_tolerance = 1e-6;  // on the infinity norm
    std::size_t max_line_search = 40;
    double armijo = 1e-4;
    double curvature = 0.9;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed, NonFinite };

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    double gradient_norm = 0.0;  // infinity norm at x
    std::size_t iterations = 0;
    LbfgsStatus status = LbfgsStatus::MaxIterations;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

}  // namespace detail

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// `objective(x, grad)` returns f(x) and writes the gradient into grad.
/// Deterministic: no randomness, fixed evaluation order.
template <typename Objective>
LbfgsResult minimize_lbfgs(Objective&& objective, std::vector<double> x0, const LbfgsOptions& opt = {}) {
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);
    std::vector<double> g(n);
    res.value = objective(std::span<const double>(res.x), std::span<double>(g));
    if (!std::isfinite(res.value)) {
        res.status = LbfgsStatus::NonFinite;
        return res;
    }
    res.gradient_norm = detail::inf_norm(g);

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> memory;
    std::vector<double> d(n), x_new(n), g_new(n), alpha(opt.history);

    while (true) {
        if (res.gradient_norm <= opt.gradient_tolerance) {
            res.status = LbfgsStatus::Converged;
            return res;
        }
        if (res.iterations >= opt.max_iterations) {
            res.status = LbfgsStatus::MaxIterations;
            return res;
        }

        // Two-loop recursion: d = -H g.
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = -g[i];
        }
        for (std::size_t k = memory.size(); k-- > 0;) {
            alpha[k] = memory[k].rho * detail::dot(memory[k].s, d);
            for (std::size_t i = 0; i < n; ++i) {
                d[i] -= alpha[k] * memory[k].y[i];
            }
        }
        if (!memory.empty()) {
            const auto& last = memory.back();
            const double gamma = detail::dot(last.s, last.y) / detail::dot(last.y, last.y);
            for (double& v : d) {
                v *= gamma;
            }
        }
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const double beta = memory[k].rho * detail::dot(memory[k].y, d);
            for (std::size_t i = 0; i < n; ++i) {
                d[i] += (alpha[k] - beta) * memory[k].s[i];
            }
        }
        double slope = detail::dot(g, d);
        if (!(slope < 0.0)) {
            memory.clear();
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = -g[i];
            }
            slope = detail::dot(g, d);
        }

        // Strong-Wolfe line search (bracketing then zoom).
        const double f0 = res.value;
        auto eval = [&](double step, double& f, double& df) {
            for (std::size_t i = 0; i < n; ++i) {
                x_new[i] = res.x[i] + step * d[i];
            }
            f = objective(std::span<const double>(x_new), std::span<double>(g_new));
            df = detail::dot(g_new, d);
            return std::isfinite(f) && std::isfinite(df);
        };
        auto sufficient = [&](double step, double f) { return f <= f0 + opt.armijo * step * slope; };
        auto flat_enough = [&](double df) { return std::abs(df) <= -opt.curvature * slope; };

        double step = memory.empty() ? std::min(1.0, 1.0 / std::max(detail::inf_norm(g), 1e-12)) : 1.0;
        double lo = 0.0, f_lo = f0, df_lo = slope;
        double hi = 0.0, f_hi = 0.0;
        bool bracketed = false;
        bool accepted = false;
        double f = 0.0, df = 0.0;
        for (std::size_t evals = 0; evals < opt.max_line_search; ++evals) {
            if (bracketed) {
                // Safeguarded quadratic interpolation inside [lo, hi].
                const double width = hi - lo;
                const double denom = 2.0 * (f_hi - f_lo - df_lo * width);
                double trial = denom > 0.0 ? lo - df_lo * width * width / denom : lo + 0.5 * width;
                const double a = std::min(lo, hi), b = std::max(lo, hi);
                const double margin = 0.1 * (b - a);
                if (!(trial > a + margin && trial < b - margin)) {
                    trial = 0.5 * (lo + hi);
                }
                step = trial;
            }
            const bool finite = eval(step, f, df);
            if (!finite || !sufficient(step, f) || f >= f_lo) {
                hi = step;
                f_hi = finite ? f : f0 + 1e300;
                if (!bracketed) {
                    bracketed = true;
                }
                continue;
            }
            if (flat_enough(df)) {
                accepted = true;
                break;
            }
            if (bracketed) {
                if (df * (hi - lo) >= 0.0) {
                    hi = lo;
                    f_hi = f_lo;
                }
                lo = step;
                f_lo = f;
                df_lo = df;
            } else if (df >= 0.0) {
                bracketed = true;
                hi = lo;
                f_hi = f_lo;
                lo = step;
                f_lo = f;
                df_lo = df;
            } else {
                lo = step;
                f_lo = f;
                df_lo = df;
                step *= 2.0;
            }
        }
        if (!accepted) {
            // Fall back to the best sufficient-decrease point found, if any.
            if (lo > 0.0 && eval(lo, f, df) && f < f0) {
                accepted = true;
            } else {
                res.status = LbfgsStatus::LineSearchFailed;
                return res;
            }
        }

        Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = x_new[i] - res.x[i];
            p.y[i] = g_new[i] - g[i];
        }
        const double sy = detail::dot(p.s, p.y);
        res.x.swap(x_new);
        g.swap(g_new);
        res.value = f;
        res.gradient_norm = detail::inf_norm(g);
        ++res.iterations;
        if (sy > 1e-12 * detail::dot(p.y, p.y)) {
            p.rho = 1.0 / sy;
            memory.push_back(std::move(p));
            if (memory.size() > opt.history) {
                memory.pop_front();
            }
        }
    }
}

}  // namespace hierlogit
