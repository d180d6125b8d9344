#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace tvparx {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// cbrt(machine epsilon): balances truncation and rounding error of central differences.
inline const double kGradientStepRel = std::cbrt(std::numeric_limits<double>::epsilon());
/// eps^(1/4), the analogous balance point for second differences.
inline const double kHessianStepRel = std::sqrt(std::sqrt(std::numeric_limits<double>::epsilon()));

inline double fd_step(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

/// Central-difference gradient.
inline Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double rel = kGradientStepRel) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step(x[i], rel);
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Central-difference Hessian, symmetric by construction.
inline Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double rel = kHessianStepRel) {
    const Eigen::Index k = x.size();
    Eigen::MatrixXd hess(k, k);
    Eigen::VectorXd h(k);
    for (Eigen::Index i = 0; i < k; ++i) h[i] = fd_step(x[i], rel);
    const double f0 = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < k; ++i) {
        xp[i] = x[i] + h[i];
        const double fp = f(xp);
        xp[i] = x[i] - h[i];
        const double fm = f(xp);
        xp[i] = x[i];
        hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            auto at = [&](double si, double sj) {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                const double v = f(xp);
                xp[i] = x[i];
                xp[j] = x[j];
                return v;
            };
            const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h[i] * h[j]);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }
    return hess;
}

struct OptimizerOptions {
    std::size_t max_iter = 500;
    double grad_tol = 1e-6;
    double param_tol = 1e-10;
    double fd_step_rel = kGradientStepRel;
    double max_step = 1.0;  // cap on the Euclidean length of a trial step
};

enum class OptimizerStatus { Converged, MaxIterations, LineSearchFailed, Stalled };

struct OptimizerResult {
    Eigen::VectorXd x;
    double fx = std::numeric_limits<double>::infinity();
    double grad_norm = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    OptimizerStatus status = OptimizerStatus::MaxIterations;

    [[nodiscard]] bool converged() const { return status == OptimizerStatus::Converged; }
};

namespace detail {
/// Non-finite objective values count as +inf so every search step rejects them.
struct CountingObjective {
    const Objective& f;
    std::size_t count = 0;
    double operator()(const Eigen::VectorXd& x) {
        ++count;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    }
};
}  // namespace detail

/// BFGS on the inverse Hessian with central-difference gradients and a
/// backtracking Armijo line search. Never returns a point worse than x0.
inline OptimizerResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                                     const OptimizerOptions& opts = {}) {
    detail::CountingObjective f{objective};
    const Objective fref = [&f](const Eigen::VectorXd& x) { return f(x); };
    const Eigen::Index k = x0.size();

    OptimizerResult res;
    res.x = x0;
    res.fx = f(x0);
    if (!std::isfinite(res.fx)) {
        res.status = OptimizerStatus::LineSearchFailed;
        res.evaluations = f.count;
        return res;
    }
    Eigen::VectorXd g = fd_gradient(fref, res.x, opts.fd_step_rel);
    Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(k, k);
    bool scaled = false;

    for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
        res.grad_norm = g.norm();
        if (!std::isfinite(res.grad_norm)) {
            res.status = OptimizerStatus::LineSearchFailed;
            break;
        }
        if (res.grad_norm < opts.grad_tol) {
            res.status = OptimizerStatus::Converged;
            break;
        }
        Eigen::VectorXd dir = -inv_h * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            inv_h.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }

        const double dir_norm = dir.norm();
        if (dir_norm > opts.max_step) {
            dir *= opts.max_step / dir_norm;
            slope *= opts.max_step / dir_norm;
        }
        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + step * dir;
            f_new = f(x_new);
            if (f_new <= res.fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            double next = 0.5 * step;
            if (std::isfinite(f_new)) {
                // minimizer of the quadratic through f(0), f'(0), f(step)
                const double q = -slope * step * step / (2.0 * (f_new - res.fx - slope * step));
                next = std::clamp(q, 0.1 * step, 0.5 * step);
            }
            step = next;
        }
        if (!accepted) {
            res.status = OptimizerStatus::LineSearchFailed;
            break;
        }

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd g_new = fd_gradient(fref, x_new, opts.fd_step_rel);
        const Eigen::VectorXd yv = g_new - g;
        const double f_old = res.fx;
        res.x = x_new;
        res.fx = f_new;
        g = g_new;

        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (!scaled) {
                inv_h *= sy / yv.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
            inv_h = (eye - rho * s * yv.transpose()) * inv_h * (eye - rho * yv * s.transpose()) +
                    rho * s * s.transpose();
        }

        if (s.norm() < opts.param_tol * (1.0 + res.x.norm()) &&
            std::abs(f_old - f_new) <= opts.param_tol * (1.0 + std::abs(f_new))) {
            res.grad_norm = g.norm();
            res.status = res.grad_norm < opts.grad_tol ? OptimizerStatus::Converged : OptimizerStatus::Stalled;
            ++res.iterations;
            break;
        }
    }
    if (res.iterations >= opts.max_iter) res.grad_norm = g.norm();
    res.evaluations = f.count;
    return res;
}

/// Nelder-Mead simplex (standard coefficients). Used as the fallback when the
/// gradient search stalls.
inline OptimizerResult minimize_nelder_mead(const Objective& objective, const Eigen::VectorXd& x0,
                                            std::size_t max_iter = 2000, double initial_step = 0.1,
                                            double ftol = 1e-12) {
    detail::CountingObjective f{objective};
    const Eigen::Index k = x0.size();
    const auto n = static_cast<std::size_t>(k) + 1;
    std::vector<Eigen::VectorXd> pts(n, x0);
    std::vector<double> vals(n);
    for (Eigen::Index i = 0; i < k; ++i) pts[static_cast<std::size_t>(i) + 1][i] += initial_step;
    for (std::size_t i = 0; i < n; ++i) vals[i] = f(pts[i]);

    std::vector<std::size_t> order(n);
    OptimizerResult res;
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 2];
        if (std::abs(vals[worst] - vals[best]) <= ftol * (1.0 + std::abs(vals[best]))) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(k);
        for (std::size_t i = 0; i + 1 < n; ++i) centroid += pts[order[i]];
        centroid /= static_cast<double>(k);

        const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
        const double fr = f(xr);
        if (fr < vals[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Eigen::VectorXd xc =
            outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = f(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            vals[i] = f(pts[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.fx = vals[best];
    res.iterations = it;
    res.evaluations = f.count;
    res.status = it < max_iter ? OptimizerStatus::Converged : OptimizerStatus::MaxIterations;
    return res;
}

}  // namespace tvparx
