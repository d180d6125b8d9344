#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "tvparx/error.hpp"
#include "tvparx/model.hpp"
#include "tvparx/simulate.hpp"

namespace tvparx {

/// Sufficient conditions for a stationary, ergodic intensity.
struct StationarityReport {
    double alpha_bar = 0.0;
    bool cond_phi = false;      // |phi_alpha| < 1
    bool cond_beta = false;     // 0 < beta < 1
    bool cond_product = false;  // beta |beta + alpha_bar| < 1
    std::vector<bool> gamma_conds;  // |phi_gamma_j| < 1
    bool all_satisfied = false;

    bool operator==(const StationarityReport&) const = default;
};

inline StationarityReport check_stationarity(const ParamVector& theta) {
    if (theta.alpha.phi == 1.0) {
        throw Error(ErrorKind::DomainError, "phi_alpha = 1 leaves the mean of alpha undefined");
    }
    StationarityReport r;
    r.alpha_bar = theta.alpha.delta / (1.0 - theta.alpha.phi);
    r.cond_phi = std::abs(theta.alpha.phi) < 1.0;
    r.cond_beta = theta.beta > 0.0 && theta.beta < 1.0;
    r.cond_product = theta.beta * std::abs(theta.beta + r.alpha_bar) < 1.0;
    r.all_satisfied = r.cond_phi && r.cond_beta && r.cond_product;
    for (const auto& g : theta.gamma) {
        r.gamma_conds.push_back(std::abs(g.phi) < 1.0);
        r.all_satisfied = r.all_satisfied && r.gamma_conds.back();
    }
    return r;
}

/// Pointwise, sample-based analogue of the filter contraction condition.
struct InvertibilityReport {
    double ell = 0.0;
    double empirical_log_contraction = 0.0;
    bool satisfied_empirically = false;

    bool operator==(const InvertibilityReport&) const = default;
};

/// Lower bound ell = (omega - (delta_alpha + kappa_alpha) / (1 - phi_alpha)) / (1 - beta).
inline double invertibility_bound(const ParamVector& theta) {
    const auto& a = theta.alpha;
    return (theta.omega - (a.delta + a.kappa) / (1.0 - a.phi)) / (1.0 - theta.beta);
}

/// Evaluates the mean over t of log|beta exp{omega + abar_{t+1}(y_t e^{-ell} - 1) - ell(1 - beta)}|
/// along the observed counts, where abar follows the alpha recursion driven by
/// (y_t e^{-ell} - 1)(y_{t-1} e^{-ell} - 1) and the pre-sample factor is zero.
inline InvertibilityReport check_invertibility(const ParamVector& theta, const SeriesData& data) {
    const auto& a = theta.alpha;
    if (!(a.kappa > 0.0) || !(std::abs(a.phi) < 1.0) || !(theta.beta > 0.0 && theta.beta < 1.0)) {
        throw Error(ErrorKind::DomainError, "invertibility check needs kappa_alpha > 0, |phi_alpha| < 1, 0 < beta < 1");
    }
    if (data.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least two observations");

    InvertibilityReport r;
    r.ell = invertibility_bound(theta);
    const double scale = std::exp(-r.ell);
    const double log_beta = std::log(theta.beta);
    double abar = a.delta / (1.0 - a.phi);
    double prev = 0.0;
    double sum = 0.0;
    const std::size_t n = data.size();
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double cur = static_cast<double>(data.y[t]) * scale - 1.0;
        abar = a.delta + a.phi * abar + a.kappa * cur * prev;
        sum += log_beta + theta.omega + abar * cur - r.ell * (1.0 - theta.beta);
        prev = cur;
    }
    r.empirical_log_contraction = sum / static_cast<double>(n - 1);
    r.satisfied_empirically = r.empirical_log_contraction < 0.0;
    return r;
}

/// Advisory simulation summary of the moments implied by theta.
struct MomentReport {
    std::size_t order = 0;
    double mean_y = 0.0;
    double moment_y = 0.0;          // mean of y^k
    double moment_y_se = 0.0;       // naive standard error of moment_y
    double moment_log_lambda = 0.0; // mean of |log lambda|^k
    double tail_index = 0.0;        // Hill estimate on the upper 5% of y
    double saturation_fraction = 0.0;
    bool finite = true;
    bool saturation_warning = false;
    StationarityReport stationarity;
};

inline MomentReport moment_sanity(const ParamVector& theta, std::size_t n, std::size_t order, std::uint64_t seed) {
    if (n < 3 || order == 0) throw Error(ErrorKind::InvalidArgument, "need T >= 3 and k >= 1");
    MomentReport r;
    r.order = order;
    r.stationarity = check_stationarity(theta);

    const FilterInit init = unconditional_init(theta);
    SimulateOptions opts;
    opts.max_saturation_fraction = 1.0;
    const auto sim = simulate(theta, n, Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(theta.gamma.size())),
                              Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(theta.psi.size())), init, seed, opts);

    const auto k = static_cast<double>(order);
    double s1 = 0.0, sk = 0.0, sk2 = 0.0, sl = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double y = static_cast<double>(sim.data.y[t]);
        const double yk = std::pow(y, k);
        s1 += y;
        sk += yk;
        sk2 += yk * yk;
        sl += std::pow(std::abs(sim.path.log_lambda[t]), k);
    }
    const double nn = static_cast<double>(n);
    r.mean_y = s1 / nn;
    r.moment_y = sk / nn;
    r.moment_y_se = std::sqrt(std::max(0.0, sk2 / nn - r.moment_y * r.moment_y) / nn);
    r.moment_log_lambda = sl / nn;
    r.saturation_fraction = static_cast<double>(sim.path.clamp_upper) / nn;
    r.finite = std::isfinite(r.moment_y) && std::isfinite(r.moment_log_lambda) && sim.path.non_finite == 0;
    r.saturation_warning = sim.path.clamp_upper > 0 || !r.finite;

    std::vector<double> ys;
    for (auto v : sim.data.y) {
        if (v > 0) ys.push_back(static_cast<double>(v));
    }
    std::sort(ys.begin(), ys.end(), std::greater<>());
    const std::size_t tail = std::max<std::size_t>(10, ys.size() / 20);
    if (ys.size() > tail) {
        double h = 0.0;
        for (std::size_t i = 0; i < tail; ++i) h += std::log(ys[i] / ys[tail]);
        h /= static_cast<double>(tail);
        r.tail_index = h > 0.0 ? 1.0 / h : std::numeric_limits<double>::infinity();
    } else {
        r.tail_index = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

}  // namespace tvparx
