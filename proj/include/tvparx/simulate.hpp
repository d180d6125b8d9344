#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "tvparx/error.hpp"
#include "tvparx/filter.hpp"
#include "tvparx/model.hpp"
#include "tvparx/poisson.hpp"
#include "tvparx/rng.hpp"

namespace tvparx {

struct SimulateOptions {
    /// OverflowGuard fires when log lambda sits at the upper clamp in more than
    /// this fraction of periods. Set >= 1 to disable.
    double max_saturation_fraction = 0.05;
};

struct Simulation {
    SeriesData data;
    FilterPath path;  // true latent path
};

/// Start at the covariate-free unconditional level: log lambda = omega / (1 - beta),
/// alpha and gamma at their AR(1) means.
inline FilterInit unconditional_init(const ParamVector& theta) {
    FilterInit init;
    const double start = theta.beta < 1.0 ? theta.omega / (1.0 - theta.beta) : theta.omega;
    init.lambda1 = std::exp(std::clamp(start, kLogLambdaMin, kLogLambdaMax));
    init.alpha1 = theta.alpha.unconditional_mean();
    for (const auto& g : theta.gamma) init.gamma1.push_back(g.unconditional_mean());
    return init;
}

/// Draws y_t ~ Poisson(lambda_t) sequentially, feeding each draw back into the
/// recursion. Same seed, same output.
inline Simulation simulate(const ParamVector& theta, std::size_t n, const Matrix& x, const Matrix& dmat,
                           const FilterInit& init, std::uint64_t seed, const SimulateOptions& opts = {}) {
    if (n < 3) throw Error(ErrorKind::InvalidArgument, "simulation length must be at least 3");
    if (!theta.all_finite()) {
        throw Error(ErrorKind::NonFiniteParameter, "parameter vector has a non-finite entry");
    }
    const auto rows = static_cast<Eigen::Index>(n);
    const auto m = static_cast<Eigen::Index>(theta.gamma.size());
    const auto d = static_cast<Eigen::Index>(theta.psi.size());
    Simulation sim;
    sim.data.x = (m == 0 && x.size() == 0) ? Matrix(rows, 0) : x;
    sim.data.dmat = (d == 0 && dmat.size() == 0) ? Matrix(rows, 0) : dmat;
    if (sim.data.x.rows() != rows || sim.data.x.cols() != m || sim.data.dmat.rows() != rows ||
        sim.data.dmat.cols() != d) {
        throw Error(ErrorKind::DimensionMismatch, "covariate matrices must be T x m and T x d");
    }
    sim.data.y.resize(n);

    FilterPath& path = sim.path;
    path.lambda.resize(n);
    path.log_lambda.resize(n);
    path.alpha.resize(n);
    path.gamma = Matrix(rows, m);
    path.innov.resize(n);
    path.loglik_terms.resize(n);

    Rng rng(seed);
    Recursion rec(theta, init);
    for (std::size_t t = 0; t < n; ++t) {
        const auto draw = sample_poisson(rng, rec.lambda());
        sim.data.y[t] = draw;
        const double y = static_cast<double>(draw);
        path.lambda[t] = rec.lambda();
        path.log_lambda[t] = rec.log_lambda();
        path.alpha[t] = rec.alpha();
        const auto g = rec.gamma();
        std::copy(g.begin(), g.end(), path.gamma.row(static_cast<Eigen::Index>(t)).data());
        path.innov[t] = rec.innovation(y);
        path.loglik_terms[t] = y * rec.log_lambda() - rec.lambda();
        if (t + 1 < n) rec.observe(y, sim.data.x_row(t), sim.data.d_row(t));
    }
    path.clamp_upper = rec.clamp_upper();
    path.clamp_lower = rec.clamp_lower();
    path.non_finite = rec.non_finite();

    if (opts.max_saturation_fraction < 1.0 &&
        (path.non_finite > 0 ||
         static_cast<double>(path.clamp_upper) > opts.max_saturation_fraction * static_cast<double>(n))) {
        throw Error(ErrorKind::OverflowGuard,
                    "log intensity saturated in " + std::to_string(path.clamp_upper) + " of " +
                        std::to_string(n) + " periods; parameterization looks explosive");
    }
    return sim;
}

struct ForecastResult {
    /// E[y_{T+h} | F_T], h = 1..H. Exact at h = 1, Monte Carlo beyond.
    std::vector<double> mean;
    /// Monte Carlo standard error of `mean` (zero at h = 1).
    std::vector<double> mean_se;
    std::vector<std::int64_t> q05;
    std::vector<std::int64_t> q50;
    std::vector<std::int64_t> q95;
    double lambda_next = 0.0;
    double alpha_next = 0.0;
    std::vector<double> gamma_next;
};

/// Smallest k with P(Y <= k) >= p for Y ~ Poisson(lambda).
inline std::int64_t poisson_quantile(double lambda, double p) {
    if (lambda <= 0.0) return 0;
    double term = std::exp(-lambda);
    double cdf = term;
    std::int64_t k = 0;
    if (term == 0.0) {  // e^{-lambda} underflows: start the walk far in the left tail
        k = static_cast<std::int64_t>(std::max(0.0, lambda - 10.0 * std::sqrt(lambda)));
        term = std::exp(-lambda + static_cast<double>(k) * std::log(lambda) -
                        std::lgamma(static_cast<double>(k) + 1.0));
        cdf = term;
    }
    while (cdf < p) {
        ++k;
        term *= lambda / static_cast<double>(k);
        cdf += term;
    }
    return k;
}

namespace detail {
inline std::int64_t empirical_quantile(std::vector<std::int64_t>& v, double p) {
    const auto n = v.size();
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    idx = std::clamp<std::size_t>(idx, 1, n) - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}
}  // namespace detail

/// Forecasts y_{T+1..T+H} from the filtered path at theta.
///
/// Row i of `future_x` / `future_d` holds the regressors of period T+1+i; only
/// rows 0..H-2 enter the intensity.
inline ForecastResult forecast(const FilterPath& path, const SeriesData& data, const ParamVector& theta,
                               std::size_t horizon, std::size_t n_paths, std::uint64_t seed,
                               const Matrix& future_x, const Matrix& future_d) {
    check_compatible(data, theta);
    if (horizon == 0 || n_paths == 0) {
        throw Error(ErrorKind::InvalidArgument, "horizon and n_paths must be positive");
    }
    const std::size_t n = data.size();
    if (path.size() != n || n < 2) {
        throw Error(ErrorKind::DimensionMismatch, "path does not belong to the data");
    }
    const auto m = static_cast<Eigen::Index>(theta.gamma.size());
    const auto d = static_cast<Eigen::Index>(theta.psi.size());
    const auto h_rows = static_cast<Eigen::Index>(horizon);
    const bool x_ok = (future_x.rows() == h_rows && future_x.cols() == m) || (m == 0 && future_x.size() == 0);
    const bool d_ok = (future_d.rows() == h_rows && future_d.cols() == d) || (d == 0 && future_d.size() == 0);
    if (!x_ok || !d_ok) {
        throw Error(ErrorKind::DimensionMismatch, "future covariates must be horizon x m and horizon x d");
    }
    const Matrix fx = future_x.size() == 0 ? Matrix(h_rows, m) : future_x;
    const Matrix fd = future_d.size() == 0 ? Matrix(h_rows, d) : future_d;

    const std::size_t last = n - 1;
    std::vector<double> gamma_last(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) gamma_last[static_cast<std::size_t>(j)] = path.gamma(static_cast<Eigen::Index>(last), j);
    Recursion next(theta, path.log_lambda[last], path.alpha[last], gamma_last, path.innov[last - 1]);
    next.observe(static_cast<double>(data.y[last]), data.x_row(last), data.d_row(last));

    ForecastResult out;
    out.lambda_next = next.lambda();
    out.alpha_next = next.alpha();
    out.gamma_next.assign(next.gamma().begin(), next.gamma().end());
    out.mean.assign(horizon, 0.0);
    out.mean_se.assign(horizon, 0.0);
    out.q05.resize(horizon);
    out.q50.resize(horizon);
    out.q95.resize(horizon);

    out.mean[0] = out.lambda_next;
    out.q05[0] = poisson_quantile(out.lambda_next, 0.05);
    out.q50[0] = poisson_quantile(out.lambda_next, 0.50);
    out.q95[0] = poisson_quantile(out.lambda_next, 0.95);
    if (horizon == 1) return out;

    std::vector<std::vector<std::int64_t>> draws(horizon, std::vector<std::int64_t>(n_paths));
    std::vector<double> lam_sum(horizon, 0.0);
    std::vector<double> lam_sq(horizon, 0.0);
    Rng rng(seed);
    for (std::size_t p = 0; p < n_paths; ++p) {
        Recursion rec = next;
        for (std::size_t h = 0; h < horizon; ++h) {
            const double lam = rec.lambda();
            lam_sum[h] += lam;
            lam_sq[h] += lam * lam;
            const auto y = sample_poisson(rng, lam);
            draws[h][p] = y;
            if (h + 1 < horizon) {
                const auto row = static_cast<std::size_t>(h);
                rec.observe(static_cast<double>(y),
                            std::span<const double>(fx.data() + row * static_cast<std::size_t>(m), static_cast<std::size_t>(m)),
                            std::span<const double>(fd.data() + row * static_cast<std::size_t>(d), static_cast<std::size_t>(d)));
            }
        }
    }
    const double np = static_cast<double>(n_paths);
    for (std::size_t h = 1; h < horizon; ++h) {
        const double mu = lam_sum[h] / np;
        out.mean[h] = mu;
        const double var = n_paths > 1 ? std::max(0.0, (lam_sq[h] - np * mu * mu) / (np - 1.0)) : 0.0;
        out.mean_se[h] = std::sqrt(var / np);
        out.q05[h] = detail::empirical_quantile(draws[h], 0.05);
        out.q50[h] = detail::empirical_quantile(draws[h], 0.50);
        out.q95[h] = detail::empirical_quantile(draws[h], 0.95);
    }
    return out;
}

}  // namespace tvparx
