#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "tvparx/error.hpp"
#include "tvparx/model.hpp"

namespace tvparx {

/// One-step state of the score-driven recursion.
///
/// Holds log lambda_t, alpha_t, gamma_t and the previous innovation e_{t-1}.
/// `observe` consumes y_t with the period-t regressors and advances to t+1.
/// Filtering, simulation and forecasting all drive this same object.
class Recursion {
public:
    Recursion(const ParamVector& theta, const FilterInit& init)
        : theta_(&theta), alpha_(init.alpha1), gamma_(init.gamma1) {
        if (gamma_.size() != theta.gamma.size()) {
            throw Error(ErrorKind::DimensionMismatch, "init.gamma1 does not match the covariate count");
        }
        if (!(init.lambda1 > 0.0)) {
            throw Error(ErrorKind::DomainError, "initial intensity must be positive");
        }
        log_lambda_ = clamp(std::log(init.lambda1));
        lambda_ = std::exp(log_lambda_);
    }

    /// Resumes from a stored period-t state (log lambda_t, alpha_t, gamma_t, e_{t-1}).
    Recursion(const ParamVector& theta, double log_lambda, double alpha, std::vector<double> gamma,
              double previous_innovation)
        : theta_(&theta), alpha_(alpha), gamma_(std::move(gamma)), prev_innov_(previous_innovation) {
        if (gamma_.size() != theta.gamma.size()) {
            throw Error(ErrorKind::DimensionMismatch, "gamma state does not match the covariate count");
        }
        log_lambda_ = clamp(log_lambda);
        lambda_ = std::exp(log_lambda_);
    }

    [[nodiscard]] double log_lambda() const { return log_lambda_; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] std::span<const double> gamma() const { return gamma_; }
    [[nodiscard]] double previous_innovation() const { return prev_innov_; }
    [[nodiscard]] std::size_t clamp_upper() const { return clamp_upper_; }
    [[nodiscard]] std::size_t clamp_lower() const { return clamp_lower_; }
    [[nodiscard]] std::size_t non_finite() const { return non_finite_; }

    /// Scaled innovation e_t = (y_t - lambda_t) / lambda_t at the current state.
    [[nodiscard]] double innovation(double y) const { return (y - lambda_) / lambda_; }

    /// Advances the state from t to t+1 and returns e_t.
    double observe(double y, std::span<const double> x, std::span<const double> d) {
        const ParamVector& th = *theta_;
        const double e = innovation(y);

        alpha_ = th.alpha.delta + th.alpha.phi * alpha_ + th.alpha.kappa * e * prev_innov_;
        double eta = th.omega + th.beta * log_lambda_ + alpha_ * e;
        for (std::size_t j = 0; j < gamma_.size(); ++j) {
            const auto& g = th.gamma[j];
            gamma_[j] = g.delta + g.phi * gamma_[j] + g.kappa * e * x[j];
            eta += gamma_[j] * x[j];
        }
        for (std::size_t i = 0; i < th.psi.size(); ++i) eta += th.psi[i] * d[i];

        if (!std::isfinite(alpha_)) ++non_finite_;
        log_lambda_ = clamp(eta);
        lambda_ = std::exp(log_lambda_);
        prev_innov_ = e;
        return e;
    }

private:
    double clamp(double v) {
        if (std::isnan(v)) {
            ++non_finite_;
            ++clamp_upper_;
            return kLogLambdaMax;
        }
        if (v > kLogLambdaMax) {
            ++clamp_upper_;
            return kLogLambdaMax;
        }
        if (v < kLogLambdaMin) {
            ++clamp_lower_;
            return kLogLambdaMin;
        }
        return v;
    }

    const ParamVector* theta_;
    double log_lambda_ = 0.0;
    double lambda_ = 1.0;
    double alpha_ = 0.0;
    std::vector<double> gamma_;
    double prev_innov_ = 0.0;  // e_0 = 0
    std::size_t clamp_upper_ = 0;
    std::size_t clamp_lower_ = 0;
    std::size_t non_finite_ = 0;
};

/// Checks that theta is finite and its blocks match the data widths.
inline void check_compatible(const SeriesData& data, const ParamVector& theta) {
    if (!theta.all_finite()) {
        throw Error(ErrorKind::NonFiniteParameter, "parameter vector has a non-finite entry");
    }
    if (theta.gamma.size() != data.n_covariates() || theta.psi.size() != data.n_deterministics()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "theta has " + std::to_string(theta.gamma.size()) + " covariate and " +
                        std::to_string(theta.psi.size()) + " deterministic coefficients, data has " +
                        std::to_string(data.n_covariates()) + " and " +
                        std::to_string(data.n_deterministics()));
    }
    const auto n = static_cast<Eigen::Index>(data.size());
    if (data.x.rows() != n || data.dmat.rows() != n) {
        throw Error(ErrorKind::DimensionMismatch, "covariate matrices must have one row per count");
    }
}

/// Starting values: sample mean for the intensity (floored) and the
/// unconditional means of the coefficient recursions.
inline FilterInit default_init(const SeriesData& data, const ParamVector& theta) {
    FilterInit init;
    init.lambda1 = std::max(data.mean_count(), kLambdaFloor);
    init.alpha1 = theta.alpha.unconditional_mean();
    init.gamma1.reserve(theta.gamma.size());
    for (const auto& g : theta.gamma) init.gamma1.push_back(g.unconditional_mean());
    return init;
}

/// Runs the recursion over the sample and calls `visit(t, state, y_t, e_t)`
/// before advancing, with `state` describing period t. Returns the state at T.
template <class Visitor>
Recursion run_recursion(const SeriesData& data, const ParamVector& theta, const FilterInit& init,
                        Visitor&& visit) {
    check_compatible(data, theta);
    Recursion rec(theta, init);
    const std::size_t n = data.size();
    for (std::size_t t = 0; t < n; ++t) {
        const double y = static_cast<double>(data.y[t]);
        visit(t, rec, y, rec.innovation(y));
        if (t + 1 < n) rec.observe(y, data.x_row(t), data.d_row(t));
    }
    return rec;
}

/// Filtered path at fixed theta. Pure: identical inputs give bit-identical output.
inline FilterPath filter(const SeriesData& data, const ParamVector& theta, const FilterInit& init) {
    const std::size_t n = data.size();
    const std::size_t m = theta.gamma.size();
    FilterPath path;
    path.lambda.resize(n);
    path.log_lambda.resize(n);
    path.alpha.resize(n);
    path.gamma = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    path.innov.resize(n);
    path.loglik_terms.resize(n);

    const Recursion last = run_recursion(
        data, theta, init,
        [&](std::size_t t, const Recursion& s, double y, double e) {
            path.lambda[t] = s.lambda();
            path.log_lambda[t] = s.log_lambda();
            path.alpha[t] = s.alpha();
            const auto g = s.gamma();
            std::copy(g.begin(), g.end(), path.gamma.row(static_cast<Eigen::Index>(t)).data());
            path.innov[t] = e;
            path.loglik_terms[t] = y * s.log_lambda() - s.lambda();
        });
    path.clamp_upper = last.clamp_upper();
    path.clamp_lower = last.clamp_lower();
    path.non_finite = last.non_finite();
    return path;
}

/// Unnormalized log-likelihood sum_t (y_t log lambda_t - lambda_t), omitting log y_t!.
/// Returns -infinity when the recursion produced a non-finite state.
inline double loglik(const SeriesData& data, const ParamVector& theta, const FilterInit& init) {
    double sum = 0.0;
    const Recursion last = run_recursion(data, theta, init, [&](std::size_t, const Recursion& s, double y, double) {
        sum += y * s.log_lambda() - s.lambda();
    });
    if (last.non_finite() > 0 || !std::isfinite(sum)) return -std::numeric_limits<double>::infinity();
    return sum;
}

}  // namespace tvparx
