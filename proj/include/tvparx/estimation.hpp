#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvparx/diagnostics.hpp"
#include "tvparx/error.hpp"
#include "tvparx/filter.hpp"
#include "tvparx/model.hpp"
#include "tvparx/optimize.hpp"
#include "tvparx/parallel.hpp"
#include "tvparx/rng.hpp"
#include "tvparx/transform.hpp"

namespace tvparx {

struct InformationCriteria {
    double aic = 0.0;
    double hqc = 0.0;
    double bic = 0.0;
};

/// AIC = -2 ll + 2k, HQC = -2 ll + 2k ln ln T, BIC = -2 ll + k ln T.
inline InformationCriteria information_criteria(double loglik, double k, double n_obs) {
    if (n_obs < 2.0) throw Error(ErrorKind::InvalidArgument, "information criteria need T >= 2");
    const double dev = -2.0 * loglik;
    const double log_t = std::log(n_obs);
    return {dev + 2.0 * k, dev + 2.0 * k * std::log(log_t), dev + k * log_t};
}

enum class CovarianceKind { Hessian, Sandwich, Both };

struct CovarianceEstimate {
    Eigen::MatrixXd information;  // J: minus the Hessian of the mean log-likelihood
    Eigen::MatrixXd opg;          // I: mean outer product of per-period scores
    Eigen::MatrixXd vcov_hessian;   // J^-1 / T
    Eigen::MatrixXd vcov_sandwich;  // J^-1 I J^-1 / T
    Eigen::VectorXd eigenvalues;    // of J, ascending
    bool singular = false;
    double step_rel = 0.0;          // relative step that produced J
};

namespace detail {
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Inverse of a symmetric matrix, or its pseudo-inverse when not positive definite.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& j, Eigen::VectorXd& eig, bool& singular) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    eig = es.eigenvalues();
    const double top = eig.size() > 0 ? eig.cwiseAbs().maxCoeff() : 0.0;
    const double tol = 1e-10 * std::max(top, std::numeric_limits<double>::min());
    singular = eig.size() > 0 && eig.minCoeff() <= tol;
    if (!singular) return symmetrize(es.eigenvectors() * eig.cwiseInverse().asDiagonal() * es.eigenvectors().transpose());
    Eigen::VectorXd inv = eig;
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = std::abs(eig[i]) > tol ? 1.0 / eig[i] : 0.0;
    return symmetrize(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
}
}  // namespace detail

namespace detail {
template <class TermsFn>
CovarianceEstimate covariance_at_step(TermsFn& terms, const Eigen::VectorXd& theta, double step_rel) {
    const Eigen::Index k = theta.size();
    const std::vector<double> base = terms(theta);
    const auto n = base.size();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "no likelihood terms");
    const double nn = static_cast<double>(n);
    auto mean_of = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / nn;
    };
    const Objective mean_fn = [&](const Eigen::VectorXd& x) { return mean_of(terms(x)); };

    Eigen::VectorXd h(k);
    for (Eigen::Index i = 0; i < k; ++i) h[i] = fd_step(theta[i], step_rel);

    // per-period scores from the same +/- h_i evaluations used on the diagonal
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), k);
    Eigen::MatrixXd hess(k, k);
    const double f0 = mean_of(base);
    Eigen::VectorXd xp = theta;
    for (Eigen::Index i = 0; i < k; ++i) {
        xp[i] = theta[i] + h[i];
        const auto plus = terms(xp);
        xp[i] = theta[i] - h[i];
        const auto minus = terms(xp);
        xp[i] = theta[i];
        for (std::size_t t = 0; t < n; ++t) {
            scores(static_cast<Eigen::Index>(t), i) = (plus[t] - minus[t]) / (2.0 * h[i]);
        }
        hess(i, i) = (mean_of(plus) - 2.0 * f0 + mean_of(minus)) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            auto at = [&](double si, double sj) {
                xp[i] = theta[i] + si * h[i];
                xp[j] = theta[j] + sj * h[j];
                const double v = mean_fn(xp);
                xp[i] = theta[i];
                xp[j] = theta[j];
                return v;
            };
            const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h[i] * h[j]);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }

    CovarianceEstimate est;
    est.information = detail::symmetrize(-hess);
    est.opg = detail::symmetrize(scores.transpose() * scores / nn);
    const Eigen::MatrixXd j_inv = detail::spd_inverse(est.information, est.eigenvalues, est.singular);
    est.vcov_hessian = detail::symmetrize(j_inv / nn);
    est.vcov_sandwich = detail::symmetrize(j_inv * est.opg * j_inv / nn);
    est.step_rel = step_rel;
    return est;
}
}  // namespace detail

/// Numerical Hessian and OPG covariance from per-period log-likelihood terms.
///
/// `terms(theta)` returns l_1..l_T; the objective is their mean. Steps are
/// h_i = step_rel * max(1, |theta_i|) in the coordinates of `theta`. When J is
/// not positive definite the step shrinks tenfold, up to `refinements` times,
/// since a sharply peaked likelihood can be narrower than the default step.
template <class TermsFn>
CovarianceEstimate covariance_from_terms(TermsFn&& terms, const Eigen::VectorXd& theta,
                                         double step_rel = kHessianStepRel, int refinements = 3) {
    CovarianceEstimate first = detail::covariance_at_step(terms, theta, step_rel);
    double step = step_rel;
    for (int r = 0; r < refinements && first.singular; ++r) {
        step /= 10.0;
        CovarianceEstimate finer = detail::covariance_at_step(terms, theta, step);
        if (!finer.singular) return finer;
    }
    return first;
}

/// Covariance of the free parameters of `spec` at theta_hat, using the
/// default initialization rule at every evaluated theta.
inline CovarianceEstimate covariance(const SeriesData& data, const ModelSpec& spec, const ParamVector& theta_hat,
                                     double step_rel = kHessianStepRel) {
    const ParamLayout layout(spec);
    auto terms = [&](const Eigen::VectorXd& v) {
        const ParamVector th = layout.unpack(v);
        return filter(data, th, default_init(data, th)).loglik_terms;
    };
    return covariance_from_terms(terms, layout.pack(theta_hat), step_rel);
}

/// Same, with a fixed initialization shared by every evaluated theta.
inline CovarianceEstimate covariance(const SeriesData& data, const ModelSpec& spec, const ParamVector& theta_hat,
                                     const FilterInit& init, double step_rel = kHessianStepRel) {
    const ParamLayout layout(spec);
    auto terms = [&](const Eigen::VectorXd& v) { return filter(data, layout.unpack(v), init).loglik_terms; };
    return covariance_from_terms(terms, layout.pack(theta_hat), step_rel);
}

struct FitOptions {
    std::size_t n_starts = 8;
    std::size_t max_iter = 500;
    double grad_tol = 1e-6;
    double param_tol = 1e-10;
    double fd_step_rel = kGradientStepRel;
    double hessian_step_rel = kHessianStepRel;
    std::uint64_t seed = 0;
    CovarianceKind covariance_kind = CovarianceKind::Both;
    double jitter = 0.25;
    /// Search box in unconstrained coordinates; |u_i| beyond it scores -inf log-likelihood.
    double max_abs_unconstrained = 30.0;
    std::size_t threads = 1;
    std::size_t min_obs_per_param = 10;
    bool compute_covariance = true;
    bool compute_diagnostics = true;
    /// Unjittered starting point; defaults to `starting_point`.
    std::optional<ParamVector> start;
};

enum class FitStatus { Converged, NotConverged, DegenerateData };

inline constexpr std::string_view to_string(FitStatus s) noexcept {
    switch (s) {
    case FitStatus::Converged: return "converged";
    case FitStatus::NotConverged: return "not_converged";
    case FitStatus::DegenerateData: return "degenerate_data";
    }
    return "unknown";
}

struct ConvergenceReport {
    FitStatus status = FitStatus::NotConverged;
    bool converged = false;
    std::size_t iterations = 0;
    double grad_norm = std::numeric_limits<double>::infinity();
    std::size_t best_start = 0;
    std::vector<double> start_loglik;  // at each starting point
    std::vector<double> final_loglik;  // at each start's optimum
};

struct FitResult {
    ModelSpec spec;
    ParamVector theta_hat;
    std::vector<std::string> names;
    std::size_t n_obs = 0;
    std::size_t k = 0;
    double loglik = 0.0;
    InformationCriteria criteria;
    Eigen::MatrixXd vcov_hessian;
    Eigen::MatrixXd vcov_sandwich;
    std::vector<double> std_errors;           // from the Hessian unless only the sandwich was requested
    std::vector<double> std_errors_hessian;
    std::vector<double> std_errors_sandwich;
    bool information_singular = false;
    std::vector<double> information_eigenvalues;
    FilterInit init;
    FilterPath path;
    double rmse_in_sample = 0.0;
    ConvergenceReport convergence;
    std::optional<StationarityReport> stationarity;
    std::optional<InvertibilityReport> invertibility;
};

/// Moment-matched start: beta = 0.9, omega = (1 - beta) log mean(y).
inline ParamVector starting_point(const SeriesData& data, const ModelSpec& spec) {
    ParamVector th;
    th.beta = 0.9;
    th.omega = (1.0 - th.beta) * std::log(std::max(data.mean_count(), kLambdaFloor));
    th.psi.assign(spec.n_deterministics, 0.0);
    th.alpha = spec.alpha_time_varying ? CoefficientBlock{0.05, 0.5, 0.05} : CoefficientBlock{0.1, 0.0, 0.0};
    for (bool tv : spec.gamma_time_varying) {
        th.gamma.push_back(tv ? CoefficientBlock{0.0, 0.5, 0.0} : CoefficientBlock{});
    }
    return th;
}

/// Time-varying start matching a static fit: loadings keep their level with phi = 0.5.
inline ParamVector staged_start(const ParamVector& stat, const ModelSpec& spec) {
    ParamVector th = stat;
    if (spec.alpha_time_varying) th.alpha = {0.5 * stat.alpha.delta, 0.5, 0.05};
    for (std::size_t j = 0; j < spec.gamma_time_varying.size(); ++j) {
        if (spec.gamma_time_varying[j]) th.gamma[j] = {0.5 * stat.gamma[j].delta, 0.5, 0.0};
    }
    return th;
}

namespace detail {
inline std::vector<double> sqrt_diag(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, m(i, i)));
    return out;
}

inline void check_fit_inputs(const SeriesData& data, const ModelSpec& spec, const FitOptions& opts) {
    spec.validate();
    data.validate(3);
    if (data.n_covariates() != spec.n_covariates || data.n_deterministics() != spec.n_deterministics) {
        throw Error(ErrorKind::DimensionMismatch, "data columns do not match the model spec");
    }
    if (opts.n_starts == 0 || !(opts.grad_tol > 0.0) || !(opts.param_tol > 0.0) || !(opts.fd_step_rel > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "fit tolerances must be positive and n_starts >= 1");
    }
    const std::size_t k = spec.n_free();
    if (data.size() < opts.min_obs_per_param * k) {
        throw Error(ErrorKind::InvalidArgument, "T = " + std::to_string(data.size()) + " is below " +
                                                    std::to_string(opts.min_obs_per_param) + " x k = " +
                                                    std::to_string(opts.min_obs_per_param * k));
    }
}
}  // namespace detail

/// Fills loglik, criteria, path, covariance and diagnostics for a given theta.
inline void finalize_fit(FitResult& r, const SeriesData& data, const FitOptions& opts) {
    r.init = default_init(data, r.theta_hat);
    r.path = filter(data, r.theta_hat, r.init);
    r.loglik = 0.0;
    for (double v : r.path.loglik_terms) r.loglik += v;
    r.criteria = information_criteria(r.loglik, static_cast<double>(r.k), static_cast<double>(r.n_obs));
    double sse = 0.0;
    for (std::size_t t = 0; t < data.size(); ++t) {
        const double err = static_cast<double>(data.y[t]) - r.path.lambda[t];
        sse += err * err;
    }
    r.rmse_in_sample = std::sqrt(sse / static_cast<double>(data.size()));

    if (opts.compute_covariance && r.convergence.status != FitStatus::DegenerateData) {
        const auto est = covariance(data, r.spec, r.theta_hat, opts.hessian_step_rel);
        r.vcov_hessian = est.vcov_hessian;
        r.vcov_sandwich = est.vcov_sandwich;
        r.std_errors_hessian = detail::sqrt_diag(est.vcov_hessian);
        r.std_errors_sandwich = detail::sqrt_diag(est.vcov_sandwich);
        r.std_errors = opts.covariance_kind == CovarianceKind::Sandwich ? r.std_errors_sandwich : r.std_errors_hessian;
        r.information_singular = est.singular;
        r.information_eigenvalues.assign(est.eigenvalues.data(), est.eigenvalues.data() + est.eigenvalues.size());
    }
    if (opts.compute_diagnostics) {
        if (r.theta_hat.alpha.phi != 1.0) r.stationarity = check_stationarity(r.theta_hat);
        try {
            r.invertibility = check_invertibility(r.theta_hat, data);
        } catch (const Error&) {
            r.invertibility.reset();  // static alpha or boundary estimate: bound undefined
        }
    }
}

/// Poisson quasi-maximum-likelihood fit of the free parameters of `spec`.
///
/// Maximizes the mean log-likelihood in unconstrained coordinates from
/// `n_starts` seeded starting points and keeps the best. The first is the
/// moment-matched point, the second (for time-varying specs) is seeded from a
/// static fit, the rest jitter the first.
inline FitResult fit(const SeriesData& data, const ModelSpec& spec, const FitOptions& opts = {}) {
    detail::check_fit_inputs(data, spec, opts);
    const TransformMap map(spec);
    const std::size_t k = spec.n_free();

    FitResult r;
    r.spec = spec;
    r.names = map.layout().names();
    r.n_obs = data.size();
    r.k = k;

    const ParamVector start = opts.start ? *opts.start : starting_point(data, spec);
    if (std::all_of(data.y.begin(), data.y.end(), [](auto v) { return v == 0; })) {
        r.theta_hat = start;
        r.theta_hat.omega = (1.0 - start.beta) * kLogLambdaMin;
        r.convergence.status = FitStatus::DegenerateData;
        r.convergence.converged = false;
        finalize_fit(r, data, opts);
        return r;
    }

    const double nn = static_cast<double>(data.size());
    const Objective objective = [&](const Eigen::VectorXd& u) {
        if (u.cwiseAbs().maxCoeff() > opts.max_abs_unconstrained) return std::numeric_limits<double>::infinity();
        const ParamVector th = map.theta(u);
        if (!th.all_finite()) return std::numeric_limits<double>::infinity();
        return -loglik(data, th, default_init(data, th)) / nn;
    };
    OptimizerOptions oo;
    oo.max_iter = opts.max_iter;
    oo.grad_tol = opts.grad_tol;
    oo.param_tol = opts.param_tol;
    oo.fd_step_rel = opts.fd_step_rel;

    const Eigen::VectorXd u0 = map.to_unconstrained(start);
    // second start: time-varying loadings seeded from a static fit
    std::optional<Eigen::VectorXd> u_staged;
    if (!opts.start && opts.n_starts > 1 && spec.n_free() > ModelSpec::parx(spec.n_covariates, spec.n_deterministics).n_free()) {
        FitOptions so = opts;
        so.n_starts = 1;
        so.threads = 1;
        so.compute_covariance = false;
        so.compute_diagnostics = false;
        so.min_obs_per_param = 0;
        const auto stat = fit(data, ModelSpec::parx(spec.n_covariates, spec.n_deterministics), so);
        u_staged = map.to_unconstrained(staged_start(stat.theta_hat, spec));
    }
    std::vector<OptimizerResult> results(opts.n_starts);
    std::vector<double> start_values(opts.n_starts);
    parallel_for(opts.n_starts, opts.threads, [&](std::size_t s) {
        Eigen::VectorXd us = u0;
        if (s == 1 && u_staged) {
            us = *u_staged;
        } else if (s > 0) {
            Rng rng(derive_seed(opts.seed, s));
            for (Eigen::Index i = 0; i < us.size(); ++i) us[i] += opts.jitter * rng.normal();
        }
        start_values[s] = objective(us);
        OptimizerResult best = minimize_bfgs(objective, us, oo);
        std::size_t iters = best.iterations;
        // simplex restart when the gradient search stalls short of tolerance
        for (int attempt = 0; attempt < 2 && !best.converged(); ++attempt) {
            if (!std::isfinite(best.fx)) break;
            const auto nm = minimize_nelder_mead(objective, best.x, 400 * k);
            auto again = minimize_bfgs(objective, nm.fx < best.fx ? nm.x : best.x, oo);
            iters += again.iterations;
            if (again.fx <= best.fx || again.converged()) best = again;
        }
        best.iterations = iters;
        results[s] = best;
    });

    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s) {
        if (results[s].fx < results[best].fx) best = s;
    }
    const auto& opt = results[best];
    for (std::size_t s = 0; s < results.size(); ++s) {
        r.convergence.start_loglik.push_back(-start_values[s] * nn);
        r.convergence.final_loglik.push_back(-results[s].fx * nn);
    }
    r.convergence.best_start = best;
    r.convergence.iterations = opt.iterations;
    r.convergence.grad_norm = opt.grad_norm;
    r.convergence.converged = opt.converged();
    r.convergence.status = opt.converged() ? FitStatus::Converged : FitStatus::NotConverged;
    r.theta_hat = map.theta(opt.x);
    finalize_fit(r, data, opts);
    return r;
}

}  // namespace tvparx
