#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "tvparx/tvparx.hpp"

using namespace tvparx;

namespace {

ParamVector par_theta() {
    ParamVector th;
    th.omega = 0.2;
    th.beta = 0.7;
    th.alpha = {0.3, 0.0, 0.0};
    return th;
}

ParamVector tvpar_theta() {
    ParamVector th;
    th.omega = 0.1;
    th.beta = 0.8;
    th.alpha = {0.05, 0.5, 0.1};
    return th;
}

SeriesData draw(const ParamVector& th, std::size_t n, std::uint64_t seed) {
    return simulate(th, n, Matrix(), Matrix(), unconditional_init(th), seed).data;
}

}  // namespace

TEST(InformationCriteria, Zero) {
    const auto c = information_criteria(0.0, 0.0, 100.0);
    EXPECT_EQ(c.aic, 0.0);
    EXPECT_EQ(c.hqc, 0.0);
    EXPECT_EQ(c.bic, 0.0);
}

TEST(InformationCriteria, PublishedDifferences) {
    // criteria of the richer model minus the static one
    const auto d = information_criteria(15.11, 6, 360);
    EXPECT_NEAR(d.aic, -18.21, 0.02);
    EXPECT_NEAR(d.hqc, -8.94, 0.02);
    EXPECT_NEAR(d.bic, 5.10, 0.02);
    const auto c = information_criteria(422.53, 2, 464);
    EXPECT_NEAR(c.aic, -841.05, 0.1);
    EXPECT_NEAR(c.hqc, -837.79, 0.1);
    EXPECT_NEAR(c.bic, -832.78, 0.1);
}

TEST(InformationCriteria, ClosedForms) {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double ll = -1000.0 * rng.uniform();
        const double k = std::floor(1 + 20 * rng.uniform());
        const double n = std::floor(20 + 5000 * rng.uniform());
        const auto c = information_criteria(ll, k, n);
        EXPECT_DOUBLE_EQ(c.aic, -2 * ll + 2 * k);
        EXPECT_DOUBLE_EQ(c.hqc, -2 * ll + 2 * k * std::log(std::log(n)));
        EXPECT_DOUBLE_EQ(c.bic, -2 * ll + k * std::log(n));
    }
}

TEST(Transform, Examples) {
    const TransformMap map(ModelSpec::tv_parx(0, 0));
    ParamVector th;
    th.omega = 0.3;
    th.beta = 0.5;
    th.alpha = {0.1, 0.0, 1.0};
    const auto u = map.to_unconstrained(th);
    ASSERT_EQ(u.size(), 5);
    EXPECT_EQ(u[0], 0.3);
    EXPECT_EQ(u[1], 0.0);
    EXPECT_EQ(u[3], 0.0);
    EXPECT_EQ(u[4], 0.0);
    EXPECT_EQ(map.theta(u).beta, 0.5);
}

TEST(Transform, RoundTrip) {
    const ModelSpec spec{2, 1, true, {true, false}};
    const TransformMap map(spec);
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        ParamVector th;
        th.omega = 4 * rng.uniform() - 2;
        th.beta = 0.01 + 0.98 * rng.uniform();
        th.psi = {rng.normal()};
        th.alpha = {rng.normal(), 1.98 * rng.uniform() - 0.99, 0.001 + 3 * rng.uniform()};
        th.gamma = {{rng.normal(), 1.98 * rng.uniform() - 0.99, rng.normal()}, {rng.normal(), 0.0, 0.0}};
        const auto back = map.theta(map.to_unconstrained(th));
        const auto a = map.layout().pack(th);
        const auto b = map.layout().pack(back);
        for (Eigen::Index j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
    }
}

TEST(Transform, DomainErrors) {
    const TransformMap map(ModelSpec::tv_parx(0, 0));
    ParamVector th = tvpar_theta();
    for (auto mutate : std::vector<void (*)(ParamVector&)>{[](ParamVector& t) { t.beta = 1.0; },
                                                          [](ParamVector& t) { t.alpha.phi = -1.0; },
                                                          [](ParamVector& t) { t.alpha.kappa = 0.0; }}) {
        ParamVector bad = th;
        mutate(bad);
        try {
            (void)map.to_unconstrained(bad);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DomainError);
        }
    }
}

TEST(Covariance, QuadraticOracle) {
    Eigen::MatrixXd m(3, 3);
    m << 4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0;
    Eigen::VectorXd a(3);
    a << 0.3, -1.2, 2.5;
    Eigen::MatrixXd shifts(50, 3);
    Rng rng(4);
    for (Eigen::Index t = 0; t < 50; ++t)
        for (Eigen::Index j = 0; j < 3; ++j) shifts(t, j) = rng.normal();
    // per-period terms whose mean is -(theta - a)' M (theta - a) / 2 + linear noise with zero mean
    shifts.rowwise() -= shifts.colwise().mean();
    auto terms = [&](const Eigen::VectorXd& th) {
        const Eigen::VectorXd d = th - a;
        const double q = -0.5 * d.dot(m * d);
        std::vector<double> out(50);
        for (Eigen::Index t = 0; t < 50; ++t) out[static_cast<std::size_t>(t)] = q + shifts.row(t).dot(d);
        return out;
    };
    const auto est = covariance_from_terms(terms, a);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(est.information(i, j), m(i, j), 1e-6 * m.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd minv = m.inverse() / 50.0;
    EXPECT_LT((est.vcov_hessian - minv).cwiseAbs().maxCoeff(), 1e-6 * minv.cwiseAbs().maxCoeff());
    EXPECT_TRUE(est.vcov_hessian.isApprox(est.vcov_hessian.transpose(), 0.0));
    EXPECT_TRUE(est.vcov_sandwich.isApprox(est.vcov_sandwich.transpose(), 0.0));
    EXPECT_EQ(est.vcov_hessian, est.vcov_hessian.transpose());
    EXPECT_EQ(est.vcov_sandwich, est.vcov_sandwich.transpose());
    // scores at the optimum are the shifts, so I is their second moment
    const Eigen::MatrixXd opg = shifts.transpose() * shifts / 50.0;
    EXPECT_LT((est.opg - opg).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_FALSE(est.singular);
}

TEST(Covariance, SingularInformationFlagged) {
    auto terms = [](const Eigen::VectorXd& th) { return std::vector<double>(10, -0.5 * (th[0] + th[1]) * (th[0] + th[1])); };
    Eigen::VectorXd x(2);
    x << 0.0, 0.0;
    const auto est = covariance_from_terms(terms, x);
    EXPECT_TRUE(est.singular);
    EXPECT_TRUE(est.vcov_hessian.allFinite());
}

TEST(Covariance, StepShrinksForNarrowPeak) {
    // l(x) = -x^2 + x^4 / w^2: the second difference is -2 + 2 h^2 / w^2, so J = 2 - 2 h^2 / w^2
    const double w = 1e-5;
    auto terms = [&](const Eigen::VectorXd& th) {
        const double x = th[0];
        return std::vector<double>(4, -x * x + x * x * x * x / (w * w));
    };
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    const auto est = covariance_from_terms(terms, x);
    EXPECT_FALSE(est.singular);
    EXPECT_DOUBLE_EQ(est.step_rel, kHessianStepRel / 100.0);
    const double h = est.step_rel;
    EXPECT_NEAR(est.information(0, 0), 2.0 - 2.0 * h * h / (w * w), 1e-6);
    EXPECT_TRUE(covariance_from_terms(terms, x, kHessianStepRel, 0).singular);
}

TEST(Optimizer, Rosenbrock) {
    const Objective f = [](const Eigen::VectorXd& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    const auto r = minimize_bfgs(f, x0);
    EXPECT_EQ(r.status, OptimizerStatus::Converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-5);
    EXPECT_NEAR(r.x[1], 1.0, 1e-5);
    const auto nm = minimize_nelder_mead(f, x0, 5000);
    EXPECT_NEAR(nm.x[0], 1.0, 1e-3);
    EXPECT_LE(nm.fx, f(x0));
}

TEST(Fit, StaticParRecovery) {
    std::size_t inside = 0, total = 0;
    const auto th0 = par_theta();
    FitOptions opts;
    opts.n_starts = 2;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto data = draw(th0, 5000, 1000 + seed);
        const auto r = fit(data, ModelSpec::parx(0, 0), opts);
        ASSERT_EQ(r.k, 3u);
        const double est[3] = {r.theta_hat.omega, r.theta_hat.beta, r.theta_hat.alpha.delta};
        const double truth[3] = {th0.omega, th0.beta, th0.alpha.delta};
        bool ok = r.convergence.converged;
        for (int i = 0; i < 3; ++i) ok = ok && std::abs(est[i] - truth[i]) < 3.0 * r.std_errors[static_cast<std::size_t>(i)];
        inside += ok ? 1 : 0;
        ++total;
    }
    EXPECT_GE(inside, 18u) << inside << "/" << total;
}

TEST(Fit, TvParConvergesAndReportsConsistently) {
    const auto data = draw(tvpar_theta(), 3000, 77);
    FitOptions opts;
    opts.n_starts = 4;
    opts.seed = 5;
    const auto r = fit(data, ModelSpec::tv_parx(0, 0), opts);
    ASSERT_TRUE(r.convergence.converged);
    EXPECT_LT(r.convergence.grad_norm, opts.grad_tol);
    for (std::size_t s = 0; s < opts.n_starts; ++s) {
        EXPECT_GE(r.convergence.final_loglik[s], r.convergence.start_loglik[s]) << "start " << s;
    }
    EXPECT_NEAR(r.loglik, loglik(data, r.theta_hat, default_init(data, r.theta_hat)), 1e-9 * std::abs(r.loglik));
    const auto ic = information_criteria(r.loglik, 5, 3000);
    EXPECT_EQ(r.criteria.aic, ic.aic);
    EXPECT_EQ(r.criteria.bic, ic.bic);
    ASSERT_EQ(r.std_errors_hessian.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_GE(r.std_errors_hessian[i], 0.0);
        EXPECT_EQ(r.std_errors_hessian[i], std::sqrt(r.vcov_hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
        const double ratio = r.std_errors_sandwich[i] / r.std_errors_hessian[i];
        EXPECT_GT(ratio, 0.7);
        EXPECT_LT(ratio, 1.4);
    }
    EXPECT_EQ(r.vcov_hessian, r.vcov_hessian.transpose());
    ASSERT_TRUE(r.stationarity.has_value());
    ASSERT_TRUE(r.invertibility.has_value());

    const auto par = fit(data, ModelSpec::parx(0, 0), opts);
    EXPECT_GE(r.loglik, par.loglik - 1e-4 * std::abs(par.loglik));
}

TEST(Fit, SameSeedSameResultAnyThreads) {
    const auto data = draw(tvpar_theta(), 1500, 3);
    FitOptions opts;
    opts.n_starts = 4;
    opts.seed = 11;
    opts.compute_covariance = false;
    opts.threads = 1;
    const auto a = fit(data, ModelSpec::tv_parx(0, 0), opts);
    opts.threads = 3;
    const auto b = fit(data, ModelSpec::tv_parx(0, 0), opts);
    EXPECT_EQ(a.theta_hat, b.theta_hat);
    EXPECT_EQ(a.loglik, b.loglik);
}

TEST(Fit, TvParBeatsParAfterLargeBreak) {
    // RMSE of the replication-mean path against the step intensity
    const auto cell = mc::run_cell({4.0, 1.0, 250}, 40, 99);
    EXPECT_LT(cell.tvpar.mean_rmse, cell.par.mean_rmse);
}

TEST(Fit, IdentificationAtTruth) {
    const auto th0 = tvpar_theta();
    const auto data = draw(th0, 100000, 5);
    const TransformMap map(ModelSpec::tv_parx(0, 0));
    const Eigen::VectorXd v0 = map.layout().pack(th0);
    const double l0 = loglik(data, th0, default_init(data, th0));
    for (Eigen::Index i = 0; i < v0.size(); ++i) {
        for (double s : {-0.05, 0.05}) {
            Eigen::VectorXd v = v0;
            v[i] += s;
            const ParamVector th = map.layout().unpack(v);
            EXPECT_GT(l0, loglik(data, th, default_init(data, th))) << map.layout().names()[static_cast<std::size_t>(i)];
        }
    }
}

TEST(Fit, DegenerateAndGuards) {
    const auto zeros = SeriesData::counts_only(std::vector<std::int64_t>(100, 0));
    const auto r = fit(zeros, ModelSpec::tv_parx(0, 0));
    EXPECT_EQ(r.convergence.status, FitStatus::DegenerateData);
    EXPECT_FALSE(r.convergence.converged);
    EXPECT_NEAR(r.path.log_lambda.back(), kLogLambdaMin, 1e-6);

    try {
        fit(SeriesData::counts_only({1, 2, 3, 4, 5}), ModelSpec::tv_parx(0, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(Fit, WithCovariatesAndDummies) {
    ParamVector th;
    th.omega = 0.2;
    th.beta = 0.6;
    th.alpha = {0.05, 0.3, 0.1};
    th.psi = {0.3};
    th.gamma = {{0.1, 0.0, 0.0}};
    const std::size_t n = 3000;
    Matrix x(n, 1), d(n, 1);
    Rng rng(12);
    for (std::size_t t = 0; t < n; ++t) {
        x(static_cast<Eigen::Index>(t), 0) = rng.normal();
        d(static_cast<Eigen::Index>(t), 0) = t % 7 == 3 ? 1.0 : 0.0;
    }
    const auto sim = simulate(th, n, x, d, unconditional_init(th), 2);
    FitOptions opts;
    opts.n_starts = 2;
    const ModelSpec spec{1, 1, true, {false}};
    const auto r = fit(sim.data, spec, opts);
    EXPECT_EQ(r.k, 7u);
    EXPECT_NEAR(r.theta_hat.psi[0], 0.3, 4 * r.std_errors[2]);
    EXPECT_NEAR(r.theta_hat.gamma[0].delta, 0.1, 4 * r.std_errors[6]);
    EXPECT_EQ(r.theta_hat.gamma[0].phi, 0.0);
    EXPECT_EQ(r.theta_hat.gamma[0].kappa, 0.0);
}
