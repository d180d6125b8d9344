#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "tvparx/tvparx.hpp"

using namespace tvparx;

namespace {

ParamVector stable_theta() {
    ParamVector th;
    th.omega = 0.1;
    th.beta = 0.5;
    th.alpha = {0.05, 0.2, 0.1};
    return th;
}

ParamVector light_tailed_theta() {
    ParamVector th = stable_theta();
    th.alpha.kappa = 0.02;
    return th;
}

}  // namespace

TEST(Stationarity, AllPass) {
    ParamVector th;
    th.beta = 0.5;
    const auto r = check_stationarity(th);
    EXPECT_EQ(r.alpha_bar, 0.0);
    EXPECT_TRUE(r.cond_phi);
    EXPECT_TRUE(r.cond_beta);
    EXPECT_TRUE(r.cond_product);
    EXPECT_TRUE(r.all_satisfied);
}

TEST(Stationarity, UnitRootAlphaIsDomainError) {
    ParamVector th;
    th.beta = 0.5;
    th.alpha.phi = 1.0;
    try {
        check_stationarity(th);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainError);
    }
}

TEST(Stationarity, ProductConditionFlagged) {
    ParamVector th;
    th.beta = 0.99;
    th.alpha = {0.7, 0.0, 0.0};
    const auto r = check_stationarity(th);
    EXPECT_NEAR(r.alpha_bar, 0.7, 1e-15);
    EXPECT_NEAR(th.beta * std::abs(th.beta + r.alpha_bar), 1.6731, 1e-4);
    EXPECT_FALSE(r.cond_product);
    EXPECT_TRUE(r.cond_beta);
    EXPECT_FALSE(r.all_satisfied);
}

TEST(Stationarity, GammaConditionsEnterConjunction) {
    ParamVector th = stable_theta();
    th.gamma = {{0.0, 0.5, 0.1}, {0.0, 1.2, 0.1}};
    const auto r = check_stationarity(th);
    ASSERT_EQ(r.gamma_conds.size(), 2u);
    EXPECT_TRUE(r.gamma_conds[0]);
    EXPECT_FALSE(r.gamma_conds[1]);
    EXPECT_FALSE(r.all_satisfied);
}

TEST(Stationarity, BooleansMatchInequalities) {
    Rng rng(1);
    for (int i = 0; i < 300; ++i) {
        ParamVector th;
        th.beta = 2.4 * rng.uniform() - 0.2;
        th.alpha = {rng.normal(), 2.4 * rng.uniform() - 1.2, 0.1};
        if (th.alpha.phi == 1.0) continue;
        const auto r = check_stationarity(th);
        const double abar = th.alpha.delta / (1 - th.alpha.phi);
        EXPECT_EQ(r.cond_phi, std::abs(th.alpha.phi) < 1);
        EXPECT_EQ(r.cond_beta, th.beta > 0 && th.beta < 1);
        EXPECT_EQ(r.cond_product, th.beta * std::abs(th.beta + abar) < 1);
        EXPECT_EQ(r.all_satisfied, r.cond_phi && r.cond_beta && r.cond_product);
    }
}

TEST(Invertibility, BoundExample) {
    ParamVector th;
    th.omega = 0.0;
    th.beta = 0.5;
    th.alpha = {0.05, 0.2, 0.1};
    EXPECT_NEAR(invertibility_bound(th), -0.375, 1e-15);
}

TEST(Invertibility, BoundShiftsWithOmega) {
    ParamVector th = stable_theta();
    const double base = invertibility_bound(th);
    for (double c : {-1.0, 0.3, 2.5}) {
        ParamVector moved = th;
        moved.omega += c * (1.0 - th.beta);
        EXPECT_NEAR(invertibility_bound(moved), base + c, 1e-12);
    }
}

TEST(Invertibility, ZeroCountsOracle) {
    ParamVector th;
    th.omega = 0.0;
    th.beta = 0.5;
    th.alpha = {0.05, 0.2, 0.1};
    const std::size_t n = 10;
    const auto r = check_invertibility(th, SeriesData::counts_only(std::vector<std::int64_t>(n, 0)));

    // y = 0 makes every factor (y e^{-ell} - 1) equal to -1; the pre-sample factor is 0.
    const double ell = -0.375;
    double abar = 0.05 / 0.8;
    double sum = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        const double product = t == 1 ? 0.0 : 1.0;
        abar = 0.05 + 0.2 * abar + 0.1 * product;
        sum += std::log(std::abs(0.5 * std::exp(0.0 - abar - ell * 0.5)));
    }
    EXPECT_NEAR(r.ell, ell, 1e-15);
    EXPECT_NEAR(r.empirical_log_contraction, sum / (n - 1), 1e-12);
    EXPECT_EQ(r.satisfied_empirically, sum < 0);
}

TEST(Invertibility, Preconditions) {
    const auto data = SeriesData::counts_only({1, 2, 3});
    for (auto mutate : std::vector<void (*)(ParamVector&)>{[](ParamVector& t) { t.alpha.kappa = 0.0; },
                                                          [](ParamVector& t) { t.alpha.phi = 1.0; },
                                                          [](ParamVector& t) { t.beta = 1.0; }}) {
        ParamVector th = stable_theta();
        mutate(th);
        try {
            check_invertibility(th, data);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DomainError);
        }
    }
}

TEST(Invertibility, StableSimulatedData) {
    const auto th = light_tailed_theta();
    std::size_t ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto sim = simulate(th, 10000, Matrix(), Matrix(), unconditional_init(th), seed);
        ok += check_invertibility(th, sim.data).satisfied_empirically ? 1 : 0;
    }
    EXPECT_GE(ok, 95u);
}

namespace {

bool forgets(const SeriesData& data, const ParamVector& th) {
    const auto a = filter(data, th, FilterInit{1.0, 0.05, {}});
    const auto b = filter(data, th, FilterInit{std::exp(1.0), 0.55, {}});
    for (std::size_t t = 200; t < data.size(); ++t) {
        if (!(std::abs(a.log_lambda[t] - b.log_lambda[t]) < 1e-8)) return false;
    }
    return true;
}

}  // namespace

TEST(Invertibility, AgreesWithInitializationForgetting) {
    const auto th = light_tailed_theta();
    std::size_t agree = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto sim = simulate(th, 1000, Matrix(), Matrix(), unconditional_init(th), 500 + seed);
        agree += forgets(sim.data, th) == check_invertibility(th, sim.data).satisfied_empirically ? 1 : 0;
    }
    EXPECT_GE(agree, 45u);
}

TEST(Invertibility, VerdictIsSufficientUnderBursts) {
    // rare count bursts dominate the sample mean, so the verdict is conservative
    const auto th = stable_theta();
    std::size_t satisfied = 0, forgot = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto sim = simulate(th, 1000, Matrix(), Matrix(), unconditional_init(th), 500 + seed);
        const bool f = forgets(sim.data, th);
        const bool s = check_invertibility(th, sim.data).satisfied_empirically;
        if (s) {
            EXPECT_TRUE(f) << "seed " << seed;
        }
        satisfied += s ? 1 : 0;
        forgot += f ? 1 : 0;
    }
    EXPECT_GE(forgot, 45u);
    EXPECT_LE(satisfied, forgot);
}

TEST(Moments, ConstantIntensitySecondMoment) {
    ParamVector th;
    th.omega = std::log(2.0);
    th.beta = 0.0;
    const auto r = moment_sanity(th, 100000, 2, 3);
    EXPECT_NEAR(r.moment_y, 6.0, 3.0 * r.moment_y_se);
    EXPECT_FALSE(r.saturation_warning);
}

TEST(Moments, StableFourthMomentFinite) {
    const auto r = moment_sanity(light_tailed_theta(), 50000, 4, 8);
    EXPECT_TRUE(r.finite);
    EXPECT_FALSE(r.saturation_warning);
    EXPECT_EQ(r.saturation_fraction, 0.0);
    EXPECT_TRUE(std::isfinite(r.tail_index));
}

TEST(Moments, ExplosiveParameterizationWarns) {
    ParamVector th;
    th.omega = 0.1;
    th.beta = 0.999;
    th.alpha = {0.0, 0.0, 2.0};
    const auto r = moment_sanity(th, 5000, 2, 1);
    EXPECT_TRUE(r.saturation_warning);
}
