#pragma once

#include <cmath>
#include <cstdint>

#include "tvparx/error.hpp"
#include "tvparx/rng.hpp"

namespace tvparx {

/// Largest mean for which the sampler is exact.
inline constexpr double kPoissonMaxMean = 1e7;

/// Exact Poisson variate.
///
/// Means below 10 use sequential inversion of the CDF. Larger means use
/// Hormann's transformed rejection with squeeze (PTRS), which is exact for
/// any mean >= 10.
inline std::int64_t sample_poisson(Rng& rng, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::DomainError, "Poisson mean must be finite and nonnegative");
    }
    if (lambda == 0.0) return 0;

    if (lambda < 10.0) {
        const double u = rng.uniform();
        double p = std::exp(-lambda);
        double cdf = p;
        std::int64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= lambda / static_cast<double>(k);
            const double next = cdf + p;
            if (next == cdf) break;  // tail below double resolution
            cdf = next;
        }
        return k;
    }

    const double log_lambda = std::log(lambda);
    const double b = 0.931 + 2.53 * std::sqrt(lambda);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    while (true) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double kd = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kd);
        if (kd < 0.0 || (us < 0.013 && v > us)) continue;
        const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
        const double rhs = -lambda + kd * log_lambda - std::lgamma(kd + 1.0);
        if (lhs <= rhs) return static_cast<std::int64_t>(kd);
    }
}

}  // namespace tvparx
