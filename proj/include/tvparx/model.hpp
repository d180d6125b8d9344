#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvparx/error.hpp"

namespace tvparx {

/// Row-major so that x_t and d_t are contiguous rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kLogLambdaMin = -20.0;
inline constexpr double kLogLambdaMax = 25.0;
inline constexpr double kLambdaFloor = 1e-4;

/// Dimensions of the model and which coefficient blocks follow a score-driven update.
///
/// A static block keeps only its intercept `delta` as a free parameter; its
/// autoregressive and score loadings are frozen at zero so the same recursion
/// serves both the static and the time-varying model.
struct ModelSpec {
    std::size_t n_covariates = 0;
    std::size_t n_deterministics = 0;
    bool alpha_time_varying = true;
    std::vector<bool> gamma_time_varying;

    static ModelSpec tv_parx(std::size_t m, std::size_t d) {
        return {m, d, true, std::vector<bool>(m, true)};
    }
    static ModelSpec parx(std::size_t m, std::size_t d) {
        return {m, d, false, std::vector<bool>(m, false)};
    }

    void validate() const {
        if (gamma_time_varying.size() != n_covariates) {
            throw Error(ErrorKind::DimensionMismatch,
                        "gamma_time_varying has " + std::to_string(gamma_time_varying.size()) +
                            " entries for " + std::to_string(n_covariates) + " covariates");
        }
    }

    /// Number of free static parameters k.
    [[nodiscard]] std::size_t n_free() const {
        std::size_t k = 2 + n_deterministics + (alpha_time_varying ? 3 : 1);
        for (bool tv : gamma_time_varying) k += tv ? 3 : 1;
        return k;
    }

    bool operator==(const ModelSpec&) const = default;
};

/// Intercept, persistence and score loading of one score-driven coefficient.
struct CoefficientBlock {
    double delta = 0.0;
    double phi = 0.0;
    double kappa = 0.0;

    /// Unconditional mean delta / (1 - phi) of the AR(1) recursion.
    [[nodiscard]] double unconditional_mean() const {
        return std::abs(phi) < 1.0 ? delta / (1.0 - phi) : delta;
    }

    bool operator==(const CoefficientBlock&) const = default;
};

struct ParamVector {
    double omega = 0.0;
    double beta = 0.0;
    std::vector<double> psi;
    CoefficientBlock alpha;
    std::vector<CoefficientBlock> gamma;

    [[nodiscard]] std::size_t n_covariates() const { return gamma.size(); }
    [[nodiscard]] std::size_t n_deterministics() const { return psi.size(); }

    [[nodiscard]] bool all_finite() const {
        auto fin = [](double v) { return std::isfinite(v); };
        if (!fin(omega) || !fin(beta) || !fin(alpha.delta) || !fin(alpha.phi) || !fin(alpha.kappa)) {
            return false;
        }
        for (double v : psi) {
            if (!fin(v)) return false;
        }
        for (const auto& g : gamma) {
            if (!fin(g.delta) || !fin(g.phi) || !fin(g.kappa)) return false;
        }
        return true;
    }

    bool operator==(const ParamVector&) const = default;
};

struct SeriesData {
    std::vector<std::int64_t> y;
    Matrix x;     // T x m
    Matrix dmat;  // T x d
    std::vector<std::string> x_names;
    std::vector<std::string> d_names;
    std::vector<std::string> dates;  // optional labels, passed through untouched

    [[nodiscard]] std::size_t size() const { return y.size(); }
    [[nodiscard]] std::size_t n_covariates() const { return static_cast<std::size_t>(x.cols()); }
    [[nodiscard]] std::size_t n_deterministics() const {
        return static_cast<std::size_t>(dmat.cols());
    }

    static SeriesData counts_only(std::vector<std::int64_t> y) {
        SeriesData data;
        const auto n = static_cast<Eigen::Index>(y.size());
        data.y = std::move(y);
        data.x = Matrix(n, 0);
        data.dmat = Matrix(n, 0);
        return data;
    }

    [[nodiscard]] std::span<const double> x_row(std::size_t t) const {
        return {x.data() + t * static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(x.cols())};
    }
    [[nodiscard]] std::span<const double> d_row(std::size_t t) const {
        return {dmat.data() + t * static_cast<std::size_t>(dmat.cols()),
                static_cast<std::size_t>(dmat.cols())};
    }

    /// Checks shape consistency and count validity. `min_length` is the smallest admissible T.
    void validate(std::size_t min_length = 1) const {
        const auto n = static_cast<Eigen::Index>(y.size());
        if (y.size() < min_length) {
            throw Error(ErrorKind::InvalidArgument, "series has " + std::to_string(y.size()) +
                                                        " observations, need at least " +
                                                        std::to_string(min_length));
        }
        if (x.rows() != n || dmat.rows() != n) {
            throw Error(ErrorKind::DimensionMismatch, "covariate and deterministic matrices must have " +
                                                          std::to_string(y.size()) + " rows");
        }
        for (std::size_t t = 0; t < y.size(); ++t) {
            if (y[t] < 0) {
                throw Error(ErrorKind::NegativeCount, "negative count at t=" + std::to_string(t + 1));
            }
        }
        if (!x.allFinite() || !dmat.allFinite()) {
            throw Error(ErrorKind::NonFiniteCovariate, "covariates must be finite");
        }
    }

    [[nodiscard]] double mean_count() const {
        if (y.empty()) return 0.0;
        double s = 0.0;
        for (auto v : y) s += static_cast<double>(v);
        return s / static_cast<double>(y.size());
    }
};

/// Starting values of the filtered processes at t = 1.
struct FilterInit {
    double lambda1 = 1.0;
    double alpha1 = 0.0;
    std::vector<double> gamma1;
};

/// Filtered processes for t = 1..T (stored zero-based).
struct FilterPath {
    std::vector<double> lambda;
    std::vector<double> log_lambda;
    std::vector<double> alpha;
    Matrix gamma;  // T x m
    std::vector<double> innov;
    std::vector<double> loglik_terms;
    std::size_t clamp_upper = 0;  // periods where log lambda hit the upper bound
    std::size_t clamp_lower = 0;
    std::size_t non_finite = 0;   // states that became NaN/inf before clamping

    [[nodiscard]] std::size_t size() const { return lambda.size(); }
};

/// Maps the free static parameters of a ModelSpec to and from a flat vector.
///
/// Ordering: omega, beta, psi_1..psi_d, delta_alpha [, phi_alpha, kappa_alpha],
/// then per covariate delta_gamma_j [, phi_gamma_j, kappa_gamma_j].
class ParamLayout {
public:
    explicit ParamLayout(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    [[nodiscard]] const ModelSpec& spec() const { return spec_; }
    [[nodiscard]] std::size_t size() const { return spec_.n_free(); }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out{"omega", "beta"};
        for (std::size_t i = 0; i < spec_.n_deterministics; ++i) {
            out.push_back("psi[" + std::to_string(i) + "]");
        }
        out.emplace_back("delta_alpha");
        if (spec_.alpha_time_varying) {
            out.emplace_back("phi_alpha");
            out.emplace_back("kappa_alpha");
        }
        for (std::size_t j = 0; j < spec_.n_covariates; ++j) {
            const std::string idx = "[" + std::to_string(j) + "]";
            out.push_back("delta_gamma" + idx);
            if (spec_.gamma_time_varying[j]) {
                out.push_back("phi_gamma" + idx);
                out.push_back("kappa_gamma" + idx);
            }
        }
        return out;
    }

    [[nodiscard]] Vector pack(const ParamVector& theta) const {
        check_dims(theta);
        Vector v(static_cast<Eigen::Index>(size()));
        Eigen::Index i = 0;
        v[i++] = theta.omega;
        v[i++] = theta.beta;
        for (double p : theta.psi) v[i++] = p;
        v[i++] = theta.alpha.delta;
        if (spec_.alpha_time_varying) {
            v[i++] = theta.alpha.phi;
            v[i++] = theta.alpha.kappa;
        }
        for (std::size_t j = 0; j < spec_.n_covariates; ++j) {
            v[i++] = theta.gamma[j].delta;
            if (spec_.gamma_time_varying[j]) {
                v[i++] = theta.gamma[j].phi;
                v[i++] = theta.gamma[j].kappa;
            }
        }
        return v;
    }

    [[nodiscard]] ParamVector unpack(const Vector& v) const {
        if (static_cast<std::size_t>(v.size()) != size()) {
            throw Error(ErrorKind::DimensionMismatch, "parameter vector has wrong length");
        }
        ParamVector theta;
        Eigen::Index i = 0;
        theta.omega = v[i++];
        theta.beta = v[i++];
        theta.psi.resize(spec_.n_deterministics);
        for (auto& p : theta.psi) p = v[i++];
        theta.alpha.delta = v[i++];
        if (spec_.alpha_time_varying) {
            theta.alpha.phi = v[i++];
            theta.alpha.kappa = v[i++];
        }
        theta.gamma.resize(spec_.n_covariates);
        for (std::size_t j = 0; j < spec_.n_covariates; ++j) {
            theta.gamma[j].delta = v[i++];
            if (spec_.gamma_time_varying[j]) {
                theta.gamma[j].phi = v[i++];
                theta.gamma[j].kappa = v[i++];
            }
        }
        return theta;
    }

    /// Zeroes the frozen (phi, kappa) entries of static blocks.
    [[nodiscard]] ParamVector restrict(ParamVector theta) const {
        return unpack(pack(theta));
    }

private:
    void check_dims(const ParamVector& theta) const {
        if (theta.psi.size() != spec_.n_deterministics || theta.gamma.size() != spec_.n_covariates) {
            throw Error(ErrorKind::DimensionMismatch, "parameter blocks do not match the model spec");
        }
    }

    ModelSpec spec_;
};

}  // namespace tvparx
