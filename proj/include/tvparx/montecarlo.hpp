#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "tvparx/error.hpp"
#include "tvparx/estimation.hpp"
#include "tvparx/model.hpp"
#include "tvparx/parallel.hpp"
#include "tvparx/poisson.hpp"
#include "tvparx/rng.hpp"

namespace tvparx::mc {

/// Square-wave intensity: 2 while sin(0.01 (pi t - 1) / gamma) >= 0, else 2 + delta.
struct StepDGPConfig {
    double delta = 0.0;
    double gamma = 1.0;
    std::size_t T = 250;

    void validate() const {
        if (T < 3) throw Error(ErrorKind::InvalidArgument, "step DGP needs T >= 3");
        if (!(gamma > 0.0) || !std::isfinite(delta)) {
            throw Error(ErrorKind::InvalidArgument, "step DGP needs gamma > 0 and finite delta");
        }
    }
};

inline std::vector<double> step_lambda(const StepDGPConfig& cfg) {
    cfg.validate();
    std::vector<double> lam(cfg.T);
    for (std::size_t i = 0; i < cfg.T; ++i) {
        const double t = static_cast<double>(i + 1);
        const double arg = 1e-2 * (std::numbers::pi * t - 1.0) / cfg.gamma;
        lam[i] = std::sin(arg) >= 0.0 ? 2.0 : 2.0 + cfg.delta;
    }
    return lam;
}

/// Independent draws y_t ~ Poisson(lambda0_t).
inline std::vector<std::int64_t> draw_counts(std::span<const double> lambda0, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int64_t> y(lambda0.size());
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = sample_poisson(rng, lambda0[t]);
    return y;
}

inline double rmse(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size() || truth.empty()) {
        throw Error(ErrorKind::DimensionMismatch, "RMSE needs two equal, nonempty paths");
    }
    double s = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const double e = estimate[t] - truth[t];
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(truth.size()));
}

/// Pairwise summation; the result depends only on the order of `v`.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

enum class ModelKind { Par = 0, TvPar = 1 };

inline constexpr std::string_view to_string(ModelKind k) noexcept {
    return k == ModelKind::Par ? "PAR" : "TV-PAR";
}

inline ModelSpec model_spec(ModelKind k) {
    return k == ModelKind::Par ? ModelSpec::parx(0, 0) : ModelSpec::tv_parx(0, 0);
}

struct McOptions {
    FitOptions fit = [] {
        FitOptions o;
        o.n_starts = 2;
        o.compute_covariance = false;
        o.compute_diagnostics = false;
        return o;
    }();
    std::size_t threads = 1;
    double max_fail_fraction = 0.05;
};

/// Per-model summary of one cell.
///
/// `mean_rmse` is the RMSE of the replication-mean filtered path against
/// lambda0 (the table metric); `mean_replication_rmse` averages the
/// per-replication RMSEs instead.
struct ModelCell {
    ModelKind model = ModelKind::Par;
    std::vector<double> rmse;  // per replication, NaN where the fit failed
    double mean_rmse = std::numeric_limits<double>::quiet_NaN();
    double mean_replication_rmse = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_ok = 0;
    std::size_t n_fail = 0;
    std::size_t n_not_converged = 0;
    bool flagged = false;
    // pointwise summaries of lambda-hat_t across successful replications
    std::vector<double> band_mean;
    std::vector<double> band_lo;   // 2.5%
    std::vector<double> band_hi;   // 97.5%
};

struct CellResult {
    StepDGPConfig cfg;
    std::size_t reps = 0;
    std::uint64_t base_seed = 0;
    std::vector<double> lambda0;
    ModelCell par;
    ModelCell tvpar;

    [[nodiscard]] const ModelCell& operator[](ModelKind k) const { return k == ModelKind::Par ? par : tvpar; }
};

struct MCResult {
    std::vector<CellResult> cells;
    std::size_t reps = 0;
    std::uint64_t base_seed = 0;
    [[nodiscard]] bool any_flagged() const {
        return std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.par.flagged || c.tvpar.flagged; });
    }
};

struct ReplicationOutcome {
    bool ok = false;
    bool converged = false;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> lambda_hat;
};

/// Fits one model to one replication. Replication r of every cell shares the
/// same stream, seed = derive_seed(base_seed, r).
inline ReplicationOutcome run_replication(const std::vector<double>& lambda0, ModelKind model, std::size_t r,
                                          std::uint64_t base_seed, const McOptions& opts) {
    const std::uint64_t rep_seed = derive_seed(base_seed, r);
    ReplicationOutcome out;
    try {
        const SeriesData data = SeriesData::counts_only(draw_counts(lambda0, rep_seed));
        FitOptions fo = opts.fit;
        fo.threads = 1;
        fo.seed = derive_seed(rep_seed, 1 + static_cast<std::uint64_t>(model));
        const FitResult fr = fit(data, model_spec(model), fo);
        if (!std::isfinite(fr.loglik) || fr.convergence.status == FitStatus::DegenerateData) return out;
        out.ok = true;
        out.converged = fr.convergence.converged;
        out.rmse = rmse(fr.path.lambda, lambda0);
        out.lambda_hat = fr.path.lambda;
    } catch (const Error&) {
        out.ok = false;
    }
    return out;
}

namespace detail {
inline double lower_quantile(std::vector<double> v, double p) {
    const auto n = v.size();
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    idx = std::clamp<std::size_t>(idx, 1, n) - 1;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}

inline void summarize(ModelCell& cell, std::vector<ReplicationOutcome>& outcomes,
                      const std::vector<double>& lambda0, const McOptions& opts) {
    const std::size_t n_time = lambda0.size();
    cell.rmse.clear();
    std::vector<double> ok_rmse;
    for (const auto& o : outcomes) {
        cell.rmse.push_back(o.rmse);
        if (o.ok) {
            ++cell.n_ok;
            ok_rmse.push_back(o.rmse);
            if (!o.converged) ++cell.n_not_converged;
        } else {
            ++cell.n_fail;
        }
    }
    cell.flagged = static_cast<double>(cell.n_fail) > opts.max_fail_fraction * static_cast<double>(outcomes.size());
    if (ok_rmse.empty()) return;
    cell.mean_replication_rmse = pairwise_sum(ok_rmse) / static_cast<double>(ok_rmse.size());

    cell.band_mean.assign(n_time, 0.0);
    cell.band_lo.assign(n_time, 0.0);
    cell.band_hi.assign(n_time, 0.0);
    std::vector<double> column;
    for (std::size_t t = 0; t < n_time; ++t) {
        column.clear();
        for (const auto& o : outcomes) {
            if (o.ok) column.push_back(o.lambda_hat[t]);
        }
        cell.band_mean[t] = pairwise_sum(column) / static_cast<double>(column.size());
        cell.band_lo[t] = lower_quantile(column, 0.025);
        cell.band_hi[t] = lower_quantile(column, 0.975);
    }
    cell.mean_rmse = rmse(cell.band_mean, lambda0);
}
}  // namespace detail

/// Runs every (cell, model, replication) task on up to `opts.threads` workers.
/// Output is bit-identical for any thread count.
inline MCResult run_table(const std::vector<StepDGPConfig>& grid, std::size_t reps, std::uint64_t base_seed,
                          const McOptions& opts = {}) {
    if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "Monte Carlo grid is empty");
    if (reps == 0) throw Error(ErrorKind::InvalidArgument, "need at least one replication");
    for (const auto& c : grid) c.validate();

    MCResult res;
    res.reps = reps;
    res.base_seed = base_seed;
    std::vector<std::vector<double>> lambda0;
    for (const auto& c : grid) lambda0.push_back(step_lambda(c));

    const std::size_t per_cell = 2 * reps;
    std::vector<ReplicationOutcome> outcomes(grid.size() * per_cell);
    // longest series first so the tail of the schedule is short
    std::vector<std::size_t> order(outcomes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return grid[a / per_cell].T > grid[b / per_cell].T; });
    parallel_for(order.size(), opts.threads, [&](std::size_t i) {
        const std::size_t task = order[i];
        const std::size_t cell = task / per_cell;
        const std::size_t within = task % per_cell;
        const auto model = within < reps ? ModelKind::Par : ModelKind::TvPar;
        outcomes[task] = run_replication(lambda0[cell], model, within % reps, base_seed, opts);
    });

    for (std::size_t c = 0; c < grid.size(); ++c) {
        CellResult cell;
        cell.cfg = grid[c];
        cell.reps = reps;
        cell.base_seed = base_seed;
        cell.lambda0 = lambda0[c];
        cell.par.model = ModelKind::Par;
        cell.tvpar.model = ModelKind::TvPar;
        auto first = outcomes.begin() + static_cast<std::ptrdiff_t>(c * per_cell);
        const auto mid = first + static_cast<std::ptrdiff_t>(reps);
        const auto last = first + static_cast<std::ptrdiff_t>(per_cell);
        std::vector<ReplicationOutcome> par(std::make_move_iterator(first), std::make_move_iterator(mid));
        std::vector<ReplicationOutcome> tv(std::make_move_iterator(mid), std::make_move_iterator(last));
        detail::summarize(cell.par, par, lambda0[c], opts);
        detail::summarize(cell.tvpar, tv, lambda0[c], opts);
        res.cells.push_back(std::move(cell));
    }
    return res;
}

inline CellResult run_cell(const StepDGPConfig& cfg, std::size_t reps, std::uint64_t base_seed,
                           const McOptions& opts = {}) {
    return run_table({cfg}, reps, base_seed, opts).cells.front();
}

/// Full delta x gamma x T grid, ordered by T, then delta, then gamma.
inline std::vector<StepDGPConfig> make_grid(const std::vector<double>& deltas, const std::vector<double>& gammas,
                                            const std::vector<std::size_t>& lengths) {
    std::vector<StepDGPConfig> grid;
    for (auto n : lengths)
        for (double d : deltas)
            for (double g : gammas) grid.push_back({d, g, n});
    return grid;
}

}  // namespace tvparx::mc
