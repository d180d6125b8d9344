// tvparx: simulate, fit, filter, forecast and Monte Carlo for TV-PARX count models.
//
// Exit codes: 0 ok, 2 usage, 3 fit not converged, 4 data error.
// Failures print one JSON line to stderr: {"error":"<kind>","message":"..."}.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tvparx/io.hpp"
#include "tvparx/tvparx.hpp"

namespace {

using namespace tvparx;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitData = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int report_error(std::string_view kind, std::string_view message, int code) {
    Json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return code;
}

/// Writes `text` to `path` ("-" is stdout).
void write_output(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorKind::InvalidArgument, "write to '" + path + "' failed");
}

CsvLoadOptions load_options(const std::vector<std::string>& x_cols, const std::vector<std::string>& d_cols) {
    CsvLoadOptions o;
    if (!x_cols.empty()) o.covariates = x_cols;
    if (!d_cols.empty()) o.deterministics = d_cols;
    return o;
}

void add_column_overrides(CLI::App* cmd, std::vector<std::string>& x_cols, std::vector<std::string>& d_cols) {
    cmd->add_option("--x-columns", x_cols, "Columns used as covariates, in order (default: all x:<name>)")
        ->delimiter(',');
    cmd->add_option("--d-columns", d_cols, "Columns used as deterministics, in order (default: all d:<name>)")
        ->delimiter(',');
}

/// Reads the first `rows` rows of a regressor-only CSV.
SeriesData load_regressors(const std::string& path, std::size_t rows, std::size_t m, std::size_t d,
                           const std::string& what) {
    CsvLoadOptions o;
    o.require_y = false;
    auto reg = load_csv(path, o);
    if (reg.n_covariates() != m || reg.n_deterministics() != d) {
        throw Error(ErrorKind::DimensionMismatch, what + " has " + std::to_string(reg.n_covariates()) + " x and " +
                                                      std::to_string(reg.n_deterministics()) + " d columns; parameters need " +
                                                      std::to_string(m) + " and " + std::to_string(d));
    }
    if (reg.size() < rows) {
        throw Error(ErrorKind::DimensionMismatch,
                    what + " has " + std::to_string(reg.size()) + " rows, need " + std::to_string(rows));
    }
    const auto r = static_cast<Eigen::Index>(rows);
    reg.x = Matrix(reg.x.topRows(r));
    reg.dmat = Matrix(reg.dmat.topRows(r));
    reg.y.resize(rows);
    return reg;
}

// -- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string params;
    std::size_t T = 0;
    std::uint64_t seed = 0;
    std::string covariates;
    bool with_latent = false;
    std::string out;
};

int run_simulate(const SimulateArgs& a) {
    const ParamVector theta = load_params(a.params);
    const std::size_t m = theta.gamma.size();
    const std::size_t d = theta.psi.size();
    Matrix x(static_cast<Eigen::Index>(a.T), 0), dmat(static_cast<Eigen::Index>(a.T), 0);
    std::vector<std::string> x_names, d_names;
    if (!a.covariates.empty()) {
        auto reg = load_regressors(a.covariates, a.T, m, d, "covariate file");
        x = reg.x;
        dmat = reg.dmat;
        x_names = reg.x_names;
        d_names = reg.d_names;
    } else if (m > 0 || d > 0) {
        throw UsageError("parameters have covariate or deterministic terms; pass --covariates");
    }
    auto sim = simulate(theta, a.T, x, dmat, unconditional_init(theta), a.seed);
    sim.data.x_names = x_names;
    sim.data.d_names = d_names;
    std::ostringstream os;
    write_series_csv(os, sim.data, a.with_latent ? &sim.path : nullptr);
    write_output(a.out, os.str());
    return kExitOk;
}

// -- fit ---------------------------------------------------------------------

struct FitArgs {
    std::string input;
    std::string model = "tv-parx";
    std::vector<std::string> no_tv_gamma;
    std::size_t starts = 8;
    std::size_t max_iter = 500;
    std::uint64_t seed = 0;
    std::string out;
    bool with_path = false;
    std::size_t threads = 0;
    std::string covariance = "both";
    std::vector<std::string> x_cols, d_cols;
};

int run_fit(const FitArgs& a) {
    const auto data = load_csv(a.input, load_options(a.x_cols, a.d_cols));
    const std::size_t m = data.n_covariates();
    const std::size_t d = data.n_deterministics();
    ModelSpec spec = a.model == "parx" ? ModelSpec::parx(m, d) : ModelSpec::tv_parx(m, d);
    for (const auto& name : a.no_tv_gamma) {
        const auto it = std::find(data.x_names.begin(), data.x_names.end(), name);
        if (it == data.x_names.end()) throw UsageError("--no-tv-gamma: no covariate named '" + name + "'");
        spec.gamma_time_varying[static_cast<std::size_t>(it - data.x_names.begin())] = false;
    }

    FitOptions opts;
    opts.n_starts = a.starts;
    opts.max_iter = a.max_iter;
    opts.seed = a.seed;
    opts.threads = a.threads == 0 ? default_threads() : a.threads;
    opts.covariance_kind = a.covariance == "hessian"    ? CovarianceKind::Hessian
                           : a.covariance == "sandwich" ? CovarianceKind::Sandwich
                                                        : CovarianceKind::Both;
    const auto result = fit(data, spec, opts);
    const auto report = make_report(result, data, a.seed, a.with_path);
    write_output(a.out, to_json(report).dump(2) + "\n");
    if (result.convergence.status == FitStatus::DegenerateData) {
        return report_error("DegenerateData", "all counts are zero; the intensity is not identified", kExitData);
    }
    if (!result.convergence.converged) {
        return report_error("NotConverged",
                            "optimizer stopped with gradient norm " + format_double(result.convergence.grad_norm),
                            kExitNotConverged);
    }
    return kExitOk;
}

// -- filter ------------------------------------------------------------------

struct FilterArgs {
    std::string input;
    std::string params;
    std::string out;
    std::vector<std::string> x_cols, d_cols;
};

int run_filter(const FilterArgs& a) {
    const auto data = load_csv(a.input, load_options(a.x_cols, a.d_cols));
    const ParamVector theta = load_params(a.params);
    const auto path = filter(data, theta, default_init(data, theta));
    std::ostringstream os;
    write_path_csv(os, data, path);
    write_output(a.out, os.str());
    return kExitOk;
}

// -- forecast ----------------------------------------------------------------

struct ForecastArgs {
    std::string input;
    std::string params;
    std::size_t horizon = 1;
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    std::string out;
    std::string future;
    std::vector<std::string> x_cols, d_cols;
};

int run_forecast(const ForecastArgs& a) {
    const auto data = load_csv(a.input, load_options(a.x_cols, a.d_cols));
    const ParamVector theta = load_params(a.params);
    const std::size_t m = theta.gamma.size();
    const std::size_t d = theta.psi.size();
    const auto h = static_cast<Eigen::Index>(a.horizon);
    Matrix fx(h, static_cast<Eigen::Index>(m));
    Matrix fd(h, static_cast<Eigen::Index>(d));
    fx.setZero();
    fd.setZero();
    if (!a.future.empty()) {
        // Row H only feeds period T+H+1, so H-1 rows suffice.
        const auto reg = load_regressors(a.future, a.horizon - 1, m, d, "future file");
        fx.topRows(h - 1) = reg.x;
        fd.topRows(h - 1) = reg.dmat;
    } else if (a.horizon > 1 && (m > 0 || d > 0)) {
        throw UsageError("horizon > 1 with covariates or deterministics needs --future");
    }
    const auto path = filter(data, theta, default_init(data, theta));
    const auto fc = forecast(path, data, theta, a.horizon, a.paths, a.seed, fx, fd);
    write_output(a.out, forecast_to_json(fc, a.paths, a.seed).dump(2) + "\n");
    return kExitOk;
}

// -- mc ----------------------------------------------------------------------

struct McArgs {
    std::vector<double> deltas{0.0, 2.0, 4.0};
    std::vector<double> gammas{1.0, 1.5, 2.0};
    std::vector<std::size_t> lengths{250, 500, 1000};
    std::size_t reps = 200;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::size_t starts = 2;
    std::string out;
    std::string json;
    std::string bands;
};

int run_mc(const McArgs& a) {
    mc::McOptions opts;
    opts.threads = a.threads == 0 ? default_threads() : a.threads;
    opts.fit.n_starts = a.starts;
    const auto res = mc::run_table(mc::make_grid(a.deltas, a.gammas, a.lengths), a.reps, a.seed, opts);
    std::ostringstream os;
    write_mc_csv(os, res);
    write_output(a.out, os.str());
    if (!a.json.empty()) write_output(a.json, mc_to_json(res).dump(2) + "\n");
    if (!a.bands.empty()) {
        std::ostringstream bs;
        write_bands_csv(bs, res);
        write_output(a.bands, bs.str());
    }
    if (res.any_flagged()) {
        std::cerr << "warning: at least one cell exceeded the failure budget; see n_fail\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TV-PARX count time series: simulate, fit, filter, forecast, Monte Carlo"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Draw a count series from fixed parameters");
    sim->add_option("--params", sa.params, "Parameter JSON (or fit report)")->required()->check(CLI::ExistingFile);
    sim->add_option("--T", sa.T, "Series length")->required()->check(CLI::Range(std::size_t{3}, std::size_t{100000000}));
    sim->add_option("--seed", sa.seed, "RNG seed");
    sim->add_option("--covariates", sa.covariates, "CSV with x:<name> / d:<name> columns, at least T rows")
        ->check(CLI::ExistingFile);
    sim->add_flag("--with-latent", sa.with_latent, "Also write latent:lambda and latent:alpha");
    sim->add_option("--out", sa.out, "Output CSV ('-' for stdout)")->required();

    FitArgs fa;
    auto* fit_cmd = app.add_subcommand("fit", "Quasi-maximum-likelihood estimation");
    fit_cmd->add_option("--input", fa.input, "Input CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--model", fa.model, "tv-parx or parx")->check(CLI::IsMember({"tv-parx", "parx"}));
    fit_cmd->add_option("--no-tv-gamma", fa.no_tv_gamma, "Covariates whose coefficient stays static")->delimiter(',');
    fit_cmd->add_option("--starts", fa.starts, "Number of starting points")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--max-iter", fa.max_iter, "Optimizer iterations per start")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--seed", fa.seed, "Seed for start jitter");
    fit_cmd->add_option("--out", fa.out, "Output JSON report ('-' for stdout)")->required();
    fit_cmd->add_flag("--with-path", fa.with_path, "Include filtered paths in the report");
    fit_cmd->add_option("--threads", fa.threads, "Worker cap (default TVPARX_THREADS or all cores)");
    fit_cmd->add_option("--covariance", fa.covariance, "hessian, sandwich or both")
        ->check(CLI::IsMember({"hessian", "sandwich", "both"}));
    add_column_overrides(fit_cmd, fa.x_cols, fa.d_cols);

    FilterArgs fl;
    auto* filt = app.add_subcommand("filter", "Filtered intensity path at fixed parameters");
    filt->add_option("--input", fl.input, "Input CSV")->required()->check(CLI::ExistingFile);
    filt->add_option("--params", fl.params, "Parameter JSON (or fit report)")->required()->check(CLI::ExistingFile);
    filt->add_option("--out", fl.out, "Output CSV ('-' for stdout)")->required();
    add_column_overrides(filt, fl.x_cols, fl.d_cols);

    ForecastArgs fo;
    auto* fc = app.add_subcommand("forecast", "Multi-step predictive distribution");
    fc->add_option("--input", fo.input, "Input CSV")->required()->check(CLI::ExistingFile);
    fc->add_option("--params", fo.params, "Parameter JSON (or fit report)")->required()->check(CLI::ExistingFile);
    fc->add_option("--horizon", fo.horizon, "Steps ahead")->required()->check(CLI::PositiveNumber);
    fc->add_option("--paths", fo.paths, "Simulated paths for h > 1")->check(CLI::PositiveNumber);
    fc->add_option("--seed", fo.seed, "RNG seed");
    fc->add_option("--out", fo.out, "Output JSON ('-' for stdout)")->required();
    fc->add_option("--future", fo.future, "CSV of future x:/d: values (horizon - 1 rows)")->check(CLI::ExistingFile);
    add_column_overrides(fc, fo.x_cols, fo.d_cols);

    McArgs ma;
    auto* mcc = app.add_subcommand("mc", "Step-DGP Monte Carlo: PAR vs TV-PAR filtered-intensity RMSE");
    mcc->add_option("--delta-list", ma.deltas, "Break sizes")->delimiter(',');
    mcc->add_option("--gamma-list", ma.gammas, "Break frequencies")->delimiter(',');
    mcc->add_option("--T-list", ma.lengths, "Sample sizes")->delimiter(',');
    mcc->add_option("--reps", ma.reps, "Replications per cell")->check(CLI::PositiveNumber);
    mcc->add_option("--seed", ma.seed, "Base seed");
    mcc->add_option("--threads", ma.threads, "Worker cap (default TVPARX_THREADS or all cores)");
    mcc->add_option("--starts", ma.starts, "Starting points per fit")->check(CLI::PositiveNumber);
    mcc->add_option("--out", ma.out, "Output CSV ('-' for stdout)")->required();
    mcc->add_option("--json", ma.json, "Also write a JSON summary");
    mcc->add_option("--bands", ma.bands, "Also write pointwise mean / 95% bands CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("Usage", e.what(), kExitUsage);
    }

    try {
        if (*sim) return run_simulate(sa);
        if (*fit_cmd) return run_fit(fa);
        if (*filt) return run_filter(fl);
        if (*fc) return run_forecast(fo);
        if (*mcc) return run_mc(ma);
    } catch (const UsageError& e) {
        return report_error("Usage", e.what(), kExitUsage);
    } catch (const Error& e) {
        return report_error(to_string(e.kind()), e.what(), kExitData);
    } catch (const std::exception& e) {
        return report_error("Internal", e.what(), kExitData);
    }
    return kExitUsage;
}
