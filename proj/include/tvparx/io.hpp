#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "tvparx/diagnostics.hpp"
#include "tvparx/error.hpp"
#include "tvparx/estimation.hpp"
#include "tvparx/model.hpp"
#include "tvparx/montecarlo.hpp"
#include "tvparx/simulate.hpp"

namespace tvparx {

inline constexpr std::string_view kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// RFC-4180 records: comma separated, optional double-quoted fields with ""
/// escapes, LF or CRLF line ends. Blank lines are skipped.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    char c;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        if (!(row.empty() && !field_started && field.empty())) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": stray quote inside field");
            }
            quoted = true;
            field_started = true;
            break;
        case ',': end_field(); break;
        case '\r':
            if (in.peek() != '\n') field.push_back(c);
            break;
        case '\n':
            end_row();
            ++line;
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) throw Error(ErrorKind::ParseError, "unterminated quoted field");
    end_row();
    return rows;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

struct CsvLoadOptions {
    /// When set, exactly these columns (header names) become x / d, in this order.
    std::optional<std::vector<std::string>> covariates;
    std::optional<std::vector<std::string>> deterministics;
    /// Regressor-only files (simulation or forecast inputs) have no `y`.
    bool require_y = true;
};

namespace detail {
inline std::string strip_prefix(const std::string& name) {
    if (name.rfind("x:", 0) == 0 || name.rfind("d:", 0) == 0) return name.substr(2);
    return name;
}

inline std::string cell_location(std::size_t row, const std::string& column) {
    return "row " + std::to_string(row) + ", column '" + column + "'";
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}
}  // namespace detail

/// Reads a count series: a required `y` column, covariates `x:<name>`,
/// deterministics `d:<name>`, an optional `date` label column. Columns named
/// `latent:<name>` are ignored. Any other column is an error.
inline SeriesData read_csv(std::istream& in, const CsvLoadOptions& opts = {}) {
    const auto rows = parse_csv(in);
    if (rows.empty()) throw Error(ErrorKind::ParseError, "empty CSV (a header row is required)");
    const auto& header = rows.front();

    std::optional<std::size_t> y_col, date_col;
    std::vector<std::size_t> x_cols, d_cols;
    std::vector<std::string> x_names, d_names;
    auto find_column = [&](const std::string& want) -> std::size_t {
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto h = detail::trim(header[c]);
            if (h == want || detail::strip_prefix(h) == want) return c;
        }
        throw Error(ErrorKind::ParseError, "column '" + want + "' not found in header");
    };
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto h = detail::trim(header[c]);
        if (h == "y") {
            if (y_col) throw Error(ErrorKind::ParseError, "duplicate 'y' column");
            y_col = c;
        } else if (h == "date") {
            date_col = c;
        } else if (h.rfind("x:", 0) == 0 && h.size() > 2) {
            if (!opts.covariates) {
                x_cols.push_back(c);
                x_names.push_back(h.substr(2));
            }
        } else if (h.rfind("d:", 0) == 0 && h.size() > 2) {
            if (!opts.deterministics) {
                d_cols.push_back(c);
                d_names.push_back(h.substr(2));
            }
        } else if (h.rfind("latent:", 0) == 0) {
            // simulation output, not model input
        } else if (!(opts.covariates || opts.deterministics)) {
            throw Error(ErrorKind::ParseError, "unrecognized column '" + h + "' (expected y, date, x:<name>, d:<name>)");
        }
    }
    if (!y_col && opts.require_y) throw Error(ErrorKind::ParseError, "missing required column 'y'");
    if (opts.covariates) {
        for (const auto& name : *opts.covariates) {
            x_cols.push_back(find_column(name));
            x_names.push_back(detail::strip_prefix(name));
        }
    }
    if (opts.deterministics) {
        for (const auto& name : *opts.deterministics) {
            d_cols.push_back(find_column(name));
            d_names.push_back(detail::strip_prefix(name));
        }
    }

    const std::size_t n = rows.size() - 1;
    SeriesData data;
    data.y.resize(n);
    data.x = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_cols.size()));
    data.dmat = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_cols.size()));
    data.x_names = x_names;
    data.d_names = d_names;

    auto read_real = [&](const std::vector<std::string>& row, std::size_t r, std::size_t c) {
        const auto text = detail::trim(row[c]);
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
            throw Error(ErrorKind::ParseError, detail::cell_location(r, header[c]) + ": '" + text + "' is not a number");
        }
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::NonFiniteCovariate, detail::cell_location(r, header[c]) + " is not finite");
        }
        return v;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        const std::size_t r = i + 2;  // 1-based file line of a record without embedded newlines
        if (row.size() != header.size()) {
            throw Error(ErrorKind::ParseError, "row " + std::to_string(r) + ": expected " +
                                                   std::to_string(header.size()) + " fields, got " +
                                                   std::to_string(row.size()));
        }
        if (date_col) data.dates.push_back(row[*date_col]);
        for (std::size_t j = 0; j < x_cols.size(); ++j) {
            data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = read_real(row, r, x_cols[j]);
        }
        for (std::size_t j = 0; j < d_cols.size(); ++j) {
            data.dmat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = read_real(row, r, d_cols[j]);
        }
        if (!y_col) continue;
        const auto text = detail::trim(row[*y_col]);
        std::int64_t y = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), y);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
            throw Error(ErrorKind::ParseError, detail::cell_location(r, "y") + ": '" + text + "' is not an integer count");
        }
        if (y < 0) throw Error(ErrorKind::NegativeCount, detail::cell_location(r, "y") + ": negative count " + text);
        data.y[i] = y;
    }
    return data;
}

inline SeriesData load_csv(const std::string& path, const CsvLoadOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
    return read_csv(in, opts);
}

/// Writes data in the loader's schema; `latent` adds latent:lambda / latent:alpha columns.
inline void write_series_csv(std::ostream& out, const SeriesData& data, const FilterPath* latent = nullptr) {
    const bool dates = data.dates.size() == data.size() && !data.dates.empty();
    auto name = [](const std::vector<std::string>& names, std::size_t j, const char* fallback) {
        return j < names.size() ? names[j] : std::string(fallback) + std::to_string(j + 1);
    };
    if (dates) out << "date,";
    out << "y";
    for (std::size_t j = 0; j < data.n_covariates(); ++j) out << ',' << csv_escape("x:" + name(data.x_names, j, "x"));
    for (std::size_t j = 0; j < data.n_deterministics(); ++j) out << ',' << csv_escape("d:" + name(data.d_names, j, "d"));
    if (latent != nullptr) out << ",latent:lambda,latent:alpha";
    out << '\n';
    for (std::size_t t = 0; t < data.size(); ++t) {
        if (dates) out << csv_escape(data.dates[t]) << ',';
        out << data.y[t];
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << ',' << format_double(data.x(static_cast<Eigen::Index>(t), j));
        for (Eigen::Index j = 0; j < data.dmat.cols(); ++j) out << ',' << format_double(data.dmat(static_cast<Eigen::Index>(t), j));
        if (latent != nullptr) out << ',' << format_double(latent->lambda[t]) << ',' << format_double(latent->alpha[t]);
        out << '\n';
    }
}

/// Filtered path, one row per period.
inline void write_path_csv(std::ostream& out, const SeriesData& data, const FilterPath& path) {
    const bool dates = data.dates.size() == data.size() && !data.dates.empty();
    out << "t";
    if (dates) out << ",date";
    out << ",y,lambda,log_lambda,alpha";
    for (Eigen::Index j = 0; j < path.gamma.cols(); ++j) {
        const auto idx = static_cast<std::size_t>(j);
        out << ',' << csv_escape("gamma:" + (idx < data.x_names.size() ? data.x_names[idx] : std::to_string(idx + 1)));
    }
    out << ",innov,loglik_term\n";
    for (std::size_t t = 0; t < path.size(); ++t) {
        out << (t + 1);
        if (dates) out << ',' << csv_escape(data.dates[t]);
        out << ',' << data.y[t] << ',' << format_double(path.lambda[t]) << ',' << format_double(path.log_lambda[t])
            << ',' << format_double(path.alpha[t]);
        for (Eigen::Index j = 0; j < path.gamma.cols(); ++j) out << ',' << format_double(path.gamma(static_cast<Eigen::Index>(t), j));
        out << ',' << format_double(path.innov[t]) << ',' << format_double(path.loglik_terms[t]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {
/// JSON has no NaN; it is written as null and read back as NaN.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double number(const Json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}
inline Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}
inline std::vector<double> numbers(const Json& j) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(number(x));
    return v;
}
}  // namespace detail

/// Parameter object with transliterated names: omega, beta, psi[], delta_alpha,
/// phi_alpha, kappa_alpha, delta_gamma[], phi_gamma[], kappa_gamma[].
inline Json params_to_json(const ParamVector& th) {
    Json j;
    j["omega"] = th.omega;
    j["beta"] = th.beta;
    j["psi"] = th.psi;
    j["delta_alpha"] = th.alpha.delta;
    j["phi_alpha"] = th.alpha.phi;
    j["kappa_alpha"] = th.alpha.kappa;
    Json dg = Json::array(), pg = Json::array(), kg = Json::array();
    for (const auto& g : th.gamma) {
        dg.push_back(g.delta);
        pg.push_back(g.phi);
        kg.push_back(g.kappa);
    }
    j["delta_gamma"] = dg;
    j["phi_gamma"] = pg;
    j["kappa_gamma"] = kg;
    return j;
}

/// Accepts a bare parameter object or any document with a `theta_hat` member
/// (such as a fit report). Missing optional blocks default to zero/empty.
inline ParamVector params_from_json(const Json& doc) {
    const Json& j = doc.contains("theta_hat") ? doc.at("theta_hat") : doc;
    try {
        ParamVector th;
        th.omega = j.at("omega").get<double>();
        th.beta = j.at("beta").get<double>();
        th.psi = j.value("psi", std::vector<double>{});
        th.alpha.delta = j.value("delta_alpha", 0.0);
        th.alpha.phi = j.value("phi_alpha", 0.0);
        th.alpha.kappa = j.value("kappa_alpha", 0.0);
        const auto dg = j.value("delta_gamma", std::vector<double>{});
        const auto pg = j.value("phi_gamma", std::vector<double>(dg.size(), 0.0));
        const auto kg = j.value("kappa_gamma", std::vector<double>(dg.size(), 0.0));
        if (pg.size() != dg.size() || kg.size() != dg.size()) {
            throw Error(ErrorKind::DimensionMismatch, "gamma arrays must have equal length");
        }
        for (std::size_t i = 0; i < dg.size(); ++i) th.gamma.push_back({dg[i], pg[i], kg[i]});
        return th;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("parameter JSON: ") + e.what());
    }
}

inline ParamVector load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
    try {
        return params_from_json(Json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, "'" + path + "': " + e.what());
    }
}

/// Serializable view of a fit.
struct FitReport {
    std::string version{kVersion};
    std::uint64_t seed = 0;
    std::string model;
    ModelSpec spec;
    std::vector<std::string> covariate_names;
    std::vector<std::string> deterministic_names;
    ParamVector theta_hat;
    std::vector<std::string> names;
    std::vector<double> std_errors_hessian;
    std::vector<double> std_errors_sandwich;
    std::size_t n_obs = 0;
    std::size_t k = 0;
    double loglik = 0.0;
    InformationCriteria criteria;
    double rmse_in_sample = 0.0;
    std::string status;
    bool converged = false;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    std::size_t best_start = 0;
    bool information_singular = false;
    std::optional<StationarityReport> stationarity;
    std::optional<InvertibilityReport> invertibility;
    std::optional<FilterPath> path;

    bool operator==(const FitReport& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        auto same_vec = [&](const std::vector<double>& a, const std::vector<double>& b) {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!same(a[i], b[i])) return false;
            return true;
        };
        auto same_path = [&](const FilterPath& a, const FilterPath& b) {
            return same_vec(a.lambda, b.lambda) && same_vec(a.log_lambda, b.log_lambda) && same_vec(a.alpha, b.alpha) &&
                   a.gamma.rows() == b.gamma.rows() && a.gamma.cols() == b.gamma.cols() &&
                   (a.gamma.array() == b.gamma.array()).all() && same_vec(a.innov, b.innov) &&
                   same_vec(a.loglik_terms, b.loglik_terms);
        };
        return version == o.version && seed == o.seed && model == o.model && spec == o.spec &&
               covariate_names == o.covariate_names && deterministic_names == o.deterministic_names &&
               theta_hat == o.theta_hat && names == o.names && same_vec(std_errors_hessian, o.std_errors_hessian) &&
               same_vec(std_errors_sandwich, o.std_errors_sandwich) && n_obs == o.n_obs && k == o.k &&
               same(loglik, o.loglik) && same(criteria.aic, o.criteria.aic) && same(criteria.hqc, o.criteria.hqc) &&
               same(criteria.bic, o.criteria.bic) && same(rmse_in_sample, o.rmse_in_sample) && status == o.status &&
               converged == o.converged && iterations == o.iterations && same(grad_norm, o.grad_norm) &&
               best_start == o.best_start && information_singular == o.information_singular &&
               stationarity == o.stationarity && invertibility == o.invertibility &&
               path.has_value() == o.path.has_value() && (!path || same_path(*path, *o.path));
    }
};

inline FitReport make_report(const FitResult& r, const SeriesData& data, std::uint64_t seed, bool with_path) {
    FitReport rep;
    rep.seed = seed;
    const bool static_model = !r.spec.alpha_time_varying &&
                              std::none_of(r.spec.gamma_time_varying.begin(), r.spec.gamma_time_varying.end(), [](bool b) { return b; });
    rep.model = static_model ? "parx" : "tv-parx";
    rep.spec = r.spec;
    rep.covariate_names = data.x_names;
    rep.deterministic_names = data.d_names;
    rep.theta_hat = r.theta_hat;
    rep.names = r.names;
    rep.std_errors_hessian = r.std_errors_hessian;
    rep.std_errors_sandwich = r.std_errors_sandwich;
    rep.n_obs = r.n_obs;
    rep.k = r.k;
    rep.loglik = r.loglik;
    rep.criteria = r.criteria;
    rep.rmse_in_sample = r.rmse_in_sample;
    rep.status = std::string(to_string(r.convergence.status));
    rep.converged = r.convergence.converged;
    rep.iterations = r.convergence.iterations;
    rep.grad_norm = r.convergence.grad_norm;
    rep.best_start = r.convergence.best_start;
    rep.information_singular = r.information_singular;
    rep.stationarity = r.stationarity;
    rep.invertibility = r.invertibility;
    if (with_path) rep.path = r.path;
    return rep;
}

inline Json to_json(const FitReport& r) {
    Json j;
    j["software"] = {{"name", "tvparx"}, {"version", r.version}};
    j["seed"] = r.seed;
    j["model"] = r.model;
    j["spec"] = {{"n_covariates", r.spec.n_covariates},
                 {"n_deterministics", r.spec.n_deterministics},
                 {"alpha_time_varying", r.spec.alpha_time_varying},
                 {"gamma_time_varying", r.spec.gamma_time_varying},
                 {"covariates", r.covariate_names},
                 {"deterministics", r.deterministic_names}};
    j["n_obs"] = r.n_obs;
    j["k"] = r.k;
    j["theta_hat"] = params_to_json(r.theta_hat);
    j["parameter_names"] = r.names;
    Json se_h, se_s;
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        se_h[r.names[i]] = detail::number(i < r.std_errors_hessian.size() ? r.std_errors_hessian[i] : std::nan(""));
        se_s[r.names[i]] = detail::number(i < r.std_errors_sandwich.size() ? r.std_errors_sandwich[i] : std::nan(""));
    }
    j["std_errors"] = {{"hessian", r.std_errors_hessian.empty() ? Json(nullptr) : se_h},
                       {"sandwich", r.std_errors_sandwich.empty() ? Json(nullptr) : se_s}};
    j["loglik"] = detail::number(r.loglik);
    j["aic"] = detail::number(r.criteria.aic);
    j["hqc"] = detail::number(r.criteria.hqc);
    j["bic"] = detail::number(r.criteria.bic);
    j["rmse_in_sample"] = detail::number(r.rmse_in_sample);
    j["convergence"] = {{"status", r.status},
                        {"converged", r.converged},
                        {"iterations", r.iterations},
                        {"grad_norm", detail::number(r.grad_norm)},
                        {"best_start", r.best_start},
                        {"information_singular", r.information_singular}};
    Json diag;
    if (r.stationarity) {
        const auto& s = *r.stationarity;
        diag["stationarity"] = {{"alpha_bar", detail::number(s.alpha_bar)}, {"cond_phi", s.cond_phi},
                                {"cond_beta", s.cond_beta},                 {"cond_product", s.cond_product},
                                {"gamma_conds", s.gamma_conds},             {"all_satisfied", s.all_satisfied}};
    } else {
        diag["stationarity"] = nullptr;
    }
    if (r.invertibility) {
        const auto& v = *r.invertibility;
        diag["invertibility"] = {{"ell", detail::number(v.ell)},
                                 {"empirical_log_contraction", detail::number(v.empirical_log_contraction)},
                                 {"satisfied_empirically", v.satisfied_empirically}};
    } else {
        diag["invertibility"] = nullptr;
    }
    j["diagnostics"] = diag;
    if (r.path) {
        const auto& p = *r.path;
        Json gam = Json::array();
        for (Eigen::Index c = 0; c < p.gamma.cols(); ++c) {
            std::vector<double> col(static_cast<std::size_t>(p.gamma.rows()));
            for (Eigen::Index t = 0; t < p.gamma.rows(); ++t) col[static_cast<std::size_t>(t)] = p.gamma(t, c);
            gam.push_back(detail::numbers(col));
        }
        j["path"] = {{"lambda", detail::numbers(p.lambda)},   {"log_lambda", detail::numbers(p.log_lambda)},
                     {"alpha", detail::numbers(p.alpha)},     {"gamma", gam},
                     {"innov", detail::numbers(p.innov)},     {"loglik_terms", detail::numbers(p.loglik_terms)}};
    }
    return j;
}

inline FitReport report_from_json(const Json& j) {
    try {
        FitReport r;
        r.version = j.at("software").at("version").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.model = j.at("model").get<std::string>();
        const auto& s = j.at("spec");
        r.spec.n_covariates = s.at("n_covariates").get<std::size_t>();
        r.spec.n_deterministics = s.at("n_deterministics").get<std::size_t>();
        r.spec.alpha_time_varying = s.at("alpha_time_varying").get<bool>();
        r.spec.gamma_time_varying = s.at("gamma_time_varying").get<std::vector<bool>>();
        r.covariate_names = s.at("covariates").get<std::vector<std::string>>();
        r.deterministic_names = s.at("deterministics").get<std::vector<std::string>>();
        r.n_obs = j.at("n_obs").get<std::size_t>();
        r.k = j.at("k").get<std::size_t>();
        r.theta_hat = params_from_json(j.at("theta_hat"));
        r.names = j.at("parameter_names").get<std::vector<std::string>>();
        const auto& se = j.at("std_errors");
        for (const auto& [key, out] : {std::pair{"hessian", &r.std_errors_hessian}, std::pair{"sandwich", &r.std_errors_sandwich}}) {
            if (se.at(key).is_null()) continue;
            for (const auto& name : r.names) out->push_back(detail::number(se.at(key).at(name)));
        }
        r.loglik = detail::number(j.at("loglik"));
        r.criteria = {detail::number(j.at("aic")), detail::number(j.at("hqc")), detail::number(j.at("bic"))};
        r.rmse_in_sample = detail::number(j.at("rmse_in_sample"));
        const auto& c = j.at("convergence");
        r.status = c.at("status").get<std::string>();
        r.converged = c.at("converged").get<bool>();
        r.iterations = c.at("iterations").get<std::size_t>();
        r.grad_norm = detail::number(c.at("grad_norm"));
        r.best_start = c.at("best_start").get<std::size_t>();
        r.information_singular = c.at("information_singular").get<bool>();
        const auto& d = j.at("diagnostics");
        if (!d.at("stationarity").is_null()) {
            const auto& st = d.at("stationarity");
            StationarityReport sr;
            sr.alpha_bar = detail::number(st.at("alpha_bar"));
            sr.cond_phi = st.at("cond_phi").get<bool>();
            sr.cond_beta = st.at("cond_beta").get<bool>();
            sr.cond_product = st.at("cond_product").get<bool>();
            sr.gamma_conds = st.at("gamma_conds").get<std::vector<bool>>();
            sr.all_satisfied = st.at("all_satisfied").get<bool>();
            r.stationarity = sr;
        }
        if (!d.at("invertibility").is_null()) {
            const auto& iv = d.at("invertibility");
            r.invertibility = InvertibilityReport{detail::number(iv.at("ell")),
                                                  detail::number(iv.at("empirical_log_contraction")),
                                                  iv.at("satisfied_empirically").get<bool>()};
        }
        if (j.contains("path")) {
            const auto& p = j.at("path");
            FilterPath fp;
            fp.lambda = detail::numbers(p.at("lambda"));
            fp.log_lambda = detail::numbers(p.at("log_lambda"));
            fp.alpha = detail::numbers(p.at("alpha"));
            fp.innov = detail::numbers(p.at("innov"));
            fp.loglik_terms = detail::numbers(p.at("loglik_terms"));
            const auto& g = p.at("gamma");
            fp.gamma = Matrix(static_cast<Eigen::Index>(fp.lambda.size()), static_cast<Eigen::Index>(g.size()));
            for (std::size_t c2 = 0; c2 < g.size(); ++c2) {
                const auto col = detail::numbers(g[c2]);
                for (std::size_t t = 0; t < col.size(); ++t) {
                    fp.gamma(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c2)) = col[t];
                }
            }
            r.path = fp;
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("fit report: ") + e.what());
    }
}

inline Json forecast_to_json(const ForecastResult& f, std::size_t n_paths, std::uint64_t seed) {
    Json j;
    j["software"] = {{"name", "tvparx"}, {"version", std::string(kVersion)}};
    j["seed"] = seed;
    j["horizon"] = f.mean.size();
    j["n_paths"] = n_paths;
    j["lambda_next"] = detail::number(f.lambda_next);
    j["alpha_next"] = detail::number(f.alpha_next);
    j["gamma_next"] = detail::numbers(f.gamma_next);
    Json rows = Json::array();
    for (std::size_t h = 0; h < f.mean.size(); ++h) {
        rows.push_back({{"h", h + 1},
                        {"mean", detail::number(f.mean[h])},
                        {"mean_se", detail::number(f.mean_se[h])},
                        {"q05", f.q05[h]},
                        {"q50", f.q50[h]},
                        {"q95", f.q95[h]}});
    }
    j["forecasts"] = rows;
    return j;
}

// ---------------------------------------------------------------------------
// Monte Carlo tables
// ---------------------------------------------------------------------------

inline void write_mc_csv(std::ostream& out, const mc::MCResult& res) {
    out << "delta,gamma,T,model,mean_rmse,n_ok,n_fail\n";
    for (const auto& cell : res.cells) {
        for (const auto* m : {&cell.par, &cell.tvpar}) {
            out << format_double(cell.cfg.delta) << ',' << format_double(cell.cfg.gamma) << ',' << cell.cfg.T << ','
                << mc::to_string(m->model) << ',' << format_double(m->mean_rmse) << ',' << m->n_ok << ','
                << m->n_fail << '\n';
        }
    }
}

inline Json mc_to_json(const mc::MCResult& res) {
    Json j;
    j["software"] = {{"name", "tvparx"}, {"version", std::string(kVersion)}};
    j["reps"] = res.reps;
    j["base_seed"] = res.base_seed;
    Json cells = Json::array();
    for (const auto& cell : res.cells) {
        for (const auto* m : {&cell.par, &cell.tvpar}) {
            cells.push_back({{"delta", cell.cfg.delta},
                             {"gamma", cell.cfg.gamma},
                             {"T", cell.cfg.T},
                             {"model", std::string(mc::to_string(m->model))},
                             {"mean_rmse", detail::number(m->mean_rmse)},
                             {"mean_replication_rmse", detail::number(m->mean_replication_rmse)},
                             {"n_ok", m->n_ok},
                             {"n_fail", m->n_fail},
                             {"n_not_converged", m->n_not_converged},
                             {"flagged", m->flagged}});
        }
    }
    j["cells"] = cells;
    return j;
}

/// Pointwise mean and 2.5% / 97.5% bands of the filtered intensity.
inline void write_bands_csv(std::ostream& out, const mc::MCResult& res) {
    out << "delta,gamma,T,model,t,lambda0,mean,lo,hi\n";
    for (const auto& cell : res.cells) {
        for (const auto* m : {&cell.par, &cell.tvpar}) {
            for (std::size_t t = 0; t < m->band_mean.size(); ++t) {
                out << format_double(cell.cfg.delta) << ',' << format_double(cell.cfg.gamma) << ',' << cell.cfg.T
                    << ',' << mc::to_string(m->model) << ',' << (t + 1) << ',' << format_double(cell.lambda0[t]) << ','
                    << format_double(m->band_mean[t]) << ',' << format_double(m->band_lo[t]) << ','
                    << format_double(m->band_hi[t]) << '\n';
            }
        }
    }
}

}  // namespace tvparx
