#pragma once

// Dataset ingestion, the embedded UEFA dataset and report serialization.
//
// CSV input: two numeric columns, comma separated, optional header, UTF-8.
// JSON output: versioned envelope {schema_version, kind, payload} with
// stable field ordering.

#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bvr/estimation.hpp"
#include "bvr/inference.hpp"
#include "bvr/model.hpp"

namespace bvr {

using ordered_json = nlohmann::ordered_json;

struct Dataset {
    std::string label;
    PairedSample pairs;
    std::pair<std::string, std::string> column_names{"x", "y"};
    std::string provenance;
};

enum class CsvErrorKind { io, empty_file, wrong_column_count, malformed_row, nonpositive_value };

struct CsvError : std::runtime_error {
    CsvErrorKind kind;
    std::size_t row;  // 1-based data row, 0 when not row specific
    CsvError(CsvErrorKind k, std::size_t r, const std::string& msg)
        : std::runtime_error(msg), kind(k), row(r) {}
};

struct CsvOptions {
    // Unset: treat the first row as a header iff it does not parse as data.
    std::optional<bool> has_header;
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front()))) tok.remove_prefix(1);
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
    if (tok.empty()) return false;
    char* end = nullptr;
    const std::string buf(tok);
    out = std::strtod(buf.c_str(), &end);
    return end == buf.c_str() + buf.size();
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {}) {
    std::ifstream in(path);
    if (!in)
        throw CsvError(CsvErrorKind::io, 0, "load_csv: cannot open '" + path.string() + "'");
    Dataset ds;
    ds.label = path.stem().string();
    ds.provenance = path.string();
    std::string line;
    std::size_t lineno = 0, datarow = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto toks = detail::split_csv_row(line);
        if (first) {
            first = false;
            double a, b;
            const bool parses = toks.size() == 2 && detail::parse_double(toks[0], a) &&
                                detail::parse_double(toks[1], b);
            const bool header = options.has_header.value_or(!parses);
            if (header) {
                if (toks.size() == 2) ds.column_names = {toks[0], toks[1]};
                continue;
            }
        }
        ++datarow;
        if (toks.size() != 2)
            throw CsvError(CsvErrorKind::wrong_column_count, datarow,
                           "load_csv: row " + std::to_string(datarow) + " has " +
                               std::to_string(toks.size()) + " columns, expected 2");
        double x, y;
        if (!detail::parse_double(toks[0], x) || !detail::parse_double(toks[1], y))
            throw CsvError(CsvErrorKind::malformed_row, datarow,
                           "load_csv: row " + std::to_string(datarow) + " is not numeric: '" +
                               line + "'");
        if (!(x > 0.0) || !(y > 0.0))
            throw CsvError(CsvErrorKind::nonpositive_value, datarow,
                           "load_csv: row " + std::to_string(datarow) +
                               " has a nonpositive value");
        ds.pairs.observations.push_back({x, y});
    }
    if (ds.pairs.observations.empty())
        throw CsvError(CsvErrorKind::empty_file, 0,
                       "load_csv: no data rows in '" + path.string() + "'");
    return ds;
}

// UEFA Champions League group-stage matches (2005-2006 and 2004-2005
// seasons): time of the first kick goal by any team (strength X) and time
// of the first goal of any kind by the home team (stress Y), in minutes.
inline Dataset uefa_dataset() {
    static constexpr std::array<std::pair<double, double>, 37> rows{{
        {26, 20}, {63, 18}, {19, 19}, {66, 85}, {40, 40}, {49, 49}, {8, 8},
        {69, 71}, {39, 39}, {82, 48}, {72, 72}, {66, 62}, {25, 9},  {41, 3},
        {16, 75}, {18, 18}, {22, 14}, {42, 42}, {36, 52},
        {34, 34}, {53, 39}, {54, 7},  {51, 28}, {76, 64}, {64, 15}, {26, 48},
        {16, 16}, {44, 13}, {25, 14}, {55, 11}, {49, 49}, {24, 24}, {44, 30},
        {42, 3},  {27, 47}, {28, 28}, {2, 2},
    }};
    Dataset ds;
    ds.label = "uefa";
    ds.column_names = {"first_kick_goal", "first_home_goal"};
    ds.provenance = "embedded UEFA Champions League 2004-2006 group stage";
    ds.pairs.observations.reserve(rows.size());
    for (const auto& [x, y] : rows) ds.pairs.observations.push_back({x, y});
    return ds;
}

inline Dataset swapped(Dataset ds) {
    for (auto& o : ds.pairs.observations) std::swap(o.x, o.y);
    std::swap(ds.column_names.first, ds.column_names.second);
    ds.label += "_swapped";
    return ds;
}

// ---- serialization -----------------------------------------------------

inline constexpr int kSchemaVersion = 1;

namespace detail {

// Rounds to 6 significant digits unless full precision is requested.
inline double report_num(double v, bool full_precision) {
    if (full_precision || v == 0.0 || !std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace detail

struct ReportOptions {
    bool full_precision{false};
};

inline ordered_json to_json(const BvrParams& p, const ReportOptions& o = {}) {
    return {{"lambda0", detail::report_num(p.lambda0, o.full_precision)},
            {"lambda1", detail::report_num(p.lambda1, o.full_precision)},
            {"lambda2", detail::report_num(p.lambda2, o.full_precision)}};
}

inline BvrParams bvr_params_from_json(const ordered_json& j) {
    return {j.at("lambda0").get<double>(), j.at("lambda1").get<double>(),
            j.at("lambda2").get<double>()};
}

inline ordered_json to_json(const FitResult& fit, const ReportOptions& o = {}) {
    ordered_json j;
    j["params"] = to_json(fit.params, o);
    j["r_hat"] = detail::report_num(fit.r_hat, o.full_precision);
    j["counts"] = {{"n0", fit.counts.n0}, {"n1", fit.counts.n1}, {"n2", fit.counts.n2}};
    j["log_likelihood"] = detail::report_num(fit.log_likelihood, o.full_precision);
    j["status"] = to_string(fit.status);
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["final_score_norm"] = fit.final_score_norm;
    if (fit.delta) {
        j["sigma"] = detail::report_num(fit.delta->sigma, o.full_precision);
        j["gradient"] = {detail::report_num(fit.delta->gradient[0], o.full_precision),
                         detail::report_num(fit.delta->gradient[1], o.full_precision),
                         detail::report_num(fit.delta->gradient[2], o.full_precision)};
    }
    if (fit.info) {
        ordered_json rowsj = ordered_json::array();
        for (std::size_t i = 0; i < 3; ++i) {
            ordered_json row = ordered_json::array();
            for (std::size_t k = 0; k < 3; ++k)
                row.push_back(detail::report_num(fit.info->entries(i, k), o.full_precision));
            rowsj.push_back(row);
        }
        j["information"] = rowsj;
    }
    return j;
}

inline ordered_json to_json(const IntervalEstimate& e, const ReportOptions& o = {}) {
    ordered_json j;
    j["method"] = to_string(e.method);
    j["level"] = e.level;
    j["lower"] = detail::report_num(e.lower, o.full_precision);
    j["upper"] = detail::report_num(e.upper, o.full_precision);
    ordered_json d;
    d["replicates_used"] = e.diagnostics.replicates_used;
    d["replicate_failures"] = e.diagnostics.replicate_failures;
    d["clamped_lower"] = detail::report_num(e.diagnostics.clamped_lower, o.full_precision);
    d["clamped_upper"] = detail::report_num(e.diagnostics.clamped_upper, o.full_precision);
    if (!e.diagnostics.note.empty()) d["note"] = e.diagnostics.note;
    if (e.diagnostics.curve) {
        const auto& c = *e.diagnostics.curve;
        d["curve"] = {{"grid", c.grid},
                      {"lower_bounds", c.lower_bounds},
                      {"upper_bounds", c.upper_bounds},
                      {"g_lower", c.g_lower},
                      {"g_upper", c.g_upper},
                      {"degree", c.degree},
                      {"monotone_warning", c.monotone_warning}};
    }
    j["diagnostics"] = d;
    return j;
}

inline ordered_json to_json(const TestResult& t, const ReportOptions& o = {}) {
    ordered_json j;
    j["method"] = to_string(t.method);
    j["r0"] = t.r0;
    j["alternative"] = to_string(t.alternative);
    j["alpha"] = t.alpha;
    j["p_value"] = detail::report_num(t.p_value, o.full_precision);
    j["reject"] = t.reject;
    if (t.statistic) j["statistic"] = detail::report_num(*t.statistic, o.full_precision);
    if (t.cutoff_lower) j["cutoff_lower"] = detail::report_num(*t.cutoff_lower, o.full_precision);
    if (t.cutoff_upper) j["cutoff_upper"] = detail::report_num(*t.cutoff_upper, o.full_precision);
    if (t.method == Method::cat) {
        j["replicates_used"] = t.replicates_used;
        j["replicate_failures"] = t.replicate_failures;
    }
    return j;
}

inline ordered_json report_envelope(const std::string& kind, ordered_json payload) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = kind;
    j["payload"] = std::move(payload);
    return j;
}

// Writes atomically: the temp file is renamed into place only on success,
// so a failed write leaves no partial file.
inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("write failed: cannot open '" + path.string() + "'");
        out << text;
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw std::runtime_error("write failed for '" + path.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("write failed: cannot move into '" + path.string() + "': " +
                                 ec.message());
    }
}

inline std::string format_csv_number(double v, bool full_precision) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), full_precision ? "%.17g" : "%.6g", v);
    return buf;
}

inline std::string dataset_to_csv(const Dataset& ds, bool full_precision = true) {
    std::ostringstream out;
    out << ds.column_names.first << ',' << ds.column_names.second << '\n';
    for (const auto& o : ds.pairs.observations)
        out << format_csv_number(o.x, full_precision) << ','
            << format_csv_number(o.y, full_precision) << '\n';
    return out.str();
}

inline std::string to_csv(const FitResult& fit, const ReportOptions& o = {}) {
    std::ostringstream out;
    out << "lambda0,lambda1,lambda2,r_hat,n0,n1,n2,log_likelihood,sigma,status\n";
    out << format_csv_number(fit.params.lambda0, o.full_precision) << ','
        << format_csv_number(fit.params.lambda1, o.full_precision) << ','
        << format_csv_number(fit.params.lambda2, o.full_precision) << ','
        << format_csv_number(fit.r_hat, o.full_precision) << ',' << fit.counts.n0 << ','
        << fit.counts.n1 << ',' << fit.counts.n2 << ','
        << format_csv_number(fit.log_likelihood, o.full_precision) << ','
        << (fit.delta ? format_csv_number(fit.delta->sigma, o.full_precision) : "") << ','
        << to_string(fit.status) << '\n';
    return out.str();
}

inline std::string to_csv(const IntervalEstimate& e, const ReportOptions& o = {}) {
    std::ostringstream out;
    out << "method,level,lower,upper\n";
    out << to_string(e.method) << ',' << format_csv_number(e.level, o.full_precision) << ','
        << format_csv_number(e.lower, o.full_precision) << ','
        << format_csv_number(e.upper, o.full_precision) << '\n';
    return out.str();
}

inline std::string to_csv(const TestResult& t, const ReportOptions& o = {}) {
    std::ostringstream out;
    out << "method,r0,alternative,alpha,p_value,reject\n";
    out << to_string(t.method) << ',' << format_csv_number(t.r0, o.full_precision) << ','
        << to_string(t.alternative) << ',' << format_csv_number(t.alpha, o.full_precision)
        << ',' << format_csv_number(t.p_value, o.full_precision) << ',' << (t.reject ? 1 : 0)
        << '\n';
    return out.str();
}

enum class ReportFormat { csv, json };

namespace detail {

template <typename T>
void write_report_impl(const char* kind, const T& value, ReportFormat format,
                       const std::filesystem::path& path, const ReportOptions& o) {
    if (format == ReportFormat::json)
        write_text_file(path, report_envelope(kind, to_json(value, o)).dump(2) + "\n");
    else
        write_text_file(path, to_csv(value, o));
}

}  // namespace detail

inline void write_report(const FitResult& fit, ReportFormat format,
                         const std::filesystem::path& path, const ReportOptions& o = {}) {
    detail::write_report_impl("fit_result", fit, format, path, o);
}

inline void write_report(const IntervalEstimate& e, ReportFormat format,
                         const std::filesystem::path& path, const ReportOptions& o = {}) {
    detail::write_report_impl("interval", e, format, path, o);
}

inline void write_report(const TestResult& t, ReportFormat format,
                         const std::filesystem::path& path, const ReportOptions& o = {}) {
    detail::write_report_impl("test", t, format, path, o);
}

}  // namespace bvr
