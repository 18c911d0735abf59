#pragma once

// Monte Carlo study harness: bias/MSE of the reliability MLE, confidence
// interval length and coverage, and power of the CAT and asymptotic tests,
// over configurable grids of sample size and dependence rate.
//
// Every cell draws from a stream derived deterministically from the root
// seed and the cell coordinates, so any single cell rerun in isolation
// reproduces its row of the full study and results do not depend on the
// worker count.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "bvr/dataio.hpp"
#include "bvr/estimation.hpp"
#include "bvr/inference.hpp"
#include "bvr/model.hpp"
#include "bvr/rng.hpp"

namespace bvr {

struct StudyConfig {
    std::vector<std::size_t> sample_sizes{5, 10, 15, 20, 25, 50};
    std::vector<double> lambda0_values{0.5, 1.0, 1.5, 2.0, 2.5};
    double lambda1{1.0};
    double lambda2{1.0};
    std::size_t replications{1000};
    double alpha{0.05};
    std::uint64_t seed{0};
    unsigned workers{1};
    std::vector<Method> methods{Method::asymptotic, Method::bootstrap, Method::cat};
    std::size_t nboot{1000};      // bootstrap replicates per interval
    std::size_t cat_m{1000};      // CAT replicates per test / grid point
    std::size_t cat_grid_size{10};
};

inline void validate(const StudyConfig& cfg) {
    if (cfg.replications < 100)
        throw std::invalid_argument("StudyConfig: replications must be >= 100");
    if (!(cfg.lambda1 > 0.0) || !(cfg.lambda2 > 0.0))
        throw std::invalid_argument("StudyConfig: lambda1 and lambda2 must be positive");
    if (cfg.sample_sizes.empty()) throw std::invalid_argument("StudyConfig: no sample sizes");
    for (double l0 : cfg.lambda0_values)
        if (!(l0 > 0.0)) throw std::invalid_argument("StudyConfig: lambda0 values must be positive");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw std::invalid_argument("StudyConfig: alpha must lie inside (0,1)");
}

struct MethodStats {
    double avg_length{};
    double coverage{};
    double power{};
    std::size_t failures{};
};

struct StudyRow {
    std::size_t n{};
    double lambda0{};
    double true_r{};
    double estimate_mean{};
    double bias{};
    double mse{};
    double variance{};
    std::map<std::string, MethodStats> methods;
    std::size_t fit_failures{};
    bool flagged{};  // more than 10% of fits failed in this cell
};

struct StudyReport {
    std::string kind;  // table1 | table2 | table3
    StudyConfig config;
    double null_r0{};                 // power studies only
    std::vector<StudyRow> rows;
    double runtime_seconds{};
    std::size_t total_failures{};
    std::string notes;
};

namespace detail {

inline std::uint64_t double_bits(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof(u));
    return u;
}

// Root stream of one study cell, independent of the cell's position in the
// config lists.
inline Rng cell_rng(std::uint64_t seed, std::uint64_t kind_tag, std::size_t n, double a,
                    double b) {
    return Rng(seed).derive(kind_tag).derive(n).derive(double_bits(a), double_bits(b));
}

constexpr std::uint64_t kBiasTag = 1, kCoverageTag = 2, kPowerTag = 3;
constexpr std::uint64_t kBootSub = 101, kCatSub = 102;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace detail

// Bias and MSE of the reliability MLE per (n, lambda0) cell.
inline StudyReport run_bias_mse(const StudyConfig& cfg) {
    validate(cfg);
    detail::Timer timer;
    StudyReport report;
    report.kind = "table1";
    report.config = cfg;
    for (std::size_t n : cfg.sample_sizes) {
        for (double l0 : cfg.lambda0_values) {
            const BvrParams truth{l0, cfg.lambda1, cfg.lambda2};
            const double true_r = reliability(truth);
            const Rng root = detail::cell_rng(cfg.seed, detail::kBiasTag, n, l0, 0.0);
            std::vector<double> rhats(cfg.replications,
                                      std::numeric_limits<double>::quiet_NaN());
            parallel_for(cfg.replications, cfg.workers, [&](std::size_t i) {
                Rng rng = root.derive(i);
                const auto sample = sample_bvr(truth, n, rng);
                const auto fit = fit_mle(sample);
                if (fit.status != FitStatus::no_convergence) rhats[i] = fit.r_hat;
            });
            StudyRow row;
            row.n = n;
            row.lambda0 = l0;
            row.true_r = true_r;
            double sum = 0.0;
            std::size_t used = 0;
            for (double r : rhats)
                if (!std::isnan(r)) { sum += r; ++used; }
            row.fit_failures = cfg.replications - used;
            row.flagged = row.fit_failures * 10 > cfg.replications;
            if (used > 0) {
                const double mean = sum / static_cast<double>(used);
                double ss_mean = 0.0, ss_true = 0.0;
                for (double r : rhats) {
                    if (std::isnan(r)) continue;
                    ss_mean += (r - mean) * (r - mean);
                    ss_true += (r - true_r) * (r - true_r);
                }
                row.estimate_mean = mean;
                row.bias = mean - true_r;
                row.variance = ss_mean / static_cast<double>(used);
                row.mse = ss_true / static_cast<double>(used);
            }
            report.total_failures += row.fit_failures;
            report.rows.push_back(std::move(row));
        }
    }
    report.runtime_seconds = timer.seconds();
    return report;
}

// Average confidence length and empirical coverage per cell and method.
inline StudyReport run_coverage(const StudyConfig& cfg) {
    validate(cfg);
    detail::Timer timer;
    StudyReport report;
    report.kind = "table2";
    report.config = cfg;
    const auto wants = [&](Method m) {
        for (Method x : cfg.methods)
            if (x == m) return true;
        return false;
    };
    struct Outcome {
        bool ok{false};
        bool covered{false};
        double length{0.0};
    };
    for (std::size_t n : cfg.sample_sizes) {
        for (double l0 : cfg.lambda0_values) {
            const BvrParams truth{l0, cfg.lambda1, cfg.lambda2};
            const double true_r = reliability(truth);
            const Rng root = detail::cell_rng(cfg.seed, detail::kCoverageTag, n, l0, 0.0);
            const std::size_t reps = cfg.replications;
            std::vector<Outcome> asym(reps), boot(reps), cat(reps);
            std::vector<char> fit_ok(reps, 0);
            parallel_for(reps, cfg.workers, [&](std::size_t i) {
                Rng rng = root.derive(i);
                const auto sample = sample_bvr(truth, n, rng);
                const auto fit = fit_mle(sample);
                if (fit.status == FitStatus::no_convergence) return;
                fit_ok[i] = 1;
                if (wants(Method::asymptotic) && fit.has_sigma()) {
                    const auto ci = asymptotic_ci(fit, cfg.alpha);
                    asym[i] = {true, ci.lower <= true_r && true_r <= ci.upper,
                               ci.upper - ci.lower};
                }
                if (wants(Method::bootstrap)) {
                    try {
                        const MonteCarloConfig mc{cfg.nboot, root.derive(i, detail::kBootSub).seed(), 1};
                        const auto ci = bootstrap_ci(sample, cfg.alpha, mc);
                        boot[i] = {true, ci.lower <= true_r && true_r <= ci.upper,
                                   ci.upper - ci.lower};
                    } catch (const std::exception&) {
                    }
                }
                if (wants(Method::cat) && fit.has_sigma()) {
                    try {
                        const MonteCarloConfig mc{cfg.cat_m, root.derive(i, detail::kCatSub).seed(), 1};
                        const auto grid = default_cat_grid(fit, cfg.cat_grid_size);
                        const auto ci = cat_interval(sample, cfg.alpha, grid, mc);
                        cat[i] = {true, ci.lower <= true_r && true_r <= ci.upper,
                                  ci.upper - ci.lower};
                    } catch (const std::exception&) {
                    }
                }
            });
            StudyRow row;
            row.n = n;
            row.lambda0 = l0;
            row.true_r = true_r;
            for (std::size_t i = 0; i < reps; ++i)
                if (!fit_ok[i]) ++row.fit_failures;
            row.flagged = row.fit_failures * 10 > reps;
            const auto reduce = [&](Method m, const std::vector<Outcome>& out) {
                if (!wants(m)) return;
                MethodStats st;
                std::size_t used = 0;
                for (const auto& o : out) {
                    if (!o.ok) continue;
                    ++used;
                    st.avg_length += o.length;
                    st.coverage += o.covered ? 1.0 : 0.0;
                }
                st.failures = reps - used;
                if (used > 0) {
                    st.avg_length /= static_cast<double>(used);
                    st.coverage /= static_cast<double>(used);
                }
                row.methods[to_string(m)] = st;
            };
            reduce(Method::asymptotic, asym);
            reduce(Method::bootstrap, boot);
            reduce(Method::cat, cat);
            report.total_failures += row.fit_failures;
            report.rows.push_back(std::move(row));
        }
    }
    report.runtime_seconds = timer.seconds();
    return report;
}

// Rejection rates of H0: R = r0 against R > r0 for the CAT (P1) and the
// asymptotic test (P2). Samples are drawn under each true R with lambda0
// and lambda1 held fixed and lambda2 solved from the reliability formula.
// Replicates whose fit admits no asymptotic variance count as
// non-rejections for the asymptotic test.
inline StudyReport run_power(const StudyConfig& cfg, double r0,
                             const std::vector<double>& true_r_values) {
    validate(cfg);
    if (!(r0 > 0.0 && r0 < 1.0))
        throw std::invalid_argument("run_power: r0 must lie inside (0,1)");
    detail::Timer timer;
    StudyReport report;
    report.kind = "table3";
    report.config = cfg;
    report.null_r0 = r0;
    const double l0 = cfg.lambda0_values.front();
    const double l1 = cfg.lambda1;
    for (std::size_t n : cfg.sample_sizes) {
        for (double true_r : true_r_values) {
            if (!(true_r > 0.0 && true_r < 1.0))
                throw std::invalid_argument("run_power: true R values must lie inside (0,1)");
            const BvrParams truth{l0, l1, true_r * (l0 + l1) / (1.0 - true_r)};
            const Rng root = detail::cell_rng(cfg.seed, detail::kPowerTag, n, true_r, r0);
            const std::size_t reps = cfg.replications;
            std::vector<char> cat_reject(reps, 0), asym_reject(reps, 0);
            std::vector<char> cat_fail(reps, 0), asym_fail(reps, 0), fit_fail(reps, 0);
            parallel_for(reps, cfg.workers, [&](std::size_t i) {
                Rng rng = root.derive(i);
                const auto sample = sample_bvr(truth, n, rng);
                const auto fit = fit_mle(sample);
                if (fit.status == FitStatus::no_convergence) {
                    fit_fail[i] = 1;
                    return;
                }
                if (fit.has_sigma()) {
                    asym_reject[i] =
                        asymptotic_test(fit, r0, Alternative::greater, cfg.alpha).reject;
                } else {
                    asym_fail[i] = 1;  // counted, decided as non-rejection
                }
                try {
                    const MonteCarloConfig mc{cfg.cat_m, root.derive(i, detail::kCatSub).seed(), 1};
                    cat_reject[i] =
                        cat_test(sample, r0, Alternative::greater, cfg.alpha, mc).reject;
                } catch (const std::exception&) {
                    cat_fail[i] = 1;
                }
            });
            StudyRow row;
            row.n = n;
            row.lambda0 = l0;
            row.true_r = true_r;
            MethodStats cat_stats, asym_stats;
            for (std::size_t i = 0; i < reps; ++i) {
                row.fit_failures += fit_fail[i];
                cat_stats.power += cat_reject[i];
                asym_stats.power += asym_reject[i];
                cat_stats.failures += cat_fail[i] + fit_fail[i];
                asym_stats.failures += asym_fail[i] + fit_fail[i];
            }
            cat_stats.power /= static_cast<double>(reps);
            asym_stats.power /= static_cast<double>(reps);
            row.flagged = row.fit_failures * 10 > reps;
            row.methods[to_string(Method::cat)] = cat_stats;
            row.methods[to_string(Method::asymptotic)] = asym_stats;
            report.total_failures += row.fit_failures;
            report.rows.push_back(std::move(row));
        }
    }
    report.runtime_seconds = timer.seconds();
    return report;
}

// ---- serialization -----------------------------------------------------

inline ordered_json to_json(const StudyConfig& cfg) {
    ordered_json j;
    j["sample_sizes"] = cfg.sample_sizes;
    j["lambda0_values"] = cfg.lambda0_values;
    j["lambda1"] = cfg.lambda1;
    j["lambda2"] = cfg.lambda2;
    j["replications"] = cfg.replications;
    j["alpha"] = cfg.alpha;
    j["seed"] = cfg.seed;
    j["nboot"] = cfg.nboot;
    j["cat_m"] = cfg.cat_m;
    j["cat_grid_size"] = cfg.cat_grid_size;
    ordered_json ms = ordered_json::array();
    for (Method m : cfg.methods) ms.push_back(to_string(m));
    j["methods"] = ms;
    return j;
}

inline ordered_json to_json(const StudyReport& report, const ReportOptions& o = {}) {
    ordered_json j;
    j["table"] = report.kind;
    j["config"] = to_json(report.config);
    if (report.kind == "table3") j["r0"] = report.null_r0;
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json r;
        r["n"] = row.n;
        r["lambda0"] = detail::report_num(row.lambda0, true);
        r["true_r"] = detail::report_num(row.true_r, o.full_precision);
        if (report.kind == "table1") {
            r["estimate_mean"] = detail::report_num(row.estimate_mean, o.full_precision);
            r["bias"] = detail::report_num(row.bias, o.full_precision);
            r["mse"] = detail::report_num(row.mse, o.full_precision);
            r["variance"] = detail::report_num(row.variance, o.full_precision);
        }
        if (!row.methods.empty()) {
            ordered_json ms;
            for (const auto& [name, st] : row.methods) {
                ordered_json mj;
                if (report.kind == "table2") {
                    mj["avg_length"] = detail::report_num(st.avg_length, o.full_precision);
                    mj["coverage"] = detail::report_num(st.coverage, o.full_precision);
                } else {
                    mj["power"] = detail::report_num(st.power, o.full_precision);
                }
                mj["failures"] = st.failures;
                ms[name] = mj;
            }
            r["methods"] = ms;
        }
        r["fit_failures"] = row.fit_failures;
        r["flagged"] = row.flagged;
        rows.push_back(r);
    }
    j["rows"] = rows;
    j["runtime_seconds"] = report.runtime_seconds;
    j["total_failures"] = report.total_failures;
    if (!report.notes.empty()) j["notes"] = report.notes;
    return j;
}

inline void write_report(const StudyReport& report, ReportFormat format,
                         const std::filesystem::path& path, const ReportOptions& o = {});

inline std::string study_to_csv(const StudyReport& report, bool full_precision = false) {
    std::ostringstream out;
    const auto num = [&](double v) { return format_csv_number(v, full_precision); };
    if (report.kind == "table1") {
        out << "n,lambda0,bias,mse\n";
        for (const auto& r : report.rows)
            out << r.n << ',' << num(r.lambda0) << ',' << num(r.bias) << ',' << num(r.mse)
                << '\n';
    } else if (report.kind == "table2") {
        out << "n,lambda0,method,length,coverage\n";
        for (const auto& r : report.rows)
            for (const auto& [name, st] : r.methods)
                out << r.n << ',' << num(r.lambda0) << ',' << name << ',' << num(st.avg_length)
                    << ',' << num(st.coverage) << '\n';
    } else {
        out << "n,true_r,method,power\n";
        for (const auto& r : report.rows)
            for (const auto& [name, st] : r.methods)
                out << r.n << ',' << num(r.true_r) << ',' << name << ',' << num(st.power)
                    << '\n';
    }
    return out.str();
}

inline void write_report(const StudyReport& report, ReportFormat format,
                         const std::filesystem::path& path, const ReportOptions& o) {
    if (format == ReportFormat::json)
        write_text_file(path, report_envelope("study", to_json(report, o)).dump(2) + "\n");
    else
        write_text_file(path, study_to_csv(report, o.full_precision));
}

}  // namespace bvr
