#pragma once

// Command-line surface. All subcommands are driven through run() so tests
// can exercise the binary in-process; main() is a thin wrapper.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bvr/dataio.hpp"
#include "bvr/estimation.hpp"
#include "bvr/gof.hpp"
#include "bvr/inference.hpp"
#include "bvr/model.hpp"
#include "bvr/simulation.hpp"

namespace bvr::cli {

namespace detail {

inline std::uint64_t default_seed() {
    if (const char* env = std::getenv("BVR_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
        }
    }
    return 0;
}

struct CommonOpts {
    std::uint64_t seed = default_seed();
    double alpha = 0.05;
    std::string format = "json";
    std::string out_path;
    unsigned workers = 1;
    bool full_precision = false;
};

inline void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "root RNG seed (env BVR_SEED as fallback)");
    cmd->add_option("--alpha", o.alpha, "significance level")
        ->check(CLI::Validator(
            [](std::string& v) {
                const double a = std::strtod(v.c_str(), nullptr);
                return (a > 0.0 && a < 1.0) ? std::string{}
                                            : std::string("alpha must lie strictly in (0,1)");
            },
            "FLOAT in (0,1)"));
    cmd->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", o.out_path, "output file (default: stdout)");
    cmd->add_option("--workers", o.workers, "worker thread count")->check(CLI::Range(1u, 256u));
    cmd->add_flag("--full-precision", o.full_precision, "serialize floats at full precision");
}

struct InputOpts {
    std::string input;
    bool swap = false;
    double tie_tolerance = 0.0;
};

inline void add_input(CLI::App* cmd, InputOpts& o) {
    cmd->add_option("--input", o.input, "CSV path or the literal 'uefa'")->required();
    cmd->add_flag("--swap", o.swap, "swap the strength/stress columns");
}

inline Dataset resolve_input(const InputOpts& o) {
    Dataset ds = o.input == "uefa" ? uefa_dataset() : load_csv(o.input, {});
    if (o.swap) ds = swapped(ds);
    return ds;
}

inline void emit(const CommonOpts& o, const std::string& text, std::ostream& out) {
    if (o.out_path.empty()) {
        out << text;
        if (!text.empty() && text.back() != '\n') out << '\n';
    } else {
        write_text_file(o.out_path, text);
    }
}

inline std::string render_json(const ordered_json& j) { return j.dump(2) + "\n"; }

inline Method parse_method(const std::string& m) {
    if (m == "asymptotic") return Method::asymptotic;
    if (m == "bootstrap") return Method::bootstrap;
    if (m == "cat") return Method::cat;
    throw CLI::ValidationError("--method", "unknown method '" + m + "'");
}

inline Alternative parse_alternative(const std::string& a) {
    if (a == "less") return Alternative::less;
    if (a == "greater") return Alternative::greater;
    if (a == "two_sided" || a == "two-sided") return Alternative::two_sided;
    throw CLI::ValidationError("--alternative", "unknown alternative '" + a + "'");
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"stress-strength reliability estimation for the bivariate Rayleigh model"};
    app.require_subcommand(1);

    detail::CommonOpts common;
    detail::InputOpts input;

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit of the rate triple");
    detail::add_common(fit_cmd, common);
    detail::add_input(fit_cmd, input);
    fit_cmd->add_option("--tie-tol", input.tie_tolerance, "tie tolerance |x-y| <= tol")
        ->check(CLI::NonNegativeNumber);

    // interval
    auto* ci_cmd = app.add_subcommand("interval", "confidence interval for the reliability");
    detail::add_common(ci_cmd, common);
    detail::add_input(ci_cmd, input);
    std::string ci_method = "asymptotic";
    std::size_t nboot = 1000, cat_m = 1000, grid_size = 10;
    int degree = 2;
    ci_cmd->add_option("--method", ci_method, "asymptotic | bootstrap | cat")
        ->check(CLI::IsMember({"asymptotic", "bootstrap", "cat"}));
    ci_cmd->add_option("--nboot", nboot, "bootstrap replicates")
        ->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));
    ci_cmd->add_option("--cat-m", cat_m, "CAT replicates per grid point")
        ->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));
    ci_cmd->add_option("--grid-size", grid_size, "CAT inversion grid size")
        ->check(CLI::Range(std::size_t{8}, std::size_t{12}));
    ci_cmd->add_option("--degree", degree, "CAT smoothing polynomial degree")
        ->check(CLI::Range(1, 3));

    // test
    auto* test_cmd = app.add_subcommand("test", "hypothesis test for the reliability");
    detail::add_common(test_cmd, common);
    detail::add_input(test_cmd, input);
    std::string test_method = "asymptotic", alternative = "two_sided";
    double r0 = 0.5;
    test_cmd->add_option("--r0", r0, "null reliability value")->required();
    test_cmd->add_option("--method", test_method, "asymptotic | cat")
        ->check(CLI::IsMember({"asymptotic", "cat"}));
    test_cmd->add_option("--alternative", alternative, "less | greater | two_sided");
    test_cmd->add_option("--cat-m", cat_m, "CAT replicates")
        ->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));

    // gof
    auto* gof_cmd = app.add_subcommand("gof", "marginal Rayleigh Kolmogorov-Smirnov fit check");
    detail::add_common(gof_cmd, common);
    detail::add_input(gof_cmd, input);
    std::string column = "both";
    gof_cmd->add_option("--column", column, "x | y | both")
        ->check(CLI::IsMember({"x", "y", "both"}));

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "draw a synthetic sample as CSV");
    detail::add_common(sample_cmd, common);
    double sl0 = 1.0, sl1 = 1.0, sl2 = 1.0;
    std::size_t sn = 100;
    sample_cmd->add_option("--lambda0", sl0, "shared shock rate")->check(CLI::NonNegativeNumber);
    sample_cmd->add_option("--lambda1", sl1, "strength rate")->check(CLI::PositiveNumber);
    sample_cmd->add_option("--lambda2", sl2, "stress rate")->check(CLI::PositiveNumber);
    sample_cmd->add_option("--n", sn, "sample size")->check(CLI::PositiveNumber);

    // uefa
    auto* uefa_cmd = app.add_subcommand("uefa", "export the embedded UEFA dataset as CSV");
    detail::add_common(uefa_cmd, common);
    bool uefa_swap = false;
    uefa_cmd->add_flag("--swap", uefa_swap, "swap the strength/stress columns");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study presets");
    detail::add_common(sim_cmd, common);
    std::string preset;
    sim_cmd->add_option("preset", preset, "table1 | table2 | table3")
        ->required()
        ->check(CLI::IsMember({"table1", "table2", "table3"}));
    std::size_t reps = 0;
    std::vector<std::size_t> n_list;
    std::vector<double> lambda0_list, r_list;
    std::vector<std::string> method_list;
    double sim_r0 = 0.5;
    sim_cmd->add_option("--reps", reps, "replications per cell")
        ->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));
    sim_cmd->add_option("--n-list", n_list, "sample sizes")->delimiter(',');
    sim_cmd->add_option("--lambda0-list", lambda0_list, "lambda0 grid")->delimiter(',');
    sim_cmd->add_option("--r-list", r_list, "true R values (table3)")->delimiter(',');
    sim_cmd->add_option("--methods", method_list, "interval methods (table2)")->delimiter(',');
    sim_cmd->add_option("--r0", sim_r0, "null value (table3)");
    sim_cmd->add_option("--nboot", nboot, "bootstrap replicates per interval")
        ->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));
    sim_cmd->add_option("--cat-m", cat_m, "CAT replicates")
        ->check(CLI::Range(std::size_t{100}, std::size_t{10000000}));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    }

    const ReportOptions ropt{common.full_precision};
    try {
        if (fit_cmd->parsed()) {
            const Dataset ds = detail::resolve_input(input);
            const FitResult fit = fit_mle(ds.pairs, {.tie_tolerance = input.tie_tolerance});
            const std::string text = common.format == "csv"
                                         ? to_csv(fit, ropt)
                                         : detail::render_json(report_envelope(
                                               "fit_result", to_json(fit, ropt)));
            detail::emit(common, text, out);
            return fit.status == FitStatus::no_convergence ? 1 : 0;
        }
        if (ci_cmd->parsed()) {
            const Dataset ds = detail::resolve_input(input);
            IntervalEstimate e;
            const Method m = detail::parse_method(ci_method);
            if (m == Method::asymptotic) {
                e = asymptotic_ci(fit_mle(ds.pairs), common.alpha);
            } else if (m == Method::bootstrap) {
                e = bootstrap_ci(ds.pairs, common.alpha, {nboot, common.seed, common.workers});
            } else {
                e = cat_interval(ds.pairs, common.alpha, {cat_m, common.seed, common.workers},
                                 degree);
            }
            const std::string text = common.format == "csv"
                                         ? to_csv(e, ropt)
                                         : detail::render_json(
                                               report_envelope("interval", to_json(e, ropt)));
            detail::emit(common, text, out);
            return 0;
        }
        if (test_cmd->parsed()) {
            const Dataset ds = detail::resolve_input(input);
            const Alternative alt = detail::parse_alternative(alternative);
            TestResult t;
            if (detail::parse_method(test_method) == Method::asymptotic) {
                t = asymptotic_test(fit_mle(ds.pairs), r0, alt, common.alpha);
            } else {
                t = cat_test(ds.pairs, r0, alt, common.alpha,
                             {cat_m, common.seed, common.workers});
            }
            const std::string text = common.format == "csv"
                                         ? to_csv(t, ropt)
                                         : detail::render_json(
                                               report_envelope("test", to_json(t, ropt)));
            detail::emit(common, text, out);
            return 0;
        }
        if (gof_cmd->parsed()) {
            const Dataset ds = detail::resolve_input(input);
            std::vector<std::pair<std::string, KsResult>> results;
            const auto run_col = [&](const std::string& name, bool use_x) {
                std::vector<double> v;
                v.reserve(ds.pairs.n());
                for (const auto& o : ds.pairs.observations) v.push_back(use_x ? o.x : o.y);
                results.emplace_back(name, ks_test(v));
            };
            if (column != "y") run_col(ds.column_names.first, true);
            if (column != "x") run_col(ds.column_names.second, false);
            if (common.format == "csv") {
                std::ostringstream text;
                text << "column,n,theta_hat,d,p_value\n";
                for (const auto& [name, ks] : results)
                    text << name << ',' << ks.n << ','
                         << format_csv_number(ks.theta_hat.theta, common.full_precision) << ','
                         << format_csv_number(ks.statistic, common.full_precision) << ','
                         << format_csv_number(ks.p_value, common.full_precision) << '\n';
                detail::emit(common, text.str(), out);
            } else {
                ordered_json arr = ordered_json::array();
                for (const auto& [name, ks] : results)
                    arr.push_back(
                        {{"column", name},
                         {"n", ks.n},
                         {"theta_hat", bvr::detail::report_num(ks.theta_hat.theta,
                                                               common.full_precision)},
                         {"d", bvr::detail::report_num(ks.statistic, common.full_precision)},
                         {"p_value",
                          bvr::detail::report_num(ks.p_value, common.full_precision)},
                         {"note",
                          "asymptotic p-value, no estimated-parameter correction"}});
                detail::emit(common, detail::render_json(report_envelope("gof", arr)), out);
            }
            return 0;
        }
        if (sample_cmd->parsed()) {
            Rng rng{common.seed};
            const PairedSample s = sample_bvr({sl0, sl1, sl2}, sn, rng);
            Dataset ds;
            ds.label = "sample";
            ds.pairs = s;
            detail::emit(common, dataset_to_csv(ds, true), out);
            return 0;
        }
        if (uefa_cmd->parsed()) {
            Dataset ds = uefa_dataset();
            if (uefa_swap) ds = swapped(ds);
            detail::emit(common, dataset_to_csv(ds, true), out);
            return 0;
        }
        if (sim_cmd->parsed()) {
            StudyConfig cfg;
            cfg.seed = common.seed;
            cfg.alpha = common.alpha;
            cfg.workers = common.workers;
            cfg.nboot = nboot;
            cfg.cat_m = cat_m;
            if (reps > 0) cfg.replications = reps;
            if (!n_list.empty()) cfg.sample_sizes = n_list;
            if (!lambda0_list.empty()) cfg.lambda0_values = lambda0_list;
            StudyReport report;
            if (preset == "table1") {
                report = run_bias_mse(cfg);
            } else if (preset == "table2") {
                if (!method_list.empty()) {
                    cfg.methods.clear();
                    for (const auto& m : method_list) cfg.methods.push_back(detail::parse_method(m));
                }
                report = run_coverage(cfg);
            } else {
                cfg.sample_sizes = n_list.empty()
                                       ? std::vector<std::size_t>{10, 15, 20, 25, 50}
                                       : n_list;
                cfg.lambda0_values = lambda0_list.empty() ? std::vector<double>{1.0}
                                                          : lambda0_list;
                std::vector<double> rs = r_list.empty()
                                             ? std::vector<double>{0.5, 0.534, 0.562, 0.6, 0.636,
                                                                   0.666, 0.714, 0.777, 0.833,
                                                                   0.882}
                                             : r_list;
                report = run_power(cfg, sim_r0, rs);
            }
            const std::string text =
                common.format == "csv"
                    ? study_to_csv(report, common.full_precision)
                    : detail::render_json(report_envelope("study", to_json(report, ropt)));
            detail::emit(common, text, out);
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << "error: usage: no subcommand given\n";
    return 2;
}

}  // namespace bvr::cli
