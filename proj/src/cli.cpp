#include "lob_lab/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lob_lab/ito_tails.hpp"
#include "lob_lab/parallel.hpp"
#include "lob_lab/path_io.hpp"
#include "lob_lab/sweep_analysis.hpp"

namespace lob_lab::cli {

namespace {

using nlohmann::json;

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string resolve_format(const RunConfig& cfg, bool csv_ok, bool json_ok) {
    const std::string fmt = cfg.format.empty() ? (csv_ok ? "csv" : "json") : cfg.format;
    if ((fmt == "csv" && !csv_ok) || (fmt == "json" && !json_ok)) {
        throw ValidationError(cfg.command + " does not support --format " + fmt);
    }
    return fmt;
}

// File output gets a summary line on stdout; stdout output is the data alone.
void emit(const RunConfig& cfg, const std::string& data, const std::string& summary, std::ostream& out) {
    if (cfg.output_path) {
        write_file_atomically(*cfg.output_path, data);
        out << summary << '\n';
    } else {
        out << data;
        if (!data.empty() && data.back() != '\n') out << '\n';
    }
}

std::string degeneracy_text(const EquilibriumPath& path) {
    if (!path.is_degenerate()) return "non-degenerate";
    std::ostringstream s;
    s << "degenerate_from=" << *path.degenerate_from << " (" << describe(path.degeneracy_violations) << ")";
    return s.str();
}

json path_json(const EquilibriumPath& path) {
    json rows = json::array();
    for (const auto& r : path_report(path)) {
        rows.push_back({{"n", r.n},
                        {"t", r.t},
                        {"pa", number_or_null(r.pa)},
                        {"pb", number_or_null(r.pb)},
                        {"la", number_or_null(r.la)},
                        {"lb", number_or_null(r.lb)},
                        {"drift_to_horizon", r.drift_to_horizon}});
    }
    std::vector<std::string> violations;
    for (const auto v : path.degeneracy_violations) violations.emplace_back(to_string(v));
    return {{"params",
             {{"alpha", path.params.alpha},
              {"sigma", path.params.sigma},
              {"horizon", path.params.horizon},
              {"steps", path.params.steps}}},
            {"degenerate_from", path.degenerate_from ? json(*path.degenerate_from) : json(nullptr)},
            {"violations", violations},
            {"rows", rows}};
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const std::string fmt = resolve_format(cfg, true, true);
    const EquilibriumPath path = solve_full(cfg.params);
    std::string data;
    if (fmt == "csv") {
        std::ostringstream s;
        write_path_csv(s, path);
        data = s.str();
    } else {
        data = path_json(path).dump(2) + "\n";
    }
    std::ostringstream summary;
    summary << "solve: N=" << cfg.params.steps << " alpha=" << cfg.params.alpha << " " << degeneracy_text(path);
    if (path.valid_at(0)) summary << " spread0=" << format_number(path.pa[0] - path.pb[0]);
    emit(cfg, data, summary.str(), out);
    return kSuccess;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const std::string fmt = resolve_format(cfg, true, true);
    const SweepTable table =
        spread_vs_frequency(cfg.params.alpha, cfg.params.sigma, cfg.params.horizon, cfg.n_list);
    int degenerate = 0;
    int failed = 0;
    for (const auto& r : table.rows) {
        if (r.degenerate_from) ++degenerate;
        if (r.error) {
            ++failed;
            err << "N=" << r.n << ": " << *r.error << '\n';
        }
    }
    std::string data;
    if (fmt == "csv") {
        std::ostringstream s;
        write_sweep_csv(s, table);
        data = s.str();
    } else {
        json rows = json::array();
        for (const auto& r : table.rows) {
            rows.push_back({{"n", r.n},
                            {"alpha", r.alpha},
                            {"spread0", number_or_null(r.spread0)},
                            {"spreadT", number_or_null(r.spreadT)},
                            {"max_abs_la", number_or_null(r.max_abs_la)},
                            {"max_abs_lb", number_or_null(r.max_abs_lb)},
                            {"degenerate_from", r.degenerate_from ? json(*r.degenerate_from) : json(nullptr)},
                            {"error", r.error ? json(*r.error) : json(nullptr)}});
        }
        data = json{{"schema", 1}, {"rows", rows}}.dump(2) + "\n";
    }
    std::ostringstream summary;
    summary << "sweep-spread: " << table.rows.size() << " rows, " << degenerate << " degenerate, " << failed
            << " failed";
    emit(cfg, data, summary.str(), out);
    return failed > 0 ? kNonConvergence : kSuccess;
}

int cmd_critical(const RunConfig& cfg, std::ostream& out) {
    resolve_format(cfg, false, true);
    const auto r = critical_alpha(cfg.params.steps, cfg.params.sigma, cfg.params.horizon, cfg.tol);
    json scan = json::array();
    for (const auto& p : r.scan_certificate) scan.push_back({{"alpha", p.alpha}, {"degenerate", p.degenerate}});
    const json j{{"n", r.n},
                 {"sigma", cfg.params.sigma},
                 {"horizon", cfg.params.horizon},
                 {"alpha_star", r.alpha_star},
                 {"bracket", {r.alpha_star - 0.5 * r.bracket_width, r.alpha_star + 0.5 * r.bracket_width}},
                 {"bracket_width", r.bracket_width},
                 {"scan", scan}};
    std::ostringstream summary;
    summary << "critical-alpha: N=" << r.n << " alpha_star=" << format_number(r.alpha_star)
            << " bracket_width=" << format_number(r.bracket_width);
    emit(cfg, j.dump(2) + "\n", summary.str(), out);
    return kSuccess;
}

DeviationReport merge(DeviationReport a, const DeviationReport& b) {
    if (a.checks.empty()) return b;
    if (b.checks.empty()) return a;
    a.checks.insert(a.checks.end(), b.checks.begin(), b.checks.end());
    if (b.max_gain > a.max_gain) {
        a.max_gain = b.max_gain;
        a.max_gain_stderr = b.max_gain_stderr;
    }
    a.any_flagged = a.any_flagged || b.any_flagged;
    return a;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    resolve_format(cfg, false, true);
    EquilibriumPath path;
    if (cfg.path_csv) {
        std::ifstream in(*cfg.path_csv);
        if (!in) throw ValidationError("cannot open " + cfg.path_csv->string());
        path = read_path_csv(in);
    } else {
        path = solve_full(cfg.params);
    }
    if (path.is_degenerate()) {
        throw ValidationError("verify needs a non-degenerate path; this one is " + degeneracy_text(path));
    }
    const auto vf = verify_value_function(path, cfg.s_list, cfg.sim);
    const auto dev = merge(deviation_test(path, 1.0, cfg.sim), deviation_test(path, -1.0, cfg.sim));
    const bool pass = vf.pass && !dev.any_flagged;
    std::ostringstream summary;
    summary << "verify: N=" << path.steps() << " value_function=" << (vf.pass ? "ok" : "MISMATCH")
            << " max_deviation_gain=" << format_number(dev.max_gain) << " (se " << format_number(dev.max_gain_stderr)
            << ")" << (dev.any_flagged ? " PROFITABLE DEVIATION" : "");
    emit(cfg, exchange_report_json(path, cfg.sim, vf, dev) + "\n", summary.str(), out);
    return pass ? kSuccess : kCheckFailed;
}

int cmd_tails(const RunConfig& cfg, std::ostream& out) {
    resolve_format(cfg, false, true);
    const std::string name = cfg.process.empty() ? "perturbed" : cfg.process;
    ItoProcessSpec spec;
    if (name == "brownian") {
        spec = ItoProcessSpec::brownian(cfg.params.sigma);
    } else if (name == "perturbed") {
        spec = ItoProcessSpec::perturbed(cfg.eps);
    } else {
        throw ValidationError("tails: --process must be brownian or perturbed");
    }
    const int paths = cfg.sim.paths;
    const auto grid = default_tail_grid();
    const auto first = simulate_terminal(spec, paths, cfg.sim.seed);
    const auto estimate = conditional_tail(first.terminal, grid);
    const auto second = conditional_tail(simulate_terminal(spec, paths, cfg.sim.seed + 1).terminal, grid);
    const auto check = exponential_bound_check(estimate, second, cfg.c1);
    const auto sup_rows = sup_inequality_check(first, {0.0, 1.0, 2.0});
    const std::vector<double> dts = cfg.dt_list.empty() ? std::vector<double>{1e-2, 1e-3, 1e-4} : cfg.dt_list;
    const auto gaps = conditional_mean_gap(spec, dts, paths, cfg.sim.seed);

    bool pass = check.pass && gaps.bounded && gaps.common_bound <= 1.5 * std::sqrt(2.0 / M_PI) * spec.C;
    for (const auto& r : sup_rows) pass = pass && r.holds;

    std::ostringstream summary;
    summary << "tails: " << spec.name << " C1=" << format_number(check.first.C1) << "/"
            << format_number(check.second.C1) << " ratio=" << format_number(check.ratio)
            << " mean_gap_bound=" << format_number(gaps.common_bound) << (pass ? " pass" : " FAIL");
    emit(cfg, tails_report_json(spec, estimate, check, sup_rows, gaps, pass) + "\n", summary.str(), out);
    return pass ? kSuccess : kCheckFailed;
}

int cmd_proximity(const RunConfig& cfg, std::ostream& out) {
    resolve_format(cfg, false, true);
    const std::string name = cfg.process.empty() ? "stochastic-vol" : cfg.process;
    ItoProcessSpec spec;
    if (name == "constant") {
        spec = ItoProcessSpec::constant(cfg.params.alpha, cfg.params.sigma);
    } else if (name == "stochastic-vol") {
        spec = ItoProcessSpec::stochastic_vol(cfg.params.alpha);
    } else {
        throw ValidationError("proximity: --process must be constant or stochastic-vol");
    }
    const std::vector<double> dts = cfg.dt_list.empty() ? std::vector<double>{1e-1, 1e-2, 1e-3} : cfg.dt_list;
    const auto report = gaussian_proximity(spec, dts, cfg.sim.paths, cfg.sim.seed);
    bool pass = report.tail_trend_ok && report.mean_trend_ok;
    if (name == "constant") {
        for (const auto& r : report.rows) pass = pass && r.tail_gap <= r.tail_floor;
    }
    std::ostringstream summary;
    summary << "proximity: " << spec.name << " tail_gap=";
    for (std::size_t i = 0; i < report.rows.size(); ++i) summary << (i ? "," : "") << format_number(report.rows[i].tail_gap);
    summary << " mean_gap=";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        summary << (i ? "," : "") << format_number(report.rows[i].truncated_mean_gap);
    }
    summary << (pass ? " pass" : " FAIL");
    emit(cfg, proximity_report_json(spec, report, pass) + "\n", summary.str(), out);
    return pass ? kSuccess : kCheckFailed;
}

int default_paths(const std::string& command) {
    if (command == "verify") return 200'000;
    return 1'000'000;
}

struct Parser {
    CLI::App app{"Limit order book equilibrium lab", "lob-lab"};
    RunConfig cfg;
    std::string out_path;
    std::string path_csv;
    int paths = 0;

    Parser() {
        app.set_config("--config", "", "key=value file; flags given on the command line take precedence");
        app.add_option("command", cfg.command, "solve | sweep-spread | critical-alpha | verify | tails | proximity")
            ->required()
            ->check(CLI::IsMember({"solve", "sweep-spread", "critical-alpha", "verify", "tails", "proximity"}));
        app.add_option("--alpha", cfg.params.alpha, "drift of the fundamental price")->capture_default_str();
        app.add_option("--sigma", cfg.params.sigma, "volatility of the fundamental price")->capture_default_str();
        app.add_option("--T", cfg.params.horizon, "horizon")->capture_default_str();
        app.add_option("--N", cfg.params.steps, "number of trading steps")->capture_default_str();
        app.add_option("--N-list", cfg.n_list, "comma-separated N values for sweep-spread")->delimiter(',');
        app.add_option("--tol", cfg.tol, "bisection tolerance for critical-alpha")->capture_default_str();
        app.add_option("--paths", paths, "Monte-Carlo paths (default 200000 for verify, 1000000 otherwise)")
            ->check(CLI::PositiveNumber);
        app.add_option("--seed", cfg.sim.seed, "RNG seed")->capture_default_str();
        app.add_option("--out", out_path, "output file (written atomically); stdout when omitted");
        app.add_option("--format", cfg.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
        app.add_option("--threads", cfg.threads, "worker cap (default: LOB_LAB_THREADS or all cores)")
            ->check(CLI::NonNegativeNumber);
        app.add_option("--path-csv", path_csv, "verify: read the path from a solve CSV instead of solving");
        app.add_option("--s-list", cfg.s_list, "verify: initial inventories")->delimiter(',');
        app.add_option("--offsets", cfg.sim.deviation_grid, "verify: deviation offsets in units of sigma sqrt(dt)")
            ->delimiter(',');
        app.add_option("--process", cfg.process, "tails: brownian | perturbed; proximity: constant | stochastic-vol");
        app.add_option("--eps", cfg.eps, "tails: drift bound parameter of the perturbed process")->capture_default_str();
        app.add_option("--c1", cfg.c1, "tails: exponential decay rate")->capture_default_str();
        app.add_option("--dt-list", cfg.dt_list, "tails / proximity: comma-separated interval lengths")->delimiter(',');
    }

    RunConfig parse(int argc, const char* const* argv) {
        app.parse(argc, argv);
        cfg.sim.paths = paths > 0 ? paths : default_paths(cfg.command);
        if (!out_path.empty()) cfg.output_path = out_path;
        if (!path_csv.empty()) cfg.path_csv = path_csv;
        return cfg;
    }
};

}  // namespace

RunConfig parse_args(int argc, const char* const* argv) {
    Parser parser;
    return parser.parse(argc, argv);
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        set_worker_cap(config.threads);
        if (!config.path_csv) config.params.validate();
        config.sim.validate();
        const std::string& c = config.command;
        if (c == "solve") return cmd_solve(config, out);
        if (c == "sweep-spread") return cmd_sweep(config, out, err);
        if (c == "critical-alpha") return cmd_critical(config, out);
        if (c == "verify") return cmd_verify(config, out);
        if (c == "tails") return cmd_tails(config, out);
        if (c == "proximity") return cmd_proximity(config, out);
        err << "unknown command: " << c << '\n';
        return kValidationError;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << " (residual " << e.residual() << " after " << e.iterations()
            << " iterations)\n";
        return kNonConvergence;
    } catch (const NonMonotoneDegeneracy& e) {
        err << "error: " << e.what() << '\n';
        return kCheckFailed;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const SpecificationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::runtime_error& e) {
        // Unreadable input and unwritable output land here.
        err << "error: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Parser parser;
    RunConfig cfg;
    try {
        cfg = parser.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = parser.app.exit(e, out, err);
        return code == 0 ? kSuccess : kValidationError;
    }
    return run(cfg, out, err);
}

}  // namespace lob_lab::cli
