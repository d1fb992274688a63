#include "lob_lab/sweep_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "lob_lab/parallel.hpp"
#include "lob_lab/path_io.hpp"

namespace lob_lab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool degenerates(double alpha, int n, double sigma, double horizon) {
    return solve_full(ModelParams{alpha, sigma, horizon, n}).is_degenerate();
}

}  // namespace

SweepRow summarize(const EquilibriumPath& path) {
    SweepRow row;
    row.n = path.steps();
    row.alpha = path.params.alpha;
    row.degenerate_from = path.degenerate_from;
    row.spread0 = path.valid_at(0) ? path.pa[0] - path.pb[0] : kNaN;
    const int last = path.steps();
    row.spreadT = path.valid_at(last) ? path.pa[last] - path.pb[last] : kNaN;
    row.max_abs_la = kNaN;
    row.max_abs_lb = kNaN;
    for (int n = path.first_valid_step(); n <= last; ++n) {
        row.max_abs_la = std::isnan(row.max_abs_la) ? std::abs(path.la[n]) : std::max(row.max_abs_la, std::abs(path.la[n]));
        row.max_abs_lb = std::isnan(row.max_abs_lb) ? std::abs(path.lb[n]) : std::max(row.max_abs_lb, std::abs(path.lb[n]));
    }
    return row;
}

SweepTable spread_vs_frequency(double alpha, double sigma, double horizon, const std::vector<int>& n_list) {
    if (n_list.empty()) throw std::invalid_argument("spread_vs_frequency: empty N list");
    for (const int n : n_list) {
        if (n < 2) throw std::invalid_argument("spread_vs_frequency: every N must be >= 2");
    }
    SweepTable table;
    table.rows.resize(n_list.size());
    parallel_for(n_list.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                table.rows[i] = summarize(solve_full(ModelParams{alpha, sigma, horizon, n_list[i]}));
            } catch (const std::exception& e) {
                SweepRow row;
                row.n = n_list[i];
                row.alpha = alpha;
                row.spread0 = row.spreadT = row.max_abs_la = row.max_abs_lb = kNaN;
                row.error = e.what();
                table.rows[i] = row;
            }
        }
    });
    return table;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
    out << kSweepCsvHeader << '\n';
    for (const auto& r : table.rows) {
        out << 1 << ',' << r.n << ',' << format_number(r.alpha) << ',' << format_number(r.spread0) << ','
            << format_number(r.spreadT) << ',' << format_number(r.max_abs_la) << ',' << format_number(r.max_abs_lb)
            << ',';
        if (r.degenerate_from) out << *r.degenerate_from;
        out << '\n';
    }
}

CriticalDriftResult critical_alpha(int n, double sigma, double horizon, double tol, const CriticalDriftOptions& opts) {
    if (!(tol > 0.0)) throw std::invalid_argument("critical_alpha: tol must be > 0");
    ModelParams{0.0, sigma, horizon, n}.validate();
    if (degenerates(0.0, n, sigma, horizon)) {
        throw std::runtime_error("critical_alpha: zero drift is already degenerate at N=" + std::to_string(n));
    }

    double alpha_hi = opts.initial_alpha;
    while (!degenerates(alpha_hi, n, sigma, horizon)) {
        alpha_hi *= 2.0;
        if (alpha_hi > opts.max_alpha) {
            throw std::runtime_error("critical_alpha: no degeneracy found below alpha=" +
                                     std::to_string(opts.max_alpha));
        }
    }

    CriticalDriftResult result;
    result.n = n;
    const int k = std::max(opts.scan_points, 3);
    result.scan_certificate.resize(k);
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double a = alpha_hi * static_cast<double>(i) / (k - 1);
            result.scan_certificate[i] = ScanPoint{a, degenerates(a, n, sigma, horizon)};
        }
    });

    // Certify a single false -> true switch.
    std::size_t first_true = result.scan_certificate.size();
    for (std::size_t i = 0; i < result.scan_certificate.size(); ++i) {
        if (result.scan_certificate[i].degenerate) {
            first_true = i;
            break;
        }
    }
    std::vector<ScanPoint> offenders;
    for (std::size_t i = first_true; i < result.scan_certificate.size(); ++i) {
        if (!result.scan_certificate[i].degenerate) offenders.push_back(result.scan_certificate[i]);
    }
    if (!offenders.empty() || first_true == 0 || first_true == result.scan_certificate.size()) {
        throw NonMonotoneDegeneracy("critical_alpha: degeneracy is not monotone in alpha on the scan grid at N=" +
                                        std::to_string(n),
                                    result.scan_certificate);
    }

    double lo = result.scan_certificate[first_true - 1].alpha;
    double hi = result.scan_certificate[first_true].alpha;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (degenerates(mid, n, sigma, horizon)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    result.alpha_star = 0.5 * (lo + hi);
    result.bracket_width = hi - lo;
    return result;
}

std::vector<PathReportRow> path_report(const EquilibriumPath& path) {
    std::vector<PathReportRow> rows;
    rows.reserve(path.steps() + 1);
    const double dt = path.params.dt();
    for (int n = 0; n <= path.steps(); ++n) {
        const double t = n * dt;
        rows.push_back(PathReportRow{n, t, path.pa[n], path.pb[n], path.la[n], path.lb[n],
                                     path.params.alpha * (path.params.horizon - t)});
    }
    return rows;
}

}  // namespace lob_lab
