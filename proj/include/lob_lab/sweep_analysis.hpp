#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lob_lab/equilibrium_solver.hpp"

namespace lob_lab {

/// One solved frequency. spread0 is NaN when the path degenerates before
/// step 0; max_abs_la / max_abs_lb range over the constructed steps only.
struct SweepRow {
    int n = 0;
    double alpha = 0.0;
    double spread0 = 0.0;
    double spreadT = 0.0;
    double max_abs_la = 0.0;
    double max_abs_lb = 0.0;
    std::optional<int> degenerate_from;
    /// Set when the solver threw for this row; numeric fields are NaN.
    std::optional<std::string> error;
};

struct SweepTable {
    std::vector<SweepRow> rows;
};

inline constexpr const char* kSweepCsvHeader = "schema=1,n,alpha,spread0,spreadT,max_abs_la,max_abs_lb,degenerate_from";

SweepRow summarize(const EquilibriumPath& path);

/// One row per entry of n_list, in input order. Rows are solved in parallel.
SweepTable spread_vs_frequency(double alpha, double sigma, double horizon, const std::vector<int>& n_list);

/// Writes the versioned CSV (12 significant digits, empty field for an
/// absent value).
void write_sweep_csv(std::ostream& out, const SweepTable& table);

struct ScanPoint {
    double alpha;
    bool degenerate;
};

struct CriticalDriftResult {
    int n = 0;
    double alpha_star = 0.0;
    double bracket_width = 0.0;
    /// Coarse grid on [0, alpha_hi] whose degeneracy flags were verified to be
    /// a single false->true switch before bisecting.
    std::vector<ScanPoint> scan_certificate;
};

class NonMonotoneDegeneracy : public std::runtime_error {
public:
    NonMonotoneDegeneracy(const std::string& what, std::vector<ScanPoint> grid)
        : std::runtime_error(what), grid_(std::move(grid)) {}
    const std::vector<ScanPoint>& grid() const { return grid_; }

private:
    std::vector<ScanPoint> grid_;
};

struct CriticalDriftOptions {
    double initial_alpha = 0.01;
    double max_alpha = 1e3;
    int scan_points = 33;
};

/// Largest drift alpha >= 0 for which solve_full stays non-degenerate on the
/// whole horizon at frequency n, to within tol.
CriticalDriftResult critical_alpha(int n, double sigma, double horizon, double tol,
                                   const CriticalDriftOptions& opts = {});

/// Per-step rows (t, pa, pb, la, lb, alpha (T - t)) for plotting.
struct PathReportRow {
    int n;
    double t;
    double pa, pb, la, lb;
    double drift_to_horizon;
};

std::vector<PathReportRow> path_report(const EquilibriumPath& path);

}  // namespace lob_lab
