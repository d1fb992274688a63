#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lob_lab/gaussian_kernel.hpp"

namespace lob_lab {

/// Benchmark fundamental price p0_t = p0_0 + alpha t + sigma W_t on [0, horizon],
/// observed on `steps` equal intervals.
struct ModelParams {
    double alpha = 0.0;
    double sigma = 1.0;
    double horizon = 1.0;
    int steps = 100;

    double dt() const { return horizon / steps; }

    /// Law of one step increment: N(alpha dt, sigma^2 dt).
    GaussianIncrement increment() const;

    /// Throws std::invalid_argument unless sigma > 0, horizon > 0, steps >= 1.
    void validate() const;
};

/// Ways a candidate step can fail to be part of a non-degenerate equilibrium.
enum class Violation {
    AskWithdrawal,      ///< la[n+1] >= 0: long agents stop posting limit orders
    BidWithdrawal,      ///< lb[n+1] <= 0: short agents stop posting limit orders
    LongMarketOrder,    ///< pb > la: long agents submit market orders
    ShortMarketOrder,   ///< lb > pa: short agents submit market orders
    ScalableRoundTrip,  ///< pa < pb + |alpha| dt: market round trip has positive drift
};

std::string_view to_string(Violation v);
std::string describe(const std::vector<Violation>& vs);

/// Quotes and expected execution prices of one step, relative to p0_n.
struct StepQuotes {
    double pa = 0.0;
    double pb = 0.0;
    double la = 0.0;
    double lb = 0.0;
};

struct DegenerateTerminal {
    std::vector<Violation> violations;
    StepQuotes candidate;
};

struct DegeneracySignal {
    std::vector<Violation> violations;
    /// Present when finite quotes were computed but failed the no-market-order
    /// checks; absent when a side had no finite maximizer.
    std::optional<StepQuotes> candidate;
};

using TerminalOutcome = std::variant<StepQuotes, DegenerateTerminal>;
using StepOutcome = std::variant<StepQuotes, DegeneracySignal>;

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, StepQuotes last_iterate, double residual, int iterations)
        : std::runtime_error(what), last_iterate_(last_iterate), residual_(residual), iterations_(iterations) {}

    const StepQuotes& last_iterate() const { return last_iterate_; }
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    StepQuotes last_iterate_;
    double residual_;
    int iterations_;
};

struct TerminalSolverOptions {
    double damping = 0.5;
    double initial_depth = 0.75;  // initial pa = -pb, in units of sigma sqrt(dt)
    double tolerance = 1e-12;     // in units of sigma sqrt(dt)
    int max_iterations = 10'000;
};

/// Single-period LTC fixed point on [N-1, N]: pa and pb are mutual best
/// responses, la = pb + alpha dt + A(pa; pb), lb = pa + alpha dt - B(pb; pa).
/// Returns DegenerateTerminal when any no-market-order inequality fails.
TerminalOutcome solve_terminal_period(const ModelParams& params, const TerminalSolverOptions& opts = {});

/// One backward step from the next step's expected execution prices.
StepOutcome backward_step(double la_next, double lb_next, const ModelParams& params);

/// Empty iff pb <= la, lb <= pa and pa >= pb + |alpha| dt.
std::vector<Violation> check_no_market_order(const StepQuotes& q, const ModelParams& params);

/// Backward-constructed equilibrium on steps 0..N. Entries at steps
/// <= degenerate_from are NaN.
struct EquilibriumPath {
    ModelParams params;
    std::vector<double> pa, pb, la, lb;

    /// First step n at which the construction failed; steps n+1..N are valid.
    std::optional<int> degenerate_from;
    std::vector<Violation> degeneracy_violations;
    /// Ask quote at the step following the crisis (the last finite one), NaN
    /// when the whole path is valid.
    double last_finite_ask = 0.0;
    /// min over valid n of |la[n]|, for probing the crisis boundary.
    double min_abs_la = 0.0;

    int steps() const { return params.steps; }
    bool is_degenerate() const { return degenerate_from.has_value(); }
    /// Earliest step whose entries are set; steps() + 1 if none.
    int first_valid_step() const { return degenerate_from ? *degenerate_from + 1 : 0; }
    bool valid_at(int n) const { return n >= first_valid_step() && n <= steps(); }
    StepQuotes at(int n) const { return {pa[n], pb[n], la[n], lb[n]}; }
};

EquilibriumPath solve_full(const ModelParams& params, const TerminalSolverOptions& opts = {});

}  // namespace lob_lab
