#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lob_lab/equilibrium_solver.hpp"

namespace lob_lab {

struct Atom {
    double price;
    double mass;
};

/// Resting limit orders: sell atoms make up the ask side, buy atoms the bid side.
struct LOBState {
    std::vector<Atom> sell_atoms;
    std::vector<Atom> buy_atoms;

    /// Two-atom book of the equilibrium ansatz.
    static LOBState two_atom(double ask, double ask_mass, double bid, double bid_mass);

    bool has_asks() const { return !sell_atoms.empty(); }
    bool has_bids() const { return !buy_atoms.empty(); }
    /// Throws ExecutionError on an empty side.
    double best_ask() const;
    double best_bid() const;
    /// Sell mass strictly below p / buy mass strictly above p.
    double sell_mass_below(double p) const;
    double buy_mass_above(double p) const;

    /// Masses > 0 and best ask > best bid.
    bool is_non_degenerate() const;
};

struct AgentState {
    double inventory = 0.0;
};

struct Control {
    enum class Kind { LimitSell, LimitBuy, MarketOrder, Wait };

    Kind kind = Kind::Wait;
    double price = 0.0;  ///< limit price (absolute)
    double size = 0.0;   ///< limit size > 0; market orders: signed, positive sells

    static Control limit_sell(double price, double size) { return {Kind::LimitSell, price, size}; }
    static Control limit_buy(double price, double size) { return {Kind::LimitBuy, price, size}; }
    static Control market(double signed_size) { return {Kind::MarketOrder, 0.0, signed_size}; }
    static Control wait() { return {}; }

    /// Empty string when valid, otherwise the reason.
    std::string validation_error() const;
};

/// Linear external demand D_{n+1}(p) = kappa (p0_{n+1} - p): positive part
/// buys from the ask side, negative part sells into the bid side. kappa never
/// enters payoffs at the ansatz; it only matters for orders posted behind
/// resting mass.
struct DemandModel {
    double kappa = 1.0;
    double demand(double price, double next_fundamental) const { return kappa * (next_fundamental - price); }
};

class ExecutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StrategyError : public std::runtime_error {
public:
    StrategyError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

struct StepResult {
    AgentState state;
    double cash_delta = 0.0;
    bool executed = false;
};

/// One period of the exchange for an infinitesimal agent who is first in
/// line at her price level. A limit sell at p fills iff demand at p exceeds
/// the sell mass resting strictly below p (mirror for buys); market orders
/// fill at the current best bid / ask.
StepResult step_state(const AgentState& state, const Control& control, const LOBState& book, double fundamental,
                      double realized_increment, const DemandModel& demand = {});

struct SimConfig {
    int paths = 100'000;
    std::uint64_t seed = 1;
    /// Deviation offsets in units of sigma sqrt(dt).
    std::vector<double> deviation_grid{0.1, 0.5, 1.0};
    /// Paths per work batch; batches are the unit of parallel work.
    int batch = 4096;
    /// Mass of each atom of the equilibrium book.
    double book_depth = 1.0;
    DemandModel demand;

    void validate() const;
};

/// What a strategy sees at step n. Prices in `book` are absolute.
struct DecisionContext {
    int step;
    double fundamental;
    const LOBState& book;
    const EquilibriumPath& path;
};

using Strategy = std::function<Control(const DecisionContext&, const AgentState&)>;

/// Post the whole inventory at the best ask (long) or best bid (short).
Strategy equilibrium_strategy();
Strategy wait_strategy();

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int paths = 0;
    /// Limit orders at the atom price where the general execution rule and the
    /// reduced rule {xi > pa} (resp. {xi < pb}) disagreed. Always expected 0.
    std::int64_t rule_mismatches = 0;
    std::int64_t rule_checks = 0;
};

/// Monte-Carlo estimate of cash plus terminal marking s+ p^b_N - s- p^a_N,
/// measured relative to p0_0, for `strategy` played against the equilibrium
/// book. Throws StrategyError naming the step of the first invalid control.
MonteCarloEstimate simulate_objective(const Strategy& strategy, double s0, const EquilibriumPath& path,
                                      const SimConfig& cfg);

struct ValueFunctionCheck {
    double s;
    double mc_payoff;
    double std_error;
    double expected;  ///< s+ la[0] - s- lb[0]
    double discrepancy;
    bool within_3se;
};

struct ValueFunctionReport {
    std::vector<ValueFunctionCheck> checks;
    bool linearity_checked = false;
    double linearity_ratio = 0.0;  ///< payoff(s=2) / payoff(s=1)
    double linearity_ratio_se = 0.0;
    bool linearity_ok = true;
    bool pass = true;
};

ValueFunctionReport verify_value_function(const EquilibriumPath& path, const std::vector<double>& s_list,
                                          const SimConfig& cfg);

struct DeviationCheck {
    enum class Kind { PostAbove, PostBelow, MarketOrder, Wait, HoldToHorizon };
    Kind kind;
    int step;
    double offset;  ///< absolute price offset (0 for non-price deviations)
    double gain;    ///< deviation payoff minus equilibrium payoff, from `step` on
    double std_error;
    bool flagged;   ///< gain > 3 std errors
};

std::string to_string(DeviationCheck::Kind k);

struct DeviationReport {
    std::vector<DeviationCheck> checks;
    double max_gain = 0.0;
    double max_gain_stderr = 0.0;
    bool any_flagged = false;
};

/// One-shot deviations at every step n (post the ask off by +-offset, market
/// order, wait), each resuming the equilibrium strategy at n+1 and compared
/// with it on common random numbers; plus holding to the horizon from step 0.
DeviationReport deviation_test(const EquilibriumPath& path, double s0, const SimConfig& cfg);

/// {params, config, value_function_checks, deviation_checks, max_gain, max_gain_stderr}
std::string exchange_report_json(const EquilibriumPath& path, const SimConfig& cfg, const ValueFunctionReport& vf,
                                 const DeviationReport& dev);

}  // namespace lob_lab
