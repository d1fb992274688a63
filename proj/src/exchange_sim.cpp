#include "lob_lab/exchange_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include <json.hpp>

#include "lob_lab/parallel.hpp"
#include "lob_lab/rng.hpp"

namespace lob_lab {

namespace {

// Pairwise summation in index order: the result depends only on the values,
// never on how the work was split between threads.
double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) return std::accumulate(v.begin(), v.end(), 0.0);
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanAndError {
    double mean;
    double std_error;
};

MeanAndError mean_and_error(std::span<const double> samples) {
    const auto n = static_cast<double>(samples.size());
    const double mean = pairwise_sum(samples) / n;
    std::vector<double> sq(samples.size());
    std::transform(samples.begin(), samples.end(), sq.begin(), [mean](double x) { return (x - mean) * (x - mean); });
    const double var = samples.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

void require_full_path(const EquilibriumPath& path, const char* who) {
    if (path.is_degenerate()) {
        throw std::invalid_argument(std::string(who) + ": equilibrium path degenerates at step " +
                                    std::to_string(*path.degenerate_from));
    }
}

double terminal_marking(double inventory, double bid, double ask) {
    return inventory > 0.0 ? inventory * bid : inventory * ask;
}

std::size_t batch_count(const SimConfig& cfg) {
    return (static_cast<std::size_t>(cfg.paths) + cfg.batch - 1) / static_cast<std::size_t>(cfg.batch);
}

}  // namespace

LOBState LOBState::two_atom(double ask, double ask_mass, double bid, double bid_mass) {
    LOBState book;
    book.sell_atoms.push_back({ask, ask_mass});
    book.buy_atoms.push_back({bid, bid_mass});
    return book;
}

double LOBState::best_ask() const {
    if (sell_atoms.empty()) throw ExecutionError("market buy against an empty ask side");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : sell_atoms) best = std::min(best, a.price);
    return best;
}

double LOBState::best_bid() const {
    if (buy_atoms.empty()) throw ExecutionError("market sell against an empty bid side");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : buy_atoms) best = std::max(best, a.price);
    return best;
}

double LOBState::sell_mass_below(double p) const {
    double mass = 0.0;
    for (const auto& a : sell_atoms) {
        if (a.price < p) mass += a.mass;
    }
    return mass;
}

double LOBState::buy_mass_above(double p) const {
    double mass = 0.0;
    for (const auto& a : buy_atoms) {
        if (a.price > p) mass += a.mass;
    }
    return mass;
}

bool LOBState::is_non_degenerate() const {
    if (!has_asks() || !has_bids()) return false;
    for (const auto& a : sell_atoms) {
        if (!(a.mass > 0.0)) return false;
    }
    for (const auto& a : buy_atoms) {
        if (!(a.mass > 0.0)) return false;
    }
    return best_ask() > best_bid();
}

std::string Control::validation_error() const {
    switch (kind) {
        case Kind::LimitSell:
        case Kind::LimitBuy:
            if (!std::isfinite(price)) return "limit order price must be finite";
            if (!(size > 0.0) || !std::isfinite(size)) return "limit order size must be > 0";
            return {};
        case Kind::MarketOrder:
            if (!std::isfinite(size)) return "market order size must be finite";
            return {};
        case Kind::Wait:
            return {};
    }
    return "unknown control kind";
}

StepResult step_state(const AgentState& state, const Control& control, const LOBState& book, double fundamental,
                      double realized_increment, const DemandModel& demand) {
    if (const auto err = control.validation_error(); !err.empty()) throw std::invalid_argument(err);
    StepResult r{state, 0.0, false};
    const double next_fundamental = fundamental + realized_increment;
    switch (control.kind) {
        case Control::Kind::Wait:
            break;
        case Control::Kind::LimitSell: {
            const double buy_pressure = std::max(demand.demand(control.price, next_fundamental), 0.0);
            if (buy_pressure > book.sell_mass_below(control.price)) {
                r.state.inventory -= control.size;
                r.cash_delta = control.price * control.size;
                r.executed = true;
            }
            break;
        }
        case Control::Kind::LimitBuy: {
            const double sell_pressure = std::max(-demand.demand(control.price, next_fundamental), 0.0);
            if (sell_pressure > book.buy_mass_above(control.price)) {
                r.state.inventory += control.size;
                r.cash_delta = -control.price * control.size;
                r.executed = true;
            }
            break;
        }
        case Control::Kind::MarketOrder:
            if (control.size > 0.0) {
                r.cash_delta = control.size * book.best_bid();
            } else if (control.size < 0.0) {
                r.cash_delta = control.size * book.best_ask();
            }
            r.state.inventory -= control.size;
            r.executed = control.size != 0.0;
            break;
    }
    return r;
}

void SimConfig::validate() const {
    if (paths < 1) throw std::invalid_argument("SimConfig.paths must be >= 1");
    if (batch < 1) throw std::invalid_argument("SimConfig.batch must be >= 1");
    if (!(book_depth > 0.0)) throw std::invalid_argument("SimConfig.book_depth must be > 0");
    if (!(demand.kappa > 0.0)) throw std::invalid_argument("DemandModel.kappa must be > 0");
    for (const double d : deviation_grid) {
        if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("deviation offsets must be finite and > 0");
    }
}

Strategy equilibrium_strategy() {
    return [](const DecisionContext& ctx, const AgentState& s) {
        if (s.inventory > 0.0) return Control::limit_sell(ctx.book.best_ask(), s.inventory);
        if (s.inventory < 0.0) return Control::limit_buy(ctx.book.best_bid(), -s.inventory);
        return Control::wait();
    };
}

Strategy wait_strategy() {
    return [](const DecisionContext&, const AgentState&) { return Control::wait(); };
}

MonteCarloEstimate simulate_objective(const Strategy& strategy, double s0, const EquilibriumPath& path,
                                      const SimConfig& cfg) {
    require_full_path(path, "simulate_objective");
    cfg.validate();
    const int n_steps = path.steps();
    const GaussianIncrement inc = path.params.increment();

    std::vector<double> payoffs(static_cast<std::size_t>(cfg.paths));
    const std::size_t batches = batch_count(cfg);
    std::vector<std::int64_t> mismatches(batches, 0);
    std::vector<std::int64_t> checks(batches, 0);

    parallel_for(batches, [&](std::size_t b_begin, std::size_t b_end) {
        LOBState book = LOBState::two_atom(0.0, cfg.book_depth, 0.0, cfg.book_depth);
        for (std::size_t b = b_begin; b < b_end; ++b) {
            const std::size_t first = b * static_cast<std::size_t>(cfg.batch);
            const std::size_t last = std::min(payoffs.size(), first + static_cast<std::size_t>(cfg.batch));
            for (std::size_t i = first; i < last; ++i) {
                NormalStream normal(cfg.seed, i);
                double fundamental = 0.0;
                double cash = 0.0;
                AgentState state{s0};
                for (int n = 0; n < n_steps; ++n) {
                    book.sell_atoms[0].price = fundamental + path.pa[n];
                    book.buy_atoms[0].price = fundamental + path.pb[n];
                    const Control c = strategy(DecisionContext{n, fundamental, book, path}, state);
                    if (const auto err = c.validation_error(); !err.empty()) {
                        throw StrategyError("invalid control at step " + std::to_string(n) + ": " + err, n);
                    }
                    const double xi = inc.mean + inc.std * normal();
                    const StepResult r = step_state(state, c, book, fundamental, xi, cfg.demand);
                    if (c.kind == Control::Kind::LimitSell && c.price == book.sell_atoms[0].price) {
                        ++checks[b];
                        if (r.executed != (xi > path.pa[n])) ++mismatches[b];
                    } else if (c.kind == Control::Kind::LimitBuy && c.price == book.buy_atoms[0].price) {
                        ++checks[b];
                        if (r.executed != (xi < path.pb[n])) ++mismatches[b];
                    }
                    cash += r.cash_delta;
                    state = r.state;
                    fundamental += xi;
                }
                payoffs[i] = cash + terminal_marking(state.inventory, fundamental + path.pb[n_steps],
                                                     fundamental + path.pa[n_steps]);
            }
        }
    });

    const auto [mean, se] = mean_and_error(payoffs);
    MonteCarloEstimate est;
    est.mean = mean;
    est.std_error = se;
    est.paths = cfg.paths;
    est.rule_mismatches = std::accumulate(mismatches.begin(), mismatches.end(), std::int64_t{0});
    est.rule_checks = std::accumulate(checks.begin(), checks.end(), std::int64_t{0});
    return est;
}

ValueFunctionReport verify_value_function(const EquilibriumPath& path, const std::vector<double>& s_list,
                                          const SimConfig& cfg) {
    require_full_path(path, "verify_value_function");
    ValueFunctionReport report;
    const auto strategy = equilibrium_strategy();
    for (const double s : s_list) {
        const auto est = simulate_objective(strategy, s, path, cfg);
        ValueFunctionCheck c;
        c.s = s;
        c.mc_payoff = est.mean;
        c.std_error = est.std_error;
        c.expected = std::max(s, 0.0) * path.la[0] - std::max(-s, 0.0) * path.lb[0];
        c.discrepancy = c.mc_payoff - c.expected;
        c.within_3se = std::abs(c.discrepancy) <= 3.0 * c.std_error;
        report.pass = report.pass && c.within_3se && est.rule_mismatches == 0;
        report.checks.push_back(c);
    }

    const auto find = [&](double s) -> const ValueFunctionCheck* {
        for (const auto& c : report.checks) {
            if (c.s == s) return &c;
        }
        return nullptr;
    };
    const auto* one = find(1.0);
    const auto* two = find(2.0);
    if (one && two && one->mc_payoff != 0.0) {
        report.linearity_checked = true;
        report.linearity_ratio = two->mc_payoff / one->mc_payoff;
        report.linearity_ratio_se = std::abs(report.linearity_ratio) *
                                    std::hypot(two->std_error / two->mc_payoff, one->std_error / one->mc_payoff);
        report.linearity_ok = std::abs(report.linearity_ratio - 2.0) <= 3.0 * report.linearity_ratio_se + 1e-12;
        report.pass = report.pass && report.linearity_ok;
    }
    return report;
}

std::string to_string(DeviationCheck::Kind k) {
    switch (k) {
        case DeviationCheck::Kind::PostAbove: return "post_above";
        case DeviationCheck::Kind::PostBelow: return "post_below";
        case DeviationCheck::Kind::MarketOrder: return "market_order";
        case DeviationCheck::Kind::Wait: return "wait";
        case DeviationCheck::Kind::HoldToHorizon: return "hold_to_horizon";
    }
    return "unknown";
}

DeviationReport deviation_test(const EquilibriumPath& path, double s0, const SimConfig& cfg) {
    require_full_path(path, "deviation_test");
    cfg.validate();
    DeviationReport report;
    if (s0 == 0.0) return report;

    const int n_steps = path.steps();
    const GaussianIncrement inc = path.params.increment();
    const bool is_long = s0 > 0.0;

    // Books in coordinates relative to p0_n; every payoff below is relative
    // to the fundamental price at the step it is evaluated from.
    std::vector<LOBState> books;
    books.reserve(n_steps);
    for (int n = 0; n < n_steps; ++n) books.push_back(LOBState::two_atom(path.pa[n], cfg.book_depth, path.pb[n], cfg.book_depth));

    struct Spec {
        DeviationCheck::Kind kind;
        int step;
        double offset;
        Control control;
    };
    std::vector<Spec> specs;
    for (int n = 0; n < n_steps; ++n) {
        const double quote = is_long ? path.pa[n] : path.pb[n];
        const auto limit = [&](double price) {
            return is_long ? Control::limit_sell(price, s0) : Control::limit_buy(price, -s0);
        };
        for (const double d : cfg.deviation_grid) {
            const double off = d * inc.std;
            specs.push_back({DeviationCheck::Kind::PostAbove, n, off, limit(quote + off)});
            specs.push_back({DeviationCheck::Kind::PostBelow, n, off, limit(quote - off)});
        }
        specs.push_back({DeviationCheck::Kind::MarketOrder, n, 0.0, Control::market(s0)});
        specs.push_back({DeviationCheck::Kind::Wait, n, 0.0, Control::wait()});
    }
    const std::size_t hold_index = specs.size();
    specs.push_back({DeviationCheck::Kind::HoldToHorizon, 0, 0.0, Control::wait()});

    const std::size_t n_checks = specs.size();
    const std::size_t batches = batch_count(cfg);
    std::vector<double> sums(batches * n_checks, 0.0);
    std::vector<double> sumsq(batches * n_checks, 0.0);

    parallel_for(batches, [&](std::size_t b_begin, std::size_t b_end) {
        std::vector<double> xi(n_steps + 1);
        std::vector<double> value(n_steps + 1);
        for (std::size_t b = b_begin; b < b_end; ++b) {
            double* bsum = &sums[b * n_checks];
            double* bsq = &sumsq[b * n_checks];
            const std::size_t first = b * static_cast<std::size_t>(cfg.batch);
            const std::size_t last =
                std::min(static_cast<std::size_t>(cfg.paths), first + static_cast<std::size_t>(cfg.batch));
            for (std::size_t i = first; i < last; ++i) {
                NormalStream normal(cfg.seed, i);
                for (int n = 1; n <= n_steps; ++n) xi[n] = inc.mean + inc.std * normal();

                // Equilibrium continuation value from each step.
                value[n_steps] = terminal_marking(s0, path.pb[n_steps], path.pa[n_steps]);
                double drift_to_end = 0.0;
                for (int n = n_steps - 1; n >= 0; --n) {
                    const Control c = is_long ? Control::limit_sell(path.pa[n], s0) : Control::limit_buy(path.pb[n], -s0);
                    const StepResult r = step_state(AgentState{s0}, c, books[n], 0.0, xi[n + 1], cfg.demand);
                    value[n] = r.executed ? r.cash_delta : value[n + 1] + s0 * xi[n + 1];
                    drift_to_end += xi[n + 1];
                }

                for (std::size_t k = 0; k < n_checks; ++k) {
                    const Spec& sp = specs[k];
                    double payoff;
                    if (k == hold_index) {
                        payoff = value[n_steps] + s0 * drift_to_end;
                    } else {
                        const int n = sp.step;
                        const StepResult r = step_state(AgentState{s0}, sp.control, books[n], 0.0, xi[n + 1], cfg.demand);
                        payoff = r.cash_delta;
                        if (r.state.inventory != 0.0) payoff += value[n + 1] + r.state.inventory * xi[n + 1];
                    }
                    const double gain = payoff - value[sp.step];
                    bsum[k] += gain;
                    bsq[k] += gain * gain;
                }
            }
        }
    });

    const double n_paths = static_cast<double>(cfg.paths);
    report.max_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_checks; ++k) {
        double s = 0.0;
        double sq = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            s += sums[b * n_checks + k];
            sq += sumsq[b * n_checks + k];
        }
        const double mean = s / n_paths;
        const double var = n_paths > 1 ? std::max(0.0, (sq - n_paths * mean * mean) / (n_paths - 1.0)) : 0.0;
        DeviationCheck c{specs[k].kind, specs[k].step, specs[k].offset, mean, std::sqrt(var / n_paths), false};
        c.flagged = c.gain > 3.0 * c.std_error;
        report.any_flagged = report.any_flagged || c.flagged;
        if (c.gain > report.max_gain) {
            report.max_gain = c.gain;
            report.max_gain_stderr = c.std_error;
        }
        report.checks.push_back(c);
    }
    return report;
}

std::string exchange_report_json(const EquilibriumPath& path, const SimConfig& cfg, const ValueFunctionReport& vf,
                                 const DeviationReport& dev) {
    using nlohmann::json;
    json j;
    j["params"] = {{"alpha", path.params.alpha},
                   {"sigma", path.params.sigma},
                   {"horizon", path.params.horizon},
                   {"steps", path.params.steps}};
    j["config"] = {{"paths", cfg.paths},
                   {"seed", cfg.seed},
                   {"deviation_grid", cfg.deviation_grid},
                   {"batch", cfg.batch},
                   {"book_depth", cfg.book_depth},
                   {"kappa", cfg.demand.kappa}};
    j["value_function_checks"] = json::array();
    for (const auto& c : vf.checks) {
        j["value_function_checks"].push_back({{"s", c.s},
                                              {"mc_payoff", c.mc_payoff},
                                              {"std_error", c.std_error},
                                              {"expected", c.expected},
                                              {"discrepancy", c.discrepancy},
                                              {"within_3se", c.within_3se}});
    }
    if (vf.linearity_checked) {
        j["linearity"] = {{"ratio", vf.linearity_ratio}, {"ratio_se", vf.linearity_ratio_se}, {"ok", vf.linearity_ok}};
    }
    j["deviation_checks"] = json::array();
    for (const auto& c : dev.checks) {
        j["deviation_checks"].push_back({{"kind", to_string(c.kind)},
                                         {"step", c.step},
                                         {"offset", c.offset},
                                         {"gain", c.gain},
                                         {"std_error", c.std_error},
                                         {"flagged", c.flagged}});
    }
    j["max_gain"] = dev.max_gain;
    j["max_gain_stderr"] = dev.max_gain_stderr;
    j["pass"] = vf.pass && !dev.any_flagged;
    return j.dump(2);
}

}  // namespace lob_lab
