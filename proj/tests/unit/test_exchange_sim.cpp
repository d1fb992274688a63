#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "lob_lab/exchange_sim.hpp"
#include "lob_lab/parallel.hpp"

using namespace lob_lab;

namespace {

SimConfig small_config(int paths = 20'000) {
    SimConfig cfg;
    cfg.paths = paths;
    cfg.seed = 5;
    cfg.batch = 1024;
    return cfg;
}

}  // namespace

TEST_SUITE("exchange_sim") {

TEST_CASE("book queries") {
    const auto book = LOBState::two_atom(0.3, 1.0, -0.3, 2.0);
    CHECK(book.best_ask() == 0.3);
    CHECK(book.best_bid() == -0.3);
    CHECK(book.sell_mass_below(0.3) == 0.0);
    CHECK(book.sell_mass_below(0.31) == 1.0);
    CHECK(book.buy_mass_above(-0.3) == 0.0);
    CHECK(book.buy_mass_above(-0.5) == 2.0);
    CHECK(book.is_non_degenerate());
    CHECK_FALSE(LOBState::two_atom(0.1, 1.0, 0.2, 1.0).is_non_degenerate());
    LOBState empty;
    CHECK_THROWS_AS(empty.best_ask(), ExecutionError);
    CHECK_THROWS_AS(empty.best_bid(), ExecutionError);
}

TEST_CASE("limit sell at the ask fills iff the price moves through it") {
    const auto book = LOBState::two_atom(0.3, 1.0, -0.3, 1.0);
    const auto sell = Control::limit_sell(0.3, 2.0);
    const auto hit = step_state({2.0}, sell, book, 0.0, 0.3 + 1e-9);
    CHECK(hit.executed);
    CHECK(hit.state.inventory == 0.0);
    CHECK(hit.cash_delta == doctest::Approx(0.6));
    const auto miss = step_state({2.0}, sell, book, 0.0, 0.3);
    CHECK_FALSE(miss.executed);
    CHECK(miss.state.inventory == 2.0);
    CHECK(miss.cash_delta == 0.0);
}

TEST_CASE("a limit buy at the bid mirrors the sell") {
    const auto book = LOBState::two_atom(0.3, 1.0, -0.3, 1.0);
    const auto buy = Control::limit_buy(-0.3, 1.0);
    const auto hit = step_state({-1.0}, buy, book, 0.0, -0.31);
    CHECK(hit.executed);
    CHECK(hit.state.inventory == 0.0);
    CHECK(hit.cash_delta == doctest::Approx(0.3));
    CHECK_FALSE(step_state({-1.0}, buy, book, 0.0, -0.29).executed);
}

TEST_CASE("orders behind resting mass need demand to clear it") {
    DemandModel demand{2.0};
    const auto book = LOBState::two_atom(0.3, 1.0, -0.3, 1.0);
    const auto sell = Control::limit_sell(0.5, 1.0);
    // Demand at 0.5 is 2 (xi - 0.5); it must exceed the unit mass at 0.3.
    CHECK_FALSE(step_state({1.0}, sell, book, 0.0, 0.9, demand).executed);
    CHECK(step_state({1.0}, sell, book, 0.0, 1.1, demand).executed);
    // Fundamental level shifts everything.
    CHECK(step_state({1.0}, Control::limit_sell(10.5, 1.0), LOBState::two_atom(10.3, 1.0, 9.7, 1.0), 10.0, 1.1, demand)
              .executed);
}

TEST_CASE("market orders fill at the best opposite quote") {
    const auto book = LOBState::two_atom(0.3, 1.0, -0.2, 1.0);
    const auto sell = step_state({1.5}, Control::market(1.5), book, 0.0, 5.0);
    CHECK(sell.cash_delta == doctest::Approx(-0.3));
    CHECK(sell.state.inventory == 0.0);
    const auto buy = step_state({-1.0}, Control::market(-1.0), book, 0.0, 5.0);
    CHECK(buy.cash_delta == doctest::Approx(-0.3));
    CHECK(buy.state.inventory == 0.0);
    LOBState no_bids;
    no_bids.sell_atoms.push_back({0.3, 1.0});
    CHECK_THROWS_AS(step_state({1.0}, Control::market(1.0), no_bids, 0.0, 0.0), ExecutionError);
}

TEST_CASE("invalid controls are rejected") {
    const auto book = LOBState::two_atom(0.3, 1.0, -0.3, 1.0);
    CHECK_THROWS_AS(step_state({1.0}, Control::limit_sell(0.3, 0.0), book, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(step_state({1.0}, Control::limit_sell(NAN, 1.0), book, 0.0, 0.0), std::invalid_argument);

    const auto path = solve_full({0.0, 1.0, 1.0, 10});
    const Strategy bad = [](const DecisionContext& ctx, const AgentState&) {
        return ctx.step == 3 ? Control::limit_buy(0.0, -1.0) : Control::wait();
    };
    try {
        simulate_objective(bad, 1.0, path, small_config(100));
        FAIL("expected StrategyError");
    } catch (const StrategyError& e) {
        CHECK(e.step() == 3);
    }
}

TEST_CASE("degenerate paths are refused") {
    const auto path = solve_full({0.1, 1.0, 1.0, 100});
    CHECK_THROWS_AS(simulate_objective(equilibrium_strategy(), 1.0, path, small_config(10)), std::invalid_argument);
    CHECK_THROWS_AS(deviation_test(path, 1.0, small_config(10)), std::invalid_argument);
}

TEST_CASE("holding to the horizon earns the terminal bid plus drift") {
    const auto path = solve_full({0.0, 1.0, 1.0, 20});
    const auto est = simulate_objective(wait_strategy(), 1.0, path, small_config());
    CHECK(std::abs(est.mean - path.pb[20]) <= 3.0 * est.std_error);
    CHECK(est.std_error == doctest::Approx(1.0 / std::sqrt(20'000.0)).epsilon(0.05));
}

TEST_CASE("equilibrium payoff equals the value function") {
    const auto path = solve_full({0.0, 1.0, 1.0, 20});
    const auto report = verify_value_function(path, {1.0, -1.0, 2.0, -2.0, 0.0}, small_config());
    REQUIRE(report.checks.size() == 5);
    for (const auto& c : report.checks) {
        CAPTURE(c.s);
        CHECK(c.within_3se);
    }
    CHECK(report.checks[4].mc_payoff == 0.0);
    CHECK(report.linearity_checked);
    CHECK(report.linearity_ok);
    CHECK(report.pass);
    const auto est = simulate_objective(equilibrium_strategy(), 1.0, path, small_config(5000));
    CHECK(est.rule_checks > 0);
    CHECK(est.rule_mismatches == 0);
}

TEST_CASE("simulation is reproducible and independent of the worker count") {
    const auto path = solve_full({0.0, 1.0, 1.0, 15});
    set_worker_cap(1);
    const auto a = simulate_objective(equilibrium_strategy(), 1.0, path, small_config(6000));
    set_worker_cap(4);
    const auto b = simulate_objective(equilibrium_strategy(), 1.0, path, small_config(6000));
    const auto d1 = deviation_test(path, -1.0, small_config(3000));
    set_worker_cap(1);
    const auto d2 = deviation_test(path, -1.0, small_config(3000));
    set_worker_cap(0);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    REQUIRE(d1.checks.size() == d2.checks.size());
    for (std::size_t i = 0; i < d1.checks.size(); ++i) CHECK(d1.checks[i].gain == d2.checks[i].gain);
    auto other_seed = small_config(6000);
    other_seed.seed = 6;
    CHECK(simulate_objective(equilibrium_strategy(), 1.0, path, other_seed).mean != a.mean);
}

TEST_CASE("no profitable one-shot deviation on a short horizon") {
    const auto path = solve_full({0.0, 1.0, 1.0, 10});
    for (const double s0 : {1.0, -1.0}) {
        const auto report = deviation_test(path, s0, small_config());
        // 10 steps x (3 offsets x 2 sides + market + wait) + hold.
        CHECK(report.checks.size() == 81);
        CHECK_FALSE(report.any_flagged);
        for (const auto& c : report.checks) {
            if (c.kind == DeviationCheck::Kind::MarketOrder) {
                // Crossing the spread is strictly worse by a margin.
                CHECK(c.gain < -3.0 * c.std_error);
            }
        }
    }
    CHECK(deviation_test(path, 0.0, small_config(10)).checks.empty());
}

TEST_CASE("report json") {
    const auto path = solve_full({0.0, 1.0, 1.0, 5});
    const auto cfg = small_config(2000);
    const auto vf = verify_value_function(path, {1.0}, cfg);
    const auto dev = deviation_test(path, 1.0, cfg);
    const auto j = nlohmann::json::parse(exchange_report_json(path, cfg, vf, dev));
    CHECK(j.contains("params"));
    CHECK(j["config"]["paths"] == 2000);
    CHECK(j["value_function_checks"].size() == 1);
    CHECK(j["deviation_checks"].size() == dev.checks.size());
    CHECK(j.contains("max_gain"));
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.paths = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.deviation_grid = {0.1, -0.2};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

}
