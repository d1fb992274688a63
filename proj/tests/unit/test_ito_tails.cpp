#include <doctest.h>

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "lob_lab/gaussian_kernel.hpp"
#include "lob_lab/ito_tails.hpp"
#include "lob_lab/parallel.hpp"

using namespace lob_lab;

namespace {

ItoProcessSpec coarse(ItoProcessSpec spec) {
    spec.euler_steps = 100;
    return spec;
}

// Erfc oracle for P(X > x + z | X > x), X ~ N(0, 1).
double brownian_conditional_tail(double x, double z) { return std::erfc((x + z) / std::sqrt(2.0)) / std::erfc(x / std::sqrt(2.0)); }

std::size_t grid_index(const TailEstimate& est, double x, double z) {
    for (std::size_t i = 0; i < est.grid.size(); ++i) {
        if (est.grid[i].first == x && est.grid[i].second == z) return i;
    }
    throw std::out_of_range("grid point");
}

}  // namespace

TEST_SUITE("ito_tails") {

TEST_CASE("brownian terminal moments and tails") {
    const int n = 200'000;
    const auto s = simulate_terminal(coarse(ItoProcessSpec::brownian()), n, 3);
    const double mean = std::accumulate(s.terminal.begin(), s.terminal.end(), 0.0) / n;
    double var = 0.0;
    for (const double x : s.terminal) var += (x - mean) * (x - mean);
    var /= n - 1;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
    for (const double x : {0.0, 1.0, 2.0}) {
        const double p = std::count_if(s.terminal.begin(), s.terminal.end(), [x](double v) { return v > x; }) /
                         static_cast<double>(n);
        const double exact = std_normal_sf(x);
        CHECK(std::abs(p - exact) < 3.0 * std::sqrt(exact * (1.0 - exact) / n));
    }
    for (int i = 0; i < n; ++i) REQUIRE(s.running_max[i] >= s.terminal[i]);
}

TEST_CASE("conditional tail estimates") {
    const auto s = simulate_terminal(coarse(ItoProcessSpec::brownian()), 400'000, 9);
    const auto est = conditional_tail(s.terminal, default_tail_grid());
    REQUIRE(est.grid.size() == 85);
    for (std::size_t i = 0; i < est.grid.size(); ++i) {
        CHECK(est.probabilities[i] >= 0.0);
        CHECK(est.probabilities[i] <= 1.0);
        if (est.grid[i].second == 0.0) {
            CHECK(est.probabilities[i] == 1.0);
            CHECK(est.ci_halfwidths[i] == 0.0);
        }
        CHECK(est.reliable[i] == (est.n_conditioning[i] >= 200));
    }
    const auto a = grid_index(est, 0.0, 1.0);
    CHECK(std::abs(est.probabilities[a] - 0.317310507863) <= est.ci_halfwidths[a]);
    const auto b = grid_index(est, 2.0, 1.0);
    CHECK(std::abs(est.probabilities[b] - 0.0593358330714) <= est.ci_halfwidths[b]);
    CHECK(brownian_conditional_tail(2.0, 1.0) == doctest::Approx(0.0593358330714).epsilon(1e-10));

    // Reliable cells agree with the erfc oracle at the nominal rate.
    int reliable = 0, covered = 0;
    for (std::size_t i = 0; i < est.grid.size(); ++i) {
        if (!est.reliable[i] || est.grid[i].second == 0.0) continue;
        ++reliable;
        const double exact = brownian_conditional_tail(est.grid[i].first, est.grid[i].second);
        covered += exact >= est.ci_lower[i] && exact <= est.ci_upper[i];
    }
    CHECK(covered >= 0.9 * reliable);
    CHECK_THROWS_AS(conditional_tail(s.terminal, {{-1.0, 0.5}}), std::invalid_argument);
}

TEST_CASE("confidence intervals shrink like one over root n") {
    const auto spec = coarse(ItoProcessSpec::brownian());
    const auto small = conditional_tail(simulate_terminal(spec, 100'000, 1).terminal, {{0.0, 0.5}, {0.5, 1.0}});
    const auto large = conditional_tail(simulate_terminal(spec, 200'000, 2).terminal, {{0.0, 0.5}, {0.5, 1.0}});
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(small.ci_halfwidths[i] / large.ci_halfwidths[i] == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
    }
}

TEST_CASE("exponential bound fit") {
    TailEstimate trivial = conditional_tail(std::vector<double>(1000, 1.0), {{0.0, 0.0}});
    const auto fit = fit_exponential_bound(trivial, 1.0);
    CHECK(fit.finite);
    CHECK(fit.C1 == 1.0);
    CHECK_THROWS_AS(fit_exponential_bound(trivial, 0.0), std::invalid_argument);

    const auto none = fit_exponential_bound(conditional_tail(std::vector<double>(10, 1.0), {{0.0, 0.5}}), 1.0);
    CHECK_FALSE(none.finite);

    const auto spec = coarse(ItoProcessSpec::brownian());
    const auto e1 = conditional_tail(simulate_terminal(spec, 200'000, 1).terminal, default_tail_grid());
    const auto e2 = conditional_tail(simulate_terminal(spec, 200'000, 2).terminal, default_tail_grid());
    const auto check = exponential_bound_check(e1, e2, 1.0);
    CHECK(check.pass);
    // Exact maximum of ratio e^z on the grid is 1.03054 at (0, 0.25).
    CHECK(check.first.C1 >= 1.0305425547582774 - 0.01);
    CHECK(check.first.C1 <= 1.2);
    CHECK(check.ratio < 1.2);
}

TEST_CASE("sup inequality on the perturbed process") {
    const auto s = simulate_terminal(coarse(ItoProcessSpec::perturbed(0.01)), 100'000, 4);
    for (const auto& row : sup_inequality_check(s, {0.0, 1.0, 2.0})) {
        CAPTURE(row.x);
        CHECK(row.holds);
        CHECK(row.sup_tail >= row.terminal_tail);
    }
}

TEST_CASE("coefficient bounds are enforced") {
    ItoProcessSpec bad = coarse(ItoProcessSpec::brownian());
    bad.diffusion_fn = [](double t, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = t > 0.5 ? 2.0 : 1.0;
    };
    CHECK_THROWS_AS(simulate_terminal(bad, 1000, 1), SpecificationError);
    bad.diffusion_fn = [](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = NAN;
    };
    CHECK_THROWS_AS(simulate_terminal(bad, 1000, 1), SpecificationError);
    ItoProcessSpec fast_drift = coarse(ItoProcessSpec::perturbed(0.01));
    fast_drift.eps = 0.0001;
    CHECK_THROWS_AS(simulate_terminal(fast_drift, 1000, 1), SpecificationError);
    ItoProcessSpec too_coarse = ItoProcessSpec::brownian();
    too_coarse.euler_steps = 99;
    CHECK_THROWS_AS(simulate_terminal(too_coarse, 10, 1), std::invalid_argument);
}

TEST_CASE("simulation is reproducible and independent of the worker count") {
    const auto spec = coarse(ItoProcessSpec::perturbed(0.01));
    set_worker_cap(1);
    const auto a = simulate_terminal(spec, 3000, 17);
    set_worker_cap(3);
    const auto b = simulate_terminal(spec, 3000, 17);
    set_worker_cap(0);
    CHECK(a.terminal == b.terminal);
    CHECK(a.running_max == b.running_max);
    CHECK(simulate_terminal(spec, 3000, 18).terminal != a.terminal);
}

TEST_CASE("conditional mean gap for brownian increments") {
    const auto report = conditional_mean_gap(ItoProcessSpec::brownian(), {1e-2, 1e-3}, 200'000, 21);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.bounded);
    for (const auto& row : report.rows) {
        CAPTURE(row.dt);
        REQUIRE(row.p_grid.back() == 0.0);
        const double at0 = row.gaps.back();
        CHECK(std::abs(at0 - std::sqrt(2.0 / M_PI)) <= row.ci_halfwidths.back());
        CHECK(row.p_grid.front() == doctest::Approx(-5.0 * std::sqrt(row.dt)));
        // Exact truncated-normal gap q + phi(q)/Phi(q) shrinks as q -> -inf.
        for (std::size_t j = 1; j < row.gaps.size(); ++j) {
            if (!row.reliable[j - 1] || !row.reliable[j]) continue;
            CHECK(row.gaps[j - 1] <= row.gaps[j] + row.ci_halfwidths[j - 1] + row.ci_halfwidths[j]);
        }
        CHECK_FALSE(row.reliable.front());
    }
    CHECK(report.common_bound <= 1.5 * std::sqrt(2.0 / M_PI));
}

TEST_CASE("gaussian proximity") {
    const auto constant = gaussian_proximity(ItoProcessSpec::constant(0.0, 1.0), {1e-1, 1e-2}, 200'000, 3);
    CHECK(constant.sigma0 == 1.0);
    for (const auto& r : constant.rows) {
        CHECK(r.tail_gap <= r.tail_floor);
        CHECK(r.truncated_mean_gap <= r.mean_floor);
        CHECK(r.truncated_mean_gap_at_6 < 1e-3);
    }
    const auto sv = gaussian_proximity(ItoProcessSpec::stochastic_vol(0.1), {1e-1, 1e-2, 1e-3}, 200'000, 3);
    CHECK(sv.rows[0].tail_gap > sv.rows[0].tail_floor);
    CHECK(sv.tail_trend_ok);
    CHECK(sv.mean_trend_ok);
    CHECK_THROWS_AS(gaussian_proximity(ItoProcessSpec::brownian(), {1e-2, 1e-1}, 10, 1), std::invalid_argument);
}

TEST_CASE("report json is well formed") {
    const auto spec = coarse(ItoProcessSpec::brownian());
    const auto s = simulate_terminal(spec, 5000, 1);
    const auto est = conditional_tail(s.terminal, default_tail_grid());
    const auto check = exponential_bound_check(est, est, 1.0);
    const auto gaps = conditional_mean_gap(spec, {1e-2}, 5000, 1);
    const auto j = nlohmann::json::parse(tails_report_json(spec, est, check, sup_inequality_check(s, {0.0}), gaps, true));
    for (const char* key : {"spec", "grid", "estimates", "ci", "fitted_constants", "pass"}) CHECK(j.contains(key));
    const auto pj = nlohmann::json::parse(
        proximity_report_json(spec, gaussian_proximity(spec, {1e-2}, 5000, 1), true));
    CHECK(pj["rows"].size() == 1);
}

}
