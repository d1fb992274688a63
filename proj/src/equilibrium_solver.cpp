#include "lob_lab/equilibrium_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lob_lab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const InteriorMaximizer* interior(const MaximizerResult& r) { return std::get_if<InteriorMaximizer>(&r); }

}  // namespace

GaussianIncrement ModelParams::increment() const {
    const double h = dt();
    return GaussianIncrement{alpha * h, sigma * std::sqrt(h)};
}

void ModelParams::validate() const {
    std::ostringstream err;
    if (!std::isfinite(alpha)) err << " alpha must be finite;";
    if (!(sigma > 0.0) || !std::isfinite(sigma)) err << " sigma must be > 0;";
    if (!(horizon > 0.0) || !std::isfinite(horizon)) err << " horizon must be > 0;";
    if (steps < 1) err << " steps must be >= 1;";
    if (!err.str().empty()) throw std::invalid_argument("invalid ModelParams:" + err.str());
}

std::string_view to_string(Violation v) {
    switch (v) {
        case Violation::AskWithdrawal: return "long agents stop posting limit orders (la[n+1] >= 0)";
        case Violation::BidWithdrawal: return "short agents stop posting limit orders (lb[n+1] <= 0)";
        case Violation::LongMarketOrder: return "long agents submit market orders (pb > la)";
        case Violation::ShortMarketOrder: return "short agents submit market orders (lb > pa)";
        case Violation::ScalableRoundTrip: return "scalable round-trip (pa < pb + |alpha| dt)";
    }
    return "unknown";
}

std::string describe(const std::vector<Violation>& vs) {
    std::string out;
    for (const auto v : vs) {
        if (!out.empty()) out += "; ";
        out += to_string(v);
    }
    return out;
}

std::vector<Violation> check_no_market_order(const StepQuotes& q, const ModelParams& params) {
    std::vector<Violation> out;
    if (!(q.pb <= q.la)) out.push_back(Violation::LongMarketOrder);
    if (!(q.lb <= q.pa)) out.push_back(Violation::ShortMarketOrder);
    if (!(q.pa >= q.pb + std::abs(params.alpha) * params.dt())) out.push_back(Violation::ScalableRoundTrip);
    return out;
}

TerminalOutcome solve_terminal_period(const ModelParams& params, const TerminalSolverOptions& opts) {
    params.validate();
    const GaussianIncrement inc = params.increment();
    const double m = inc.mean;
    const double s = inc.std;

    // Iterate the first-order conditions solved for the opposite quote: the
    // bid's condition gives pa = s Mills((m - pb)/s), the ask's gives
    // pb = -s Mills((pa - m)/s). Direct best responses have slope ~2.3 at the
    // fixed point and diverge under any damping; these maps contract.
    double pa = opts.initial_depth * s;
    double pb = -opts.initial_depth * s;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const double ta = s * mills_ratio((m - pb) / s);
        const double tb = -s * mills_ratio((pa - m) / s);
        const double na = (1.0 - opts.damping) * pa + opts.damping * ta;
        const double nb = (1.0 - opts.damping) * pb + opts.damping * tb;
        residual = std::max(std::abs(na - pa), std::abs(nb - pb));
        pa = na;
        pb = nb;
        if (!std::isfinite(pa) || !std::isfinite(pb)) break;
        if (residual < opts.tolerance * s) break;
    }
    if (!(residual < opts.tolerance * s) || !std::isfinite(pa) || !std::isfinite(pb)) {
        throw ConvergenceError("terminal fixed point did not converge", StepQuotes{pa, pb, kNaN, kNaN}, residual,
                               it);
    }

    // Confirm mutual best responses.
    const auto ra = sell_objective_maximizer(pb, inc);
    const auto rb = buy_objective_maximizer(pa, inc);
    const auto* ia = interior(ra);
    const auto* ib = interior(rb);
    const double br_residual = (ia && ib) ? std::max(std::abs(ia->price - pa), std::abs(ib->price - pb))
                                          : std::numeric_limits<double>::infinity();
    if (!(br_residual < 1e-8 * s)) {
        throw ConvergenceError("terminal fixed point is not a mutual best response", StepQuotes{pa, pb, kNaN, kNaN},
                               br_residual, it);
    }

    StepQuotes q;
    q.pa = pa;
    q.pb = pb;
    q.la = pb + m + sell_objective(pa, pb, inc);
    q.lb = pa + m - buy_objective(pb, pa, inc);
    auto violations = check_no_market_order(q, params);
    if (!violations.empty()) return DegenerateTerminal{std::move(violations), q};
    return q;
}

StepOutcome backward_step(double la_next, double lb_next, const ModelParams& params) {
    DegeneracySignal signal;
    if (!(la_next < 0.0)) signal.violations.push_back(Violation::AskWithdrawal);
    if (!(lb_next > 0.0)) signal.violations.push_back(Violation::BidWithdrawal);
    if (!signal.violations.empty()) return signal;

    const GaussianIncrement inc = params.increment();
    const auto ra = sell_objective_maximizer(la_next, inc);
    const auto rb = buy_objective_maximizer(lb_next, inc);
    const auto& a = std::get<InteriorMaximizer>(ra);
    const auto& b = std::get<InteriorMaximizer>(rb);

    StepQuotes q;
    q.pa = a.price;
    q.pb = b.price;
    q.la = la_next + inc.mean + a.value;
    q.lb = lb_next + inc.mean - b.value;
    signal.violations = check_no_market_order(q, params);
    if (!signal.violations.empty()) {
        signal.candidate = q;
        return signal;
    }
    return q;
}

EquilibriumPath solve_full(const ModelParams& params, const TerminalSolverOptions& opts) {
    params.validate();
    const int n_steps = params.steps;

    EquilibriumPath path;
    path.params = params;
    path.pa.assign(n_steps + 1, kNaN);
    path.pb.assign(n_steps + 1, kNaN);
    path.la.assign(n_steps + 1, kNaN);
    path.lb.assign(n_steps + 1, kNaN);
    path.last_finite_ask = kNaN;
    path.min_abs_la = kNaN;

    const auto terminal = solve_terminal_period(params, opts);
    if (const auto* bad = std::get_if<DegenerateTerminal>(&terminal)) {
        path.degenerate_from = n_steps - 1;
        path.degeneracy_violations = bad->violations;
        return path;
    }
    const auto& q = std::get<StepQuotes>(terminal);
    // LTC: the terminal book is the last book shifted by the last increment,
    // and residual inventory is marked to it.
    path.pa[n_steps - 1] = path.pa[n_steps] = q.pa;
    path.pb[n_steps - 1] = path.pb[n_steps] = q.pb;
    path.la[n_steps] = q.pb;
    path.lb[n_steps] = q.pa;
    path.la[n_steps - 1] = q.la;
    path.lb[n_steps - 1] = q.lb;

    for (int n = n_steps - 2; n >= 0; --n) {
        const auto outcome = backward_step(path.la[n + 1], path.lb[n + 1], params);
        if (const auto* sig = std::get_if<DegeneracySignal>(&outcome)) {
            path.degenerate_from = n;
            path.degeneracy_violations = sig->violations;
            path.last_finite_ask = path.pa[n + 1];
            break;
        }
        const auto& s = std::get<StepQuotes>(outcome);
        path.pa[n] = s.pa;
        path.pb[n] = s.pb;
        path.la[n] = s.la;
        path.lb[n] = s.lb;
    }

    double min_abs = std::numeric_limits<double>::infinity();
    for (int n = path.first_valid_step(); n <= n_steps; ++n) min_abs = std::min(min_abs, std::abs(path.la[n]));
    path.min_abs_la = min_abs;
    return path;
}

}  // namespace lob_lab
