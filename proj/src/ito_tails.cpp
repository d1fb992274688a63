#include "lob_lab/ito_tails.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "lob_lab/gaussian_kernel.hpp"
#include "lob_lab/parallel.hpp"
#include "lob_lab/rng.hpp"

namespace lob_lab {

namespace {

constexpr std::size_t kBlock = 256;
constexpr double kZ95 = 1.959963984540054;
constexpr double kBoundSlack = 1e-12;
// Euler steps inside one short interval for the gap and proximity checks.
constexpr int kShortHorizonSteps = 100;

void constant_fill(std::span<double> out, double v) { std::fill(out.begin(), out.end(), v); }

struct Wilson {
    double lower;
    double upper;
};

Wilson wilson(std::int64_t hits, std::int64_t n) {
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = kZ95 / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::int64_t count_above(const std::vector<double>& sorted, double v) {
    return static_cast<std::int64_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), v));
}

[[noreturn]] void report_bound_violation(const ItoProcessSpec& spec, double t, std::span<const double> x,
                                         std::span<const double> mu, std::span<const double> sigma, double drift_cap) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] >= spec.c - kBoundSlack && sigma[i] <= spec.C + kBoundSlack)) {
            throw SpecificationError("diffusion " + std::to_string(sigma[i]) + " outside [" + std::to_string(spec.c) +
                                     ", " + std::to_string(spec.C) + "] at t=" + std::to_string(t) +
                                     ", x=" + std::to_string(x[i]));
        }
        if (!(std::abs(mu[i]) <= drift_cap)) {
            throw SpecificationError("drift " + std::to_string(mu[i]) + " exceeds sqrt(eps) at t=" + std::to_string(t) +
                                     ", x=" + std::to_string(x[i]));
        }
    }
    throw SpecificationError("coefficient bound violated at t=" + std::to_string(t));
}

ItoProcessSpec short_horizon(const ItoProcessSpec& spec) {
    ItoProcessSpec s = spec;
    s.euler_steps = kShortHorizonSteps;
    return s;
}

}  // namespace

void ItoProcessSpec::validate() const {
    if (!drift_fn || !diffusion_fn) throw std::invalid_argument("ItoProcessSpec: coefficient functions must be set");
    if (!(c > 0.0) || !(C >= c) || !std::isfinite(C)) throw std::invalid_argument("ItoProcessSpec: need 0 < c <= C");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("ItoProcessSpec: eps must be >= 0");
    if (euler_steps < 1) throw std::invalid_argument("ItoProcessSpec: euler_steps must be >= 1");
}

double ItoProcessSpec::initial_diffusion() const {
    const double zero[1] = {0.0};
    double out[1] = {0.0};
    diffusion_fn(0.0, zero, zero, out);
    return out[0];
}

ItoProcessSpec ItoProcessSpec::brownian(double sigma) {
    ItoProcessSpec s = constant(0.0, sigma);
    s.name = "brownian";
    return s;
}

ItoProcessSpec ItoProcessSpec::constant(double alpha, double sigma) {
    ItoProcessSpec s;
    s.name = "constant";
    s.drift_fn = [alpha](double, auto, auto, std::span<double> out) { constant_fill(out, alpha); };
    s.diffusion_fn = [sigma](double, auto, auto, std::span<double> out) { constant_fill(out, sigma); };
    s.c = s.C = sigma;
    s.eps = alpha * alpha;
    return s;
}

ItoProcessSpec ItoProcessSpec::perturbed(double eps) {
    ItoProcessSpec s;
    s.name = "perturbed";
    const double scale = std::sqrt(eps);
    s.drift_fn = [scale](double t, std::span<const double> x, auto, std::span<double> out) {
        detail::perturbed_drift(t, scale, x, out);
    };
    s.diffusion_fn = [](double, std::span<const double> x, auto, std::span<double> out) {
        detail::perturbed_diffusion(x, out);
    };
    s.c = 0.9;
    s.C = 1.1;
    s.eps = eps;
    return s;
}

ItoProcessSpec ItoProcessSpec::stochastic_vol(double alpha) {
    ItoProcessSpec s;
    s.name = "stochastic_vol";
    s.drift_fn = [alpha](double, auto, auto, std::span<double> out) { constant_fill(out, alpha); };
    s.diffusion_fn = [](double, auto, std::span<const double> w, std::span<double> out) {
        detail::tanh_diffusion(w, out);
    };
    s.c = 0.9;
    s.C = 1.1;
    s.eps = alpha * alpha;
    return s;
}

TerminalSamples simulate_terminal(const ItoProcessSpec& spec, int paths, std::uint64_t seed, double horizon) {
    spec.validate();
    if (spec.euler_steps < 100) throw std::invalid_argument("simulate_terminal: euler_steps must be >= 100");
    if (paths < 1) throw std::invalid_argument("simulate_terminal: paths must be >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("simulate_terminal: horizon must be > 0");

    const int steps = spec.euler_steps;
    const double dt = horizon / steps;
    const double drift_cap = std::sqrt(spec.eps) + kBoundSlack;
    const std::size_t n_paths = static_cast<std::size_t>(paths);
    TerminalSamples out;
    out.terminal.resize(n_paths);
    out.running_max.resize(n_paths);

    const std::size_t blocks = (n_paths + kBlock - 1) / kBlock;
    parallel_for(blocks, [&](std::size_t b_begin, std::size_t b_end) {
        std::vector<double> x(kBlock), w(kBlock), mx(kBlock), mu(kBlock), sig(kBlock), z(kBlock);
        std::vector<NormalStream> normals;
        normals.reserve(kBlock);
        for (std::size_t b = b_begin; b < b_end; ++b) {
            const std::size_t first = b * kBlock;
            const std::size_t m = std::min(kBlock, n_paths - first);
            normals.clear();
            for (std::size_t i = 0; i < m; ++i) normals.emplace_back(seed, first + i);
            const std::span<double> xs(x.data(), m), ws(w.data(), m), mxs(mx.data(), m), mus(mu.data(), m),
                sigs(sig.data(), m), zs(z.data(), m);
            std::fill(xs.begin(), xs.end(), 0.0);
            std::fill(ws.begin(), ws.end(), 0.0);
            std::fill(mxs.begin(), mxs.end(), 0.0);
            for (int k = 0; k < steps; ++k) {
                const double t = k * dt;
                spec.drift_fn(t, xs, ws, mus);
                spec.diffusion_fn(t, xs, ws, sigs);
                if (!detail::within_bounds(mus, sigs, drift_cap, spec.c - kBoundSlack, spec.C + kBoundSlack)) {
                    report_bound_violation(spec, t, xs, mus, sigs, drift_cap);
                }
                for (std::size_t i = 0; i < m; ++i) zs[i] = normals[i]();
                detail::euler_update(xs, ws, mxs, mus, sigs, zs, dt);
            }
            // within_bounds cannot see NaN; a NaN coefficient shows up here.
            for (std::size_t i = 0; i < m; ++i) {
                if (!std::isfinite(xs[i]) || !std::isfinite(mxs[i])) {
                    throw SpecificationError("non-finite sample on path " + std::to_string(first + i));
                }
            }
            std::copy(xs.begin(), xs.end(), out.terminal.begin() + static_cast<std::ptrdiff_t>(first));
            std::copy(mxs.begin(), mxs.end(), out.running_max.begin() + static_cast<std::ptrdiff_t>(first));
        }
    });
    return out;
}

std::vector<std::pair<double, double>> default_tail_grid() {
    std::vector<std::pair<double, double>> grid;
    for (const double x : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        for (int k = 0; k <= 16; ++k) grid.emplace_back(x, 0.25 * k);
    }
    return grid;
}

TailEstimate conditional_tail(std::span<const double> samples, const std::vector<std::pair<double, double>>& grid) {
    for (const auto& [x, z] : grid) {
        if (!(x >= 0.0) || !(z >= 0.0)) throw std::invalid_argument("conditional_tail: grid x, z must be >= 0");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());

    TailEstimate est;
    est.grid = grid;
    for (const auto& [x, z] : grid) {
        const std::int64_t n = count_above(sorted, x);
        const std::int64_t hits = z == 0.0 ? n : count_above(sorted, x + z);
        double p = 0.0;
        Wilson ci{0.0, 1.0};
        if (z == 0.0) {
            p = 1.0;
            ci = {1.0, 1.0};
        } else if (n > 0) {
            p = static_cast<double>(hits) / static_cast<double>(n);
            ci = wilson(hits, n);
        }
        est.probabilities.push_back(p);
        est.ci_lower.push_back(ci.lower);
        est.ci_upper.push_back(ci.upper);
        est.ci_halfwidths.push_back(0.5 * (ci.upper - ci.lower));
        est.n_conditioning.push_back(n);
        est.reliable.push_back(n >= kMinConditioningSamples);
    }
    return est;
}

ExponentialBoundFit fit_exponential_bound(const TailEstimate& estimate, double c1) {
    if (!(c1 > 0.0)) throw std::invalid_argument("fit_exponential_bound: c1 must be > 0");
    ExponentialBoundFit fit;
    fit.C1 = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < estimate.grid.size(); ++i) {
        if (!estimate.reliable[i]) continue;
        const auto [x, z] = estimate.grid[i];
        const double v = estimate.ci_upper[i] * std::exp(c1 * z);
        if (!any || v > fit.C1) {
            fit.C1 = v;
            fit.argmax_x = x;
            fit.argmax_z = z;
            any = true;
        }
    }
    fit.finite = any && std::isfinite(fit.C1);
    return fit;
}

ExponentialBoundCheck exponential_bound_check(const TailEstimate& first, const TailEstimate& second, double c1) {
    ExponentialBoundCheck check;
    check.c1 = c1;
    check.first = fit_exponential_bound(first, c1);
    check.second = fit_exponential_bound(second, c1);
    if (check.first.finite && check.second.finite) {
        check.ratio = std::max(check.first.C1, check.second.C1) / std::min(check.first.C1, check.second.C1);
        check.pass = check.ratio <= 2.0;
    } else {
        check.ratio = std::numeric_limits<double>::infinity();
    }
    return check;
}

std::vector<SupInequalityRow> sup_inequality_check(const TerminalSamples& samples, const std::vector<double>& xs,
                                                   double delta) {
    const double n = static_cast<double>(samples.terminal.size());
    std::vector<SupInequalityRow> rows;
    for (const double x : xs) {
        const auto above = [x](double v) { return v > x; };
        const double t = std::count_if(samples.terminal.begin(), samples.terminal.end(), above) / n;
        const double s = std::count_if(samples.running_max.begin(), samples.running_max.end(), above) / n;
        rows.push_back({x, t, s, 2.0 * t >= (1.0 - delta) * s});
    }
    return rows;
}

MeanGapReport conditional_mean_gap(const ItoProcessSpec& spec, const std::vector<double>& dt_list, int paths,
                                   std::uint64_t seed, int p_points) {
    if (dt_list.empty()) throw std::invalid_argument("conditional_mean_gap: empty dt list");
    if (p_points < 2) throw std::invalid_argument("conditional_mean_gap: need at least 2 grid points");
    const ItoProcessSpec fine = short_horizon(spec);
    MeanGapReport report;
    report.bounded = true;
    for (std::size_t k = 0; k < dt_list.size(); ++k) {
        const double dt = dt_list[k];
        const double sq = std::sqrt(dt);
        auto x = simulate_terminal(fine, paths, seed + k, dt).terminal;
        std::sort(x.begin(), x.end());
        std::vector<double> sum(x.size() + 1, 0.0), sumsq(x.size() + 1, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            sum[i + 1] = sum[i] + x[i];
            sumsq[i + 1] = sumsq[i] + x[i] * x[i];
        }

        MeanGapRow row;
        row.dt = dt;
        bool any = false;
        for (int j = 0; j < p_points; ++j) {
            const double p = -5.0 * sq * spec.C * (1.0 - static_cast<double>(j) / (p_points - 1));
            const auto n = static_cast<std::int64_t>(std::lower_bound(x.begin(), x.end(), p) - x.begin());
            double gap = std::numeric_limits<double>::quiet_NaN();
            double half = std::numeric_limits<double>::quiet_NaN();
            if (n > 0) {
                const double nn = static_cast<double>(n);
                const double mean = sum[n] / nn;
                const double var = n > 1 ? std::max(0.0, (sumsq[n] - nn * mean * mean) / (nn - 1.0)) : 0.0;
                gap = (p - mean) / sq;
                half = kZ95 * std::sqrt(var / nn) / sq;
            }
            const bool reliable = n >= kMinConditioningSamples;
            row.p_grid.push_back(p);
            row.gaps.push_back(gap);
            row.ci_halfwidths.push_back(half);
            row.n_conditioning.push_back(n);
            row.reliable.push_back(reliable);
            if (reliable) {
                row.sup_gap = any ? std::max(row.sup_gap, std::abs(gap)) : std::abs(gap);
                any = true;
            }
        }
        report.bounded = report.bounded && any && std::isfinite(row.sup_gap);
        report.common_bound = k == 0 ? row.sup_gap : std::max(report.common_bound, row.sup_gap);
        report.rows.push_back(std::move(row));
    }
    return report;
}

ProximityReport gaussian_proximity(const ItoProcessSpec& spec, const std::vector<double>& dt_list, int paths,
                                   std::uint64_t seed) {
    if (dt_list.empty()) throw std::invalid_argument("gaussian_proximity: empty dt list");
    for (std::size_t k = 1; k < dt_list.size(); ++k) {
        if (!(dt_list[k] < dt_list[k - 1])) throw std::invalid_argument("gaussian_proximity: dt list must be decreasing");
    }
    const ItoProcessSpec fine = short_horizon(spec);
    ProximityReport report;
    report.sigma0 = spec.initial_diffusion();
    const double s0 = report.sigma0;

    for (std::size_t k = 0; k < dt_list.size(); ++k) {
        const double dt = dt_list[k];
        auto xi = simulate_terminal(fine, paths, seed + k, dt).terminal;
        const double inv_sq = 1.0 / std::sqrt(dt);
        for (double& v : xi) v *= inv_sq;
        std::sort(xi.begin(), xi.end());
        const double n = static_cast<double>(xi.size());
        // upper[i] = sum of xi[i..]
        std::vector<double> upper(xi.size() + 1, 0.0);
        for (std::size_t i = xi.size(); i-- > 0;) upper[i] = upper[i + 1] + xi[i];
        const double second_moment =
            std::inner_product(xi.begin(), xi.end(), xi.begin(), 0.0) / n;

        ProximityRow row;
        row.dt = dt;
        row.samples = paths;
        for (int j = 0; j <= 240; ++j) {
            const double p = -6.0 + 0.05 * j;
            const auto idx = static_cast<std::size_t>(std::upper_bound(xi.begin(), xi.end(), p) - xi.begin());
            const double tail = static_cast<double>(xi.size() - idx) / n;
            const double tail_gap = std::max(std::abs(p), 1.0) * std::abs(tail - std_normal_sf(p / s0));
            const double mean_gap = std::abs(upper[idx] / n - s0 * std_normal_pdf(p / s0));
            row.tail_gap = std::max(row.tail_gap, tail_gap);
            row.truncated_mean_gap = std::max(row.truncated_mean_gap, mean_gap);
            if (j == 240) row.truncated_mean_gap_at_6 = mean_gap;
        }
        row.tail_floor = 2.0 * std::sqrt(std::log(2.0 / 0.05) / (2.0 * n));
        row.mean_floor = 4.0 * std::sqrt(second_moment / n);
        if (k > 0) {
            const ProximityRow& prev = report.rows.back();
            report.tail_trend_ok = report.tail_trend_ok && (row.tail_gap <= prev.tail_gap || row.tail_gap <= row.tail_floor);
            report.mean_trend_ok = report.mean_trend_ok &&
                                   (row.truncated_mean_gap <= prev.truncated_mean_gap || row.truncated_mean_gap <= row.mean_floor);
        }
        report.rows.push_back(row);
    }
    return report;
}

namespace {

nlohmann::json spec_json(const ItoProcessSpec& spec) {
    return {{"name", spec.name}, {"c", spec.c}, {"C", spec.C}, {"eps", spec.eps}, {"euler_steps", spec.euler_steps}};
}

nlohmann::json fit_json(const ExponentialBoundFit& f) {
    return {{"C1", f.finite ? nlohmann::json(f.C1) : nlohmann::json(nullptr)},
            {"finite", f.finite},
            {"argmax", {f.argmax_x, f.argmax_z}}};
}

// NaN is not valid JSON.
nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string tails_report_json(const ItoProcessSpec& spec, const TailEstimate& estimate,
                              const ExponentialBoundCheck& check, const std::vector<SupInequalityRow>& sup_rows,
                              const MeanGapReport& gaps, bool pass) {
    using nlohmann::json;
    json j;
    j["spec"] = spec_json(spec);
    j["grid"] = json::array();
    j["ci"] = json::array();
    for (std::size_t i = 0; i < estimate.grid.size(); ++i) {
        j["grid"].push_back({estimate.grid[i].first, estimate.grid[i].second});
        j["ci"].push_back({estimate.ci_lower[i], estimate.ci_upper[i]});
    }
    j["estimates"] = estimate.probabilities;
    j["n_conditioning"] = estimate.n_conditioning;
    j["reliable"] = estimate.reliable;
    j["fitted_constants"] = {{"c1", check.c1},
                             {"first_seed", fit_json(check.first)},
                             {"second_seed", fit_json(check.second)},
                             {"ratio", number_or_null(check.ratio)},
                             {"stable", check.pass}};
    j["sup_inequality"] = json::array();
    for (const auto& r : sup_rows) {
        j["sup_inequality"].push_back(
            {{"x", r.x}, {"terminal_tail", r.terminal_tail}, {"sup_tail", r.sup_tail}, {"holds", r.holds}});
    }
    json mg = json::array();
    for (const auto& r : gaps.rows) {
        json gaps_j = json::array();
        for (const double g : r.gaps) gaps_j.push_back(number_or_null(g));
        mg.push_back({{"dt", r.dt}, {"p_grid", r.p_grid}, {"gaps", gaps_j}, {"reliable", r.reliable}, {"sup_gap", r.sup_gap}});
    }
    j["mean_gap"] = {{"rows", mg}, {"common_bound", gaps.common_bound}, {"bounded", gaps.bounded}};
    j["pass"] = pass;
    return j.dump(2);
}

std::string proximity_report_json(const ItoProcessSpec& spec, const ProximityReport& report, bool pass) {
    using nlohmann::json;
    json j;
    j["spec"] = spec_json(spec);
    j["sigma0"] = report.sigma0;
    j["rows"] = json::array();
    for (const auto& r : report.rows) {
        j["rows"].push_back({{"dt", r.dt},
                             {"tail_gap", r.tail_gap},
                             {"truncated_mean_gap", r.truncated_mean_gap},
                             {"truncated_mean_gap_at_6", r.truncated_mean_gap_at_6},
                             {"tail_floor", r.tail_floor},
                             {"mean_floor", r.mean_floor},
                             {"samples", r.samples}});
    }
    j["tail_trend_ok"] = report.tail_trend_ok;
    j["mean_trend_ok"] = report.mean_trend_ok;
    j["pass"] = pass;
    return j.dump(2);
}

}  // namespace lob_lab
