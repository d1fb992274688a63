#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lob_lab {

/// Coefficient evaluated over a block of paths at time t: out[i] = f(t, x[i], w[i]),
/// where x is the process and w the driving Brownian motion.
using CoefficientKernel =
    std::function<void(double t, std::span<const double> x, std::span<const double> w, std::span<double> out)>;

/// dX = drift dt + diffusion dW, X_0 = W_0 = 0.
struct ItoProcessSpec {
    std::string name;
    CoefficientKernel drift_fn;
    CoefficientKernel diffusion_fn;
    double c = 1.0;  ///< diffusion lower bound
    double C = 1.0;  ///< diffusion upper bound
    double eps = 0.0;  ///< drift bound is sqrt(eps)
    int euler_steps = 1000;  ///< Euler steps over the simulated horizon

    void validate() const;

    /// Diffusion at (t=0, x=0, w=0).
    double initial_diffusion() const;

    static ItoProcessSpec brownian(double sigma = 1.0);
    /// drift sqrt(eps) sin(t X), diffusion 1 + 0.1 tanh(X) clipped to [0.9, 1.1].
    static ItoProcessSpec perturbed(double eps = 0.01);
    /// Constant drift alpha and diffusion sigma.
    static ItoProcessSpec constant(double alpha, double sigma);
    /// Drift alpha, diffusion 1 + 0.1 tanh(W).
    static ItoProcessSpec stochastic_vol(double alpha = 0.1);
};

class SpecificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TerminalSamples {
    std::vector<double> terminal;
    std::vector<double> running_max;  ///< sup over the Euler grid, X_0 included
};

/// Euler-Maruyama with euler_steps uniform steps on [0, horizon] (requires
/// euler_steps >= 100). Path i uses its own RNG stream, so results do
/// not depend on the thread count. Throws SpecificationError when a sampled
/// coefficient leaves its declared bounds.
TerminalSamples simulate_terminal(const ItoProcessSpec& spec, int paths, std::uint64_t seed, double horizon = 1.0);

struct TailEstimate {
    std::vector<std::pair<double, double>> grid;  ///< (x, z)
    std::vector<double> probabilities;
    std::vector<double> ci_lower;
    std::vector<double> ci_upper;
    std::vector<double> ci_halfwidths;
    std::vector<std::int64_t> n_conditioning;
    std::vector<bool> reliable;
};

inline constexpr std::int64_t kMinConditioningSamples = 200;

/// x in {0, 0.5, 1, 1.5, 2}, z in [0, 4] step 0.25.
std::vector<std::pair<double, double>> default_tail_grid();

/// P(X > x + z | X > x) with a 95% Wilson interval. z = 0 is exactly 1.
TailEstimate conditional_tail(std::span<const double> samples, const std::vector<std::pair<double, double>>& grid);

struct ExponentialBoundFit {
    double C1 = 0.0;
    bool finite = false;
    double argmax_x = 0.0;
    double argmax_z = 0.0;
};

/// C1 = max over reliable cells of upper CI bound times e^{c1 z}.
ExponentialBoundFit fit_exponential_bound(const TailEstimate& estimate, double c1);

struct ExponentialBoundCheck {
    double c1 = 1.0;
    ExponentialBoundFit first;
    ExponentialBoundFit second;
    double ratio = 0.0;  ///< larger C1 over smaller
    bool pass = false;
};

/// Fits both seeds' estimates and passes when both are finite and agree within a factor 2.
ExponentialBoundCheck exponential_bound_check(const TailEstimate& first, const TailEstimate& second, double c1);

struct SupInequalityRow {
    double x;
    double terminal_tail;  ///< P(X_1 > x)
    double sup_tail;       ///< P(sup X > x)
    bool holds;            ///< 2 P(X_1 > x) >= (1 - delta) P(sup X > x)
};

std::vector<SupInequalityRow> sup_inequality_check(const TerminalSamples& samples, const std::vector<double>& xs,
                                                   double delta = 0.1);

struct MeanGapRow {
    double dt = 0.0;
    std::vector<double> p_grid;         ///< absolute levels in [-5 sqrt(dt) C, 0]
    std::vector<double> gaps;           ///< (p - E[X_dt | X_dt < p]) / sqrt(dt)
    std::vector<double> ci_halfwidths;  ///< normalized
    std::vector<std::int64_t> n_conditioning;
    std::vector<bool> reliable;
    double sup_gap = 0.0;  ///< over reliable cells
};

struct MeanGapReport {
    std::vector<MeanGapRow> rows;
    double common_bound = 0.0;  ///< max of sup_gap over dt
    bool bounded = false;       ///< every dt has a finite sup over at least one reliable cell
};

MeanGapReport conditional_mean_gap(const ItoProcessSpec& spec, const std::vector<double>& dt_list, int paths,
                                   std::uint64_t seed, int p_points = 21);

struct ProximityRow {
    double dt = 0.0;
    double tail_gap = 0.0;        ///< sup_p (|p| v 1) |P(xi > p) - P(sigma0 eta > p)|
    double truncated_mean_gap = 0.0;  ///< sup_p |E[xi 1{xi > p}] - E[sigma0 eta 1{sigma0 eta > p}]|
    double truncated_mean_gap_at_6 = 0.0;
    double tail_floor = 0.0;  ///< 2 x DKW(95%) radius
    double mean_floor = 0.0;  ///< 4 sqrt(E[xi^2] / n)
    int samples = 0;
};

struct ProximityReport {
    double sigma0 = 1.0;
    std::vector<ProximityRow> rows;
    bool tail_trend_ok = true;
    bool mean_trend_ok = true;
};

/// xi = X_dt / sqrt(dt) against sigma0 eta with sigma0 the initial diffusion.
/// dt_list must be strictly decreasing. A metric passes the trend check when
/// each value is no larger than the previous one or sits below its noise floor.
ProximityReport gaussian_proximity(const ItoProcessSpec& spec, const std::vector<double>& dt_list, int paths,
                                   std::uint64_t seed);

std::string tails_report_json(const ItoProcessSpec& spec, const TailEstimate& estimate,
                              const ExponentialBoundCheck& check, const std::vector<SupInequalityRow>& sup_rows,
                              const MeanGapReport& gaps, bool pass);

std::string proximity_report_json(const ItoProcessSpec& spec, const ProximityReport& report, bool pass);

namespace detail {

// Fast-math kernels, see ito_models.cpp.
void euler_update(std::span<double> x, std::span<double> w, std::span<double> running_max, std::span<const double> mu,
                  std::span<const double> sigma, std::span<const double> z, double dt);
/// Every |mu| <= drift_cap and every sigma in [lo, hi]. Callers must reject
/// non-finite values separately since this file is compiled with fast-math.
bool within_bounds(std::span<const double> mu, std::span<const double> sigma, double drift_cap, double lo, double hi);
void perturbed_drift(double t, double scale, std::span<const double> x, std::span<double> out);
void perturbed_diffusion(std::span<const double> x, std::span<double> out);
void tanh_diffusion(std::span<const double> w, std::span<double> out);

}  // namespace detail

}  // namespace lob_lab
