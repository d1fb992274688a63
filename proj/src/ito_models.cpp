// Built with -ffast-math: nothing here may rely on NaN or infinity.

#include <algorithm>
#include <cmath>

#include "lob_lab/ito_tails.hpp"

namespace lob_lab::detail {

void euler_update(std::span<double> x, std::span<double> w, std::span<double> running_max, std::span<const double> mu,
                  std::span<const double> sigma, std::span<const double> z, double dt) {
    const double sq = std::sqrt(dt);
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double dw = sq * z[i];
        x[i] += mu[i] * dt + sigma[i] * dw;
        w[i] += dw;
        running_max[i] = std::max(running_max[i], x[i]);
    }
}

bool within_bounds(std::span<const double> mu, std::span<const double> sigma, double drift_cap, double lo, double hi) {
    double mu_max = 0.0;
    double sig_lo = hi;
    double sig_hi = lo;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        mu_max = std::max(mu_max, std::abs(mu[i]));
        sig_lo = std::min(sig_lo, sigma[i]);
        sig_hi = std::max(sig_hi, sigma[i]);
    }
    return mu_max <= drift_cap && sig_lo >= lo && sig_hi <= hi;
}

void perturbed_drift(double t, double scale, std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * std::sin(t * x[i]);
}

void perturbed_diffusion(std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(1.0 + 0.1 * std::tanh(x[i]), 0.9, 1.1);
}

void tanh_diffusion(std::span<const double> w, std::span<double> out) {
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = 1.0 + 0.1 * std::tanh(w[i]);
}

}  // namespace lob_lab::detail
