#include "lob_lab/gaussian_kernel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lob_lab {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)
constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

// Above this argument the ratio is taken from the continued fraction of the
// scaled complementary error function instead of erfc(.)/exp(.).
constexpr double kMillsSwitch = 6.0;

// Mills(p) = 1/(p + 1/(p + 2/(p + 3/(p + ...)))), modified Lentz.
double mills_continued_fraction(double p) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double f = tiny;
    double c = f;
    double d = 0.0;
    for (int j = 1; j < 1000; ++j) {
        const double a = j == 1 ? 1.0 : static_cast<double>(j - 1);
        d = p + a * d;
        if (d == 0.0) d = tiny;
        c = p + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return f;
}

}  // namespace

void GaussianIncrement::validate() const {
    if (!std::isfinite(mean) || !std::isfinite(std) || !(std > 0.0)) {
        throw std::invalid_argument("GaussianIncrement requires finite mean and std > 0 (got mean=" +
                                    std::to_string(mean) + ", std=" + std::to_string(std) + ")");
    }
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double std_normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double mills_ratio(double p) {
    if (std::isnan(p)) return p;
    if (p > kMillsSwitch) return mills_continued_fraction(p);
    const double pdf = std_normal_pdf(p);
    if (pdf == 0.0) return std::numeric_limits<double>::infinity();
    return std_normal_sf(p) / pdf;
}

double mills_inverse(double y) {
    if (!std::isfinite(y) || !(y > 0.0)) {
        throw std::domain_error("mills_inverse requires a finite positive argument, got " + std::to_string(y));
    }
    // Mills(p) < 1/p for p > 0 and Mills(p) > -p for p < 0.
    double lo;
    double hi;
    if (y < mills_ratio(0.0)) {
        lo = 0.0;
        hi = 1.0 / y;
    } else {
        lo = -std::min(y, 40.0);
        hi = 0.0;
    }

    auto scale = [](double p) { return std::max(1.0, std::abs(p)); };
    while (hi - lo > 1e-3 * scale(0.5 * (lo + hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mills_ratio(mid) > y) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish, Mills'(p) = p Mills(p) - 1 < 0, kept inside the bracket.
    double p = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double m = mills_ratio(p);
        if (m > y) {
            lo = p;
        } else {
            hi = p;
        }
        const double slope = p * m - 1.0;
        double next = p - (m - y) / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - p);
        p = next;
        if (step <= 1e-15 * scale(p) || hi - lo <= 1e-15 * scale(p)) break;
    }
    return p;
}

double sell_objective(double p, double x, const GaussianIncrement& inc) {
    const double d = (p - inc.mean) / inc.std;
    return (p - x - inc.mean) * std_normal_sf(d) - inc.std * std_normal_pdf(d);
}

double buy_objective(double p, double x, const GaussianIncrement& inc) {
    return sell_objective(-p, -x, GaussianIncrement{-inc.mean, inc.std});
}

MaximizerResult sell_objective_maximizer(double x, const GaussianIncrement& inc) {
    if (!(x < 0.0)) return NoFiniteMaximizer{0.0};
    const double depth = mills_inverse(-x / inc.std);
    const double price = inc.mean + inc.std * depth;
    return InteriorMaximizer{price, sell_objective(price, x, inc)};
}

MaximizerResult buy_objective_maximizer(double x, const GaussianIncrement& inc) {
    const auto mirrored = sell_objective_maximizer(-x, GaussianIncrement{-inc.mean, inc.std});
    if (const auto* r = std::get_if<InteriorMaximizer>(&mirrored)) {
        return InteriorMaximizer{-r->price, r->value};
    }
    return mirrored;
}

}  // namespace lob_lab
