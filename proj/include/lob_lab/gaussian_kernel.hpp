#pragma once

#include <variant>

namespace lob_lab {

/// Law of one fundamental-price increment, N(mean, std^2), in price units.
struct GaussianIncrement {
    double mean = 0.0;
    double std = 1.0;

    /// Throws std::invalid_argument unless std > 0 and both fields are finite.
    void validate() const;
};

/// Standard normal density.
double std_normal_pdf(double x);

/// Standard normal distribution function, evaluated through erfc so that the
/// lower tail keeps full relative accuracy.
double std_normal_cdf(double x);

/// Upper tail 1 - F(x) with full relative accuracy for large x.
double std_normal_sf(double x);

/// Mills ratio (1 - F(p)) / f(p). Strictly decreasing, positive; +inf once the
/// ratio overflows (p below about -37.5).
double mills_ratio(double p);

/// Unique p with mills_ratio(p) == y. Throws std::domain_error for y <= 0 or
/// non-finite y.
double mills_inverse(double y);

/// E[(p - x - xi) 1{xi > p}] for xi ~ inc: relative profit of a limit sell at
/// p against a continuation value x. Closed form, no quadrature.
double sell_objective(double p, double x, const GaussianIncrement& inc);

/// E[(x - p + xi) 1{xi < p}]: the buy-side mirror,
/// buy_objective(p, x, (m, s)) == sell_objective(-p, -x, (-m, s)).
double buy_objective(double p, double x, const GaussianIncrement& inc);

struct InteriorMaximizer {
    double price;
    double value;
};

/// The objective is negative for every finite price and tends to `supremum`
/// (always 0) only as the price runs off to infinity.
struct NoFiniteMaximizer {
    double supremum = 0.0;
};

using MaximizerResult = std::variant<InteriorMaximizer, NoFiniteMaximizer>;

/// Maximizes sell_objective(., x, inc).
///
/// The first-order condition of the closed form reads Mills((p - m)/s) = -x/s,
/// so a finite maximizer exists iff x < 0; for x >= 0 the objective is
/// negative everywhere and only its supremum 0 is reported.
MaximizerResult sell_objective_maximizer(double x, const GaussianIncrement& inc);

/// Maximizes buy_objective(., x, inc); finite iff x > 0.
MaximizerResult buy_objective_maximizer(double x, const GaussianIncrement& inc);

inline bool has_interior(const MaximizerResult& r) {
    return std::holds_alternative<InteriorMaximizer>(r);
}

}  // namespace lob_lab
