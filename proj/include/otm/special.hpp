#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

namespace otm {

/// Standard Gaussian CDF. Evaluated as erfc(-x/sqrt 2)/2, which keeps full
/// relative accuracy in the lower tail; glibc's erfc is accurate to about one
/// ulp, so the absolute error is below 1e-15 everywhere.
inline double normal_cdf(double x) noexcept
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// N(0, variance) probability of the interval [-half_width, half_width].
inline double centered_normal_mass(double half_width, double variance)
{
    if (!(variance > 0.0)) throw std::invalid_argument("variance must be positive");
    return std::erf(half_width / std::sqrt(2.0 * variance));
}

/// log C(n, k); -inf when k is outside [0, n].
inline double log_choose(int n, int k) noexcept
{
    if (k < 0 || n < 0 || k > n) return -std::numeric_limits<double>::infinity();
    if (k == 0 || k == n) return 0.0;
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// k*log(p) with the 0*log(0) = 0 convention.
inline double xlogy(double k, double p) noexcept
{
    if (k == 0.0) return 0.0;
    return k * std::log(p);
}

inline double log_sum_exp(std::span<const double> terms) noexcept
{
    if (terms.empty()) return -std::numeric_limits<double>::infinity();
    const double peak = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - peak);
    return peak + std::log(acc);
}

}  // namespace otm
