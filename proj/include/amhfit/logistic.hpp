#pragma once

#include <cmath>

namespace amhfit {

inline constexpr double pi = 3.141592653589793238462643383279502884;

// Standard logistic distribution helpers. Every function accepts the
// extended reals and returns the appropriate limit at +-infinity.

// F(u) = 1 / (1 + e^{-u})
inline double logistic_cdf(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

// P(U > u) = F(-u), exact for u >> 0 where 1 - F(u) would cancel.
inline double logistic_sf(double u) { return logistic_cdf(-u); }

// f(u) = e^{-u} / (1 + e^{-u})^2
inline double logistic_pdf(double u) {
    const double a = std::exp(-std::fabs(u));
    const double s = 1.0 + a;
    return a / (s * s);
}

// log F(u), safe for u << 0.
inline double logistic_logcdf(double u) {
    return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u));
}

inline double logistic_quantile(double p) { return std::log(p) - std::log1p(-p); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(1 + e^{x}) without overflow.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

} // namespace amhfit
