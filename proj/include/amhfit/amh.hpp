#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "amhfit/logistic.hpp"

namespace amhfit {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// Parameters of the AMH bivariate logistic distribution: an association
// parameter omega in [-1, 1] and marginal locations mu, nu. The marginals
// are standard logistic shifted by mu and nu regardless of omega;
// omega = 0 gives independence, omega = 1 the Gumbel type 1 distribution.
struct AmhParams {
    double omega = 0.0;
    double mu = 0.0;
    double nu = 0.0;

    AmhParams() = default;
    explicit AmhParams(double omega_, double mu_ = 0.0, double nu_ = 0.0)
        : omega(omega_), mu(mu_), nu(nu_) {
        if (!(omega >= -1.0 && omega <= 1.0))
            throw std::invalid_argument("AmhParams: omega must lie in [-1, 1]");
        if (!std::isfinite(mu) || !std::isfinite(nu))
            throw std::invalid_argument("AmhParams: locations must be finite");
    }
};

namespace detail {

// log(1 + e^{-u} + e^{-v} + (1-omega) e^{-u-v}) via a max-shifted sum,
// so that arguments of magnitude several hundred cannot overflow.
// The last term drops out at omega == 1.
inline double log_amh_denom(double u, double v, double omega) {
    double t[4] = {0.0, -u, -v, -inf};
    int n = 3;
    if (omega < 1.0) t[n++] = std::log1p(-omega) - u - v;
    const double m = *std::max_element(t, t + n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(t[i] - m);
    return m + std::log(s);
}

} // namespace detail

// Joint cdf H(u - mu, v - nu) where
//   H(u, v) = 1 / (1 + e^{-u} + e^{-v} + (1-omega) e^{-u-v}).
// Accepts +-infinity; the marginals in each argument are standard logistic.
inline double amh_cdf(const AmhParams& p, double u, double v) {
    const double us = u - p.mu;
    const double vs = v - p.nu;
    if (us == -inf || vs == -inf) return 0.0;
    if (us == inf && vs == inf) return 1.0;
    if (us == inf) return logistic_cdf(vs);
    if (vs == inf) return logistic_cdf(us);
    return std::exp(-detail::log_amh_denom(us, vs, p.omega));
}

// Mixed partial d^2 H / du dv of the located cdf. The numerator
//   e^{-u-v} [ (1+w) + (1-w)(e^{-u} + e^{-v}) + (1-w)^2 e^{-u-v} ]
// has nonnegative terms for omega in [-1, 1], so it is evaluated as a
// max-shifted exponential sum on the log scale. Zero at infinite arguments.
inline double amh_density(const AmhParams& p, double u, double v) {
    const double us = u - p.mu;
    const double vs = v - p.nu;
    if (!std::isfinite(us) || !std::isfinite(vs)) return 0.0;
    const double w = p.omega;
    double t[4] = {};
    int n = 0;
    if (w > -1.0) t[n++] = std::log1p(w);
    if (w < 1.0) {
        const double lw = std::log1p(-w);
        t[n++] = lw - us;
        t[n++] = lw - vs;
        t[n++] = 2.0 * lw - us - vs;
    }
    const double m = *std::max_element(t, t + n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(t[i] - m);
    const double log_num = m + std::log(s);
    return std::exp(-(us + vs) + log_num - 3.0 * detail::log_amh_denom(us, vs, w));
}

// Smallest truncation order whose geometric tail bound
// |omega|^{N+1} / (1 - |omega|) falls below tol, capped at 10^6.
inline long amh_series_terms(double omega, double tol = 1e-12) {
    const double a = std::fabs(omega);
    if (a == 0.0) return 1;
    if (a >= 1.0) return 1000000L;
    const double n = std::ceil(std::log(tol * (1.0 - a)) / std::log(a));
    if (!(n > 1.0)) return 1;
    return std::min(1000000L, static_cast<long>(n));
}

// Truncated series form of the cdf,
//   F(u) G(v) sum_{n=0}^{n_terms} [omega (1-F(u)) (1-G(v))]^n,
// where n_terms is the highest retained power of omega. n_terms = 1 is the
// Gumbel type 2 cdf with the same omega. Requires |omega| < 1: at the
// endpoints the ratio reaches 1 on the diagonal and convergence fails.
inline double amh_cdf_series(const AmhParams& p, double u, double v, long n_terms) {
    if (std::fabs(p.omega) >= 1.0)
        throw std::domain_error("amh_cdf_series: requires |omega| < 1");
    if (n_terms < 1)
        throw std::invalid_argument("amh_cdf_series: n_terms must be >= 1");
    const double fu = logistic_cdf(u - p.mu);
    const double gv = logistic_cdf(v - p.nu);
    const double r = p.omega * logistic_sf(u - p.mu) * logistic_sf(v - p.nu);
    double sum = 1.0;
    double term = 1.0;
    for (long n = 1; n <= n_terms; ++n) {
        term *= r;
        if (term == 0.0) break;
        sum += term;
    }
    return fu * gv * sum;
}

// Conditional moment generating function E[e^{t Y*} | X* = x] for
// t in (-1, 1). Locations fold in: the conditional law of Y* given
// X* = x is the standard one at x - mu, shifted by nu.
inline double amh_conditional_mgf(const AmhParams& p, double t, double x) {
    if (!(t > -1.0 && t < 1.0))
        throw std::domain_error("amh_conditional_mgf: t must lie in (-1, 1)");
    const double th = x - p.mu;
    const double w = p.omega;
    // bracket (1+w) + (1-w) e^{-th} + (1-w)(1 + e^{-th})(1-t)/(1+t), log scale
    double b[3] = {};
    int n = 0;
    if (w > -1.0) b[n++] = std::log1p(w);
    if (w < 1.0) {
        const double lw = std::log1p(-w);
        b[n++] = lw - th;
        b[n++] = lw + softplus(-th) + std::log((1.0 - t) / (1.0 + t));
    }
    const double m = *std::max_element(b, b + n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(b[i] - m);
    const double log_bracket = m + std::log(s);

    const double log_mgf = std::lgamma(t + 2.0) + std::lgamma(1.0 - t) - std::log(2.0)
                           - t * softplus(-th)
                           - (1.0 - t) * softplus(std::log1p(-w) - th)
                           + log_bracket;
    return std::exp(log_mgf + t * p.nu);
}

// Conditional mean E[Y* | X* = x], the derivative at zero of the log
// conditional mgf:
//   1 + log[(1 + (1-w) e^{-th}) / (1 + e^{-th})]
//     - (1-w)(1 + e^{-th}) / (1 + (1-w) e^{-th}),   th = x - mu.
inline double amh_conditional_mean(const AmhParams& p, double x) {
    const double th = x - p.mu;
    const double w = p.omega;
    const double l1 = softplus(std::log1p(-w) - th);
    const double l2 = softplus(-th);
    return p.nu + 1.0 + (l1 - l2) - std::exp(std::log1p(-w) + l2 - l1);
}

// Cov(X*, Y*) = sum_{n>=1} omega^n / n^2, truncated at n_terms. The
// endpoints take their exact limits pi^2/6 and -pi^2/12 where the plain
// truncation converges too slowly to be useful.
inline double latent_covariance(double omega, long n_terms) {
    if (!(omega >= -1.0 && omega <= 1.0))
        throw std::invalid_argument("latent_covariance: omega must lie in [-1, 1]");
    if (n_terms < 1)
        throw std::invalid_argument("latent_covariance: n_terms must be >= 1");
    if (omega == 1.0) return pi * pi / 6.0;
    if (omega == -1.0) return -pi * pi / 12.0;
    double sum = 0.0;
    double pw = 1.0;
    for (long n = 1; n <= n_terms; ++n) {
        pw *= omega;
        if (pw == 0.0) break;
        sum += pw / (double(n) * double(n));
    }
    return sum;
}

// Truncation chosen so the tail bound |omega|^{N+1} / ((N+1)^2 (1-|omega|))
// is below tol.
inline double latent_covariance(double omega) {
    if (omega == 1.0 || omega == -1.0) return latent_covariance(omega, 1);
    return latent_covariance(omega, amh_series_terms(omega, 1e-15));
}

} // namespace amhfit
