#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "amhfit/amh.hpp"
#include "amhfit/fit.hpp"
#include "amhfit/thresholds.hpp"

namespace amhfit {

// Global (cumulative) odds ratio psi_k at ordinal level k: the odds ratio
// of the 2x2 table formed by collapsing Y at level k. Evaluated through
// the cancellation-free rearrangement
//   psi = (1 + w) + w^2 [ 1/(e^{s1} + 1-w) + F(s1 - log(1-w)) / (e^{s2} + 1-w) ]
// whose w -> 1 limit is the closed branch 2 + e^{-s1} + e^{-s2}.
// Arguments shift by both the params' locations and the explicit effects
// (s1 = theta - z1_effect - mu, s2 = tau_k - z2_effect - nu); pass effects
// through either route, they are interchangeable.
inline double odds_ratio(const Thresholds& th, const AmhParams& p, int k,
                         double z1_effect = 0.0, double z2_effect = 0.0) {
    if (k < 1 || k >= th.k_levels())
        throw std::domain_error("odds_ratio: level k outside {1..K-1}");
    const double s1 = th.theta - z1_effect - p.mu;
    const double s2 = th.tau[std::size_t(k) - 1] - z2_effect - p.nu;
    const double w = p.omega;
    if (w == 1.0) return 2.0 + std::exp(-s1) + std::exp(-s2);
    const double t1 = 1.0 / (std::exp(s1) + (1.0 - w));
    const double t2 = 1.0 / (std::exp(s2) + (1.0 - w));
    const double f1 = logistic_cdf(s1 - std::log1p(-w));
    return (1.0 + w) + w * w * (t1 + f1 * t2);
}

struct OddsRatioRange {
    double lower = 0.0;
    double upper = 0.0;
};

// Range of psi_k over omega in [-1, 1] at fixed thresholds and effects:
//   [ (1 - F(s1 - log 2) F(s2 - log 2)) / 2 ;  2 + e^{-s1} + e^{-s2} ].
inline OddsRatioRange odds_ratio_range(const Thresholds& th, int k, double z1_effect = 0.0,
                                       double z2_effect = 0.0) {
    if (k < 1 || k >= th.k_levels())
        throw std::domain_error("odds_ratio_range: level k outside {1..K-1}");
    const double s1 = th.theta - z1_effect;
    const double s2 = th.tau[std::size_t(k) - 1] - z2_effect;
    const double log2 = std::log(2.0);
    OddsRatioRange r;
    r.lower = (1.0 - logistic_cdf(s1 - log2) * logistic_cdf(s2 - log2)) / 2.0;
    r.upper = 2.0 + std::exp(-s1) + std::exp(-s2);
    return r;
}

struct LogOrApprox {
    double approx = 0.0;    // four-parameter-logistic approximation of log psi_k
    double exact = 0.0;     // log of the closed form, for checking the error
    double abs_error = 0.0;
};

// Approximation of log psi_k between the asymptotes log(1+w) and
// log(1/(1-w)); both the approximation and the exact value are returned
// since the error term is only asymptotic.
inline LogOrApprox log_odds_ratio_approx(const Thresholds& th, const AmhParams& p, int k,
                                         double z1_effect = 0.0, double z2_effect = 0.0) {
    const double w = p.omega;
    if (!(std::fabs(w) < 1.0))
        throw std::domain_error("log_odds_ratio_approx: requires |omega| < 1");
    if (k < 1 || k >= th.k_levels())
        throw std::domain_error("log_odds_ratio_approx: level k outside {1..K-1}");
    const double s1 = th.theta - z1_effect - p.mu;
    const double s2 = th.tau[std::size_t(k) - 1] - z2_effect - p.nu;
    const double lw = std::log1p(-w);
    const double hi = -lw;           // log(1/(1-w))
    const double lo = std::log1p(w); // log(1+w)
    LogOrApprox out;
    out.approx = (lo - hi) * logistic_cdf(s1 - lw) * logistic_cdf(s2 - lw) + hi;
    out.exact = std::log(odds_ratio(th, p, k, z1_effect, z2_effect));
    out.abs_error = std::fabs(out.approx - out.exact);
    return out;
}

// Pearson correlation of the two binary indicators in the K = 2 model:
//   rho = w / [ (e^{th/2} + e^{-th/2})(e^{ta/2} + e^{-ta/2}) - w e^{-(th+ta)/2} ].
inline double binary_correlation_amh(double theta, double tau, double omega) {
    const double denom = (std::exp(theta / 2.0) + std::exp(-theta / 2.0)) *
                             (std::exp(tau / 2.0) + std::exp(-tau / 2.0)) -
                         omega * std::exp(-(theta + tau) / 2.0);
    return omega / denom;
}

// The same correlation under Gumbel type 2 latent variables; lacks the
// subtracted term and is therefore closer to zero everywhere.
inline double binary_correlation_type2(double theta, double tau, double omega) {
    return omega / ((std::exp(theta / 2.0) + std::exp(-theta / 2.0)) *
                    (std::exp(tau / 2.0) + std::exp(-tau / 2.0)));
}

struct CorrelationBounds {
    double lower = -1.0;
    double upper = 1.0;
};

// Sharp correlation bounds for a bivariate Bernoulli with success
// probabilities pi1, pi2, implied by the Frechet-Hoeffding bounds on the
// joint success probability.
inline CorrelationBounds frechet_correlation_bounds(double pi1, double pi2) {
    if (!(pi1 > 0.0 && pi1 < 1.0 && pi2 > 0.0 && pi2 < 1.0))
        throw std::domain_error("frechet_correlation_bounds: probabilities must be interior");
    const double q1 = 1.0 - pi1, q2 = 1.0 - pi2;
    CorrelationBounds b;
    b.lower = std::max(-std::sqrt(pi1 * pi2 / (q1 * q2)), -std::sqrt(q1 * q2 / (pi1 * pi2)));
    b.upper = std::min(std::sqrt(pi1 * q2 / (q1 * pi2)), std::sqrt(q1 * pi2 / (pi1 * q2)));
    return b;
}

struct IntervalEstimate {
    double value = 0.0;
    double se = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool ok = true;
};

// Latent cross moment E[X* Y*] estimated by the truncated series
// sum_{n=1}^{n_terms} omega^n / n^2 at the fitted association, with a
// delta-method interval propagated through the atanh parametrisation.
// Requires an intercept-only association model.
inline IntervalEstimate latent_cross_moment(const FitResult& fit, int n_terms = 10) {
    if (fit.shape.n_zeta != 1)
        throw std::invalid_argument(
            "latent_cross_moment: requires an intercept-only association model");
    const int zi = fit.shape.zeta_offset();
    const DeltaResult d = delta_method(fit, [zi, n_terms](const Eigen::VectorXd& x) {
        return latent_covariance(std::tanh(x[zi]), n_terms);
    });
    return IntervalEstimate{d.value, d.se, d.lo, d.hi, d.ok};
}

// Odds ratios of the collapsed 2x2 count tables, one per split level; no
// continuity correction.
inline std::vector<double> observed_odds_ratios(const CellTable& counts) {
    std::vector<double> out;
    for (int k = 1; k < counts.k_levels; ++k) {
        double above1 = 0.0, below1 = 0.0, above0 = 0.0, below0 = 0.0;
        for (int y = 1; y <= counts.k_levels; ++y) {
            (y > k ? above0 : below0) += counts.at(0, y);
            (y > k ? above1 : below1) += counts.at(1, y);
        }
        out.push_back((above1 / below1) / (above0 / below0));
    }
    return out;
}

} // namespace amhfit
