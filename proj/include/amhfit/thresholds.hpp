#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "amhfit/amh.hpp"

namespace amhfit {

// Threshold rule linking the latent pair to observed (X, Y):
//   X = 1{X* > theta},   Y = k  iff  tau_{k-1} < Y* <= tau_k,
// with sentinels tau_0 = -inf and tau_K = +inf.
struct Thresholds {
    double theta = 0.0;
    std::vector<double> tau; // strictly increasing, size K-1

    Thresholds() = default;
    Thresholds(double theta_, std::vector<double> tau_)
        : theta(theta_), tau(std::move(tau_)) {
        if (!std::isfinite(theta))
            throw std::invalid_argument("Thresholds: theta must be finite");
        if (tau.empty())
            throw std::invalid_argument("Thresholds: need K >= 2, i.e. at least one tau");
        for (std::size_t i = 0; i < tau.size(); ++i) {
            if (!std::isfinite(tau[i]))
                throw std::invalid_argument("Thresholds: tau must be finite");
            if (i > 0 && !(tau[i] > tau[i - 1]))
                throw std::invalid_argument("Thresholds: tau must be strictly increasing");
        }
    }

    int k_levels() const { return int(tau.size()) + 1; }

    // tau_k with the sentinel extension, valid for k in [0, K].
    double tau_at(int k) const {
        if (k <= 0) return -inf;
        if (k >= k_levels()) return inf;
        return tau[std::size_t(k) - 1];
    }
};

// 2 x K table of cell counts or probabilities; rows are x = 0, 1 and
// columns the ordinal levels 1..K.
struct CellTable {
    enum class Role { counts, probabilities };

    int k_levels = 0;
    Role role = Role::counts;
    std::vector<double> values; // row-major, 2 * K

    static CellTable make(int k, Role role, std::vector<double> vals) {
        if (k < 2) throw std::invalid_argument("CellTable: K must be >= 2");
        if (vals.size() != std::size_t(2 * k))
            throw std::invalid_argument("CellTable: expected 2*K values");
        double total = 0.0;
        for (double v : vals) {
            if (!(v >= 0.0)) throw std::invalid_argument("CellTable: entries must be >= 0");
            total += v;
        }
        if (role == Role::probabilities && std::fabs(total - 1.0) > 1e-12)
            throw std::invalid_argument("CellTable: probabilities must sum to 1");
        return CellTable{k, role, std::move(vals)};
    }

    double at(int x, int y) const { return values[std::size_t(x) * k_levels + y - 1]; }
    double& at(int x, int y) { return values[std::size_t(x) * k_levels + y - 1]; }

    double total() const {
        double t = 0.0;
        for (double v : values) t += v;
        return t;
    }
};

// P(X = x, Y = y) of the discretised model: cells are differences of the
// joint cdf at adjacent thresholds,
//   P(X=0, Y<=k) = H(theta, tau_k),  P(Y<=k) = F(tau_k - nu).
// Tiny negative differences from cancellation are clamped to zero.
inline double pmf(const Thresholds& th, const AmhParams& p, int x, int y) {
    if (x != 0 && x != 1) throw std::domain_error("pmf: x must be 0 or 1");
    if (y < 1 || y > th.k_levels())
        throw std::domain_error("pmf: y outside {1..K}");
    const double hk = amh_cdf(p, th.theta, th.tau_at(y));
    const double hk1 = amh_cdf(p, th.theta, th.tau_at(y - 1));
    if (x == 0) return std::max(hk - hk1, 0.0);
    const double fk = logistic_cdf(th.tau_at(y) - p.nu);
    const double fk1 = logistic_cdf(th.tau_at(y - 1) - p.nu);
    return std::max((fk - hk) - (fk1 - hk1), 0.0);
}

inline CellTable cell_probabilities(const Thresholds& th, const AmhParams& p) {
    const int k = th.k_levels();
    std::vector<double> vals(std::size_t(2 * k));
    for (int x = 0; x <= 1; ++x)
        for (int y = 1; y <= k; ++y)
            vals[std::size_t(x) * k + y - 1] = pmf(th, p, x, y);
    return CellTable::make(k, CellTable::Role::probabilities, std::move(vals));
}

struct ObservedMoments {
    double mean_x, var_x, mean_y, var_y, cov_xy;
};

// First and second moments of (X, Y). The Bernoulli part uses the closed
// forms E[X] = e^{-(theta-mu)} / (1 + e^{-(theta-mu)}) and p(1-p); the
// ordinal part and the covariance are summed directly from the pmf.
inline ObservedMoments observed_moments(const Thresholds& th, const AmhParams& p) {
    const double px1 = logistic_sf(th.theta - p.mu);
    ObservedMoments m{};
    m.mean_x = px1;
    m.var_x = px1 * (1.0 - px1);
    double ey = 0.0, ey2 = 0.0, exy = 0.0;
    for (int y = 1; y <= th.k_levels(); ++y) {
        const double p1 = pmf(th, p, 1, y);
        const double py = pmf(th, p, 0, y) + p1;
        ey += y * py;
        ey2 += double(y) * y * py;
        exy += y * p1;
    }
    m.mean_y = ey;
    m.var_y = ey2 - ey * ey;
    m.cov_xy = exy - px1 * ey;
    return m;
}

// Pearson chi-square sum (O - E)^2 / E over the 2 x K table.
inline double goodness_of_fit(const CellTable& observed, const CellTable& expected) {
    if (observed.k_levels != expected.k_levels)
        throw std::invalid_argument("goodness_of_fit: table shapes differ");
    double chi2 = 0.0;
    for (std::size_t i = 0; i < observed.values.size(); ++i) {
        const double e = expected.values[i];
        if (!(e > 0.0))
            throw std::invalid_argument("goodness_of_fit: expected cells must be positive");
        const double d = observed.values[i] - e;
        chi2 += d * d / e;
    }
    return chi2;
}

} // namespace amhfit
