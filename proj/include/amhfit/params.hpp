#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amhfit/data.hpp"

namespace amhfit {

// Full parameter state on the natural scale: thresholds, location
// coefficients, association coefficients on the atanh scale and, for
// mixed models, the Cholesky factors (l1, l2, l12) of the random-intercept
// covariance D = L L^T.
struct ParamVector {
    double theta = 0.0;
    std::vector<double> tau;    // strictly increasing, size K-1
    std::vector<double> beta_x; // per z1 column
    std::vector<double> beta_y; // per z2 column
    std::vector<double> zeta;   // per zw column; omega = tanh(zw . zeta)
    bool has_random = false;
    double l1 = 0.0, l2 = 0.0, l12 = 0.0;

    int k_levels() const { return int(tau.size()) + 1; }

    void validate() const {
        if (tau.empty()) throw std::invalid_argument("ParamVector: need at least one tau");
        for (std::size_t i = 1; i < tau.size(); ++i)
            if (!(tau[i] > tau[i - 1]))
                throw std::invalid_argument("ParamVector: tau must be strictly increasing");
        for (double z : zeta)
            if (!std::isfinite(z)) throw std::invalid_argument("ParamVector: zeta must be finite");
        if (has_random && (!(l1 > 0.0) || !(l2 > 0.0)))
            throw std::invalid_argument("ParamVector: l1, l2 must be positive");
    }
};

// Block layout of the free (unconstrained) parametrisation:
//   [ theta | t_1..t_{K-1} | beta_x | beta_y | zeta | log l1, log l2, l12 ]
// with tau_1 = t_1 and tau_k = tau_{k-1} + exp(t_k) for k >= 2, so ordered
// thresholds are a smooth bijection of R^{K-1}.
struct ParamShape {
    int n_tau = 1;
    int n_beta_x = 0;
    int n_beta_y = 0;
    int n_zeta = 1;
    bool has_random = false;

    int size() const { return 1 + n_tau + n_beta_x + n_beta_y + n_zeta + (has_random ? 3 : 0); }
    int tau_offset() const { return 1; }
    int beta_x_offset() const { return 1 + n_tau; }
    int beta_y_offset() const { return beta_x_offset() + n_beta_x; }
    int zeta_offset() const { return beta_y_offset() + n_beta_y; }
    int random_offset() const { return zeta_offset() + n_zeta; }

    static ParamShape of(const ParamVector& p) {
        return ParamShape{int(p.tau.size()), int(p.beta_x.size()), int(p.beta_y.size()),
                          int(p.zeta.size()), p.has_random};
    }
    static ParamShape for_data(const Dataset& d, bool random_effects) {
        return ParamShape{d.k_levels - 1, d.z1_width, d.z2_width, d.zw_width, random_effects};
    }
};

inline Eigen::VectorXd to_free(const ParamVector& p) {
    p.validate();
    const ParamShape s = ParamShape::of(p);
    Eigen::VectorXd x(s.size());
    x[0] = p.theta;
    x[s.tau_offset()] = p.tau[0];
    for (int k = 1; k < s.n_tau; ++k)
        x[s.tau_offset() + k] = std::log(p.tau[std::size_t(k)] - p.tau[std::size_t(k) - 1]);
    for (int j = 0; j < s.n_beta_x; ++j) x[s.beta_x_offset() + j] = p.beta_x[std::size_t(j)];
    for (int j = 0; j < s.n_beta_y; ++j) x[s.beta_y_offset() + j] = p.beta_y[std::size_t(j)];
    for (int j = 0; j < s.n_zeta; ++j) x[s.zeta_offset() + j] = p.zeta[std::size_t(j)];
    if (s.has_random) {
        x[s.random_offset() + 0] = std::log(p.l1);
        x[s.random_offset() + 1] = std::log(p.l2);
        x[s.random_offset() + 2] = p.l12;
    }
    return x;
}

inline ParamVector from_free(const ParamShape& s, const Eigen::VectorXd& x) {
    if (x.size() != s.size()) throw std::invalid_argument("from_free: size mismatch");
    ParamVector p;
    p.theta = x[0];
    p.tau.resize(std::size_t(s.n_tau));
    p.tau[0] = x[s.tau_offset()];
    for (int k = 1; k < s.n_tau; ++k)
        p.tau[std::size_t(k)] = p.tau[std::size_t(k) - 1] + std::exp(x[s.tau_offset() + k]);
    p.beta_x.resize(std::size_t(s.n_beta_x));
    p.beta_y.resize(std::size_t(s.n_beta_y));
    p.zeta.resize(std::size_t(s.n_zeta));
    for (int j = 0; j < s.n_beta_x; ++j) p.beta_x[std::size_t(j)] = x[s.beta_x_offset() + j];
    for (int j = 0; j < s.n_beta_y; ++j) p.beta_y[std::size_t(j)] = x[s.beta_y_offset() + j];
    for (int j = 0; j < s.n_zeta; ++j) p.zeta[std::size_t(j)] = x[s.zeta_offset() + j];
    p.has_random = s.has_random;
    if (s.has_random) {
        p.l1 = std::exp(x[s.random_offset() + 0]);
        p.l2 = std::exp(x[s.random_offset() + 1]);
        p.l12 = x[s.random_offset() + 2];
    }
    return p;
}

// Maps a gradient with respect to the natural parameters
// (theta, tau, beta, zeta, l1, l2, l12) into the free parametrisation.
inline Eigen::VectorXd grad_to_free(const ParamShape& s, const Eigen::VectorXd& free,
                                    const Eigen::VectorXd& grad_natural) {
    Eigen::VectorXd g = grad_natural;
    const int t0 = s.tau_offset();
    // dl/dt_1 = sum_k dl/dtau_k;  dl/dt_j = exp(t_j) sum_{k>=j} dl/dtau_k
    double suffix = 0.0;
    for (int k = s.n_tau - 1; k >= 1; --k) {
        suffix += grad_natural[t0 + k];
        g[t0 + k] = std::exp(free[t0 + k]) * suffix;
    }
    g[t0] = suffix + grad_natural[t0];
    if (s.has_random) {
        const int r0 = s.random_offset();
        g[r0 + 0] = grad_natural[r0 + 0] * std::exp(free[r0 + 0]);
        g[r0 + 1] = grad_natural[r0 + 1] * std::exp(free[r0 + 1]);
    }
    return g;
}

// Jacobian d(natural)/d(free) at a free point; used to push the free-scale
// covariance onto the reporting scale.
inline Eigen::MatrixXd report_jacobian(const ParamShape& s, const Eigen::VectorXd& free) {
    const int n = s.size();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
    const int t0 = s.tau_offset();
    for (int k = 0; k < s.n_tau; ++k) {
        jac(t0 + k, t0) = 1.0;
        for (int j = 1; j <= k; ++j) jac(t0 + k, t0 + j) = std::exp(free[t0 + j]);
    }
    if (s.has_random) {
        const int r0 = s.random_offset();
        jac(r0 + 0, r0 + 0) = std::exp(free[r0 + 0]);
        jac(r0 + 1, r0 + 1) = std::exp(free[r0 + 1]);
    }
    return jac;
}

// Labels for the free/natural parameter blocks, used by reports and errors.
inline std::vector<std::string> parameter_names(const ParamShape& s, const Dataset& data) {
    std::vector<std::string> names;
    names.push_back("theta");
    for (int k = 1; k <= s.n_tau; ++k) names.push_back("tau" + std::to_string(k));
    auto label = [](const std::vector<std::string>& given, int j, const char* stem) {
        return j < int(given.size()) ? given[std::size_t(j)] : std::string(stem) + std::to_string(j + 1);
    };
    for (int j = 0; j < s.n_beta_x; ++j)
        names.push_back("beta_x[" + label(data.z1_names, j, "z1_") + "]");
    for (int j = 0; j < s.n_beta_y; ++j)
        names.push_back("beta_y[" + label(data.z2_names, j, "z2_") + "]");
    for (int j = 0; j < s.n_zeta; ++j)
        names.push_back("zeta[" + label(data.zw_names, j, "zw_") + "]");
    if (s.has_random) {
        names.push_back("l1");
        names.push_back("l2");
        names.push_back("l12");
    }
    return names;
}

} // namespace amhfit
