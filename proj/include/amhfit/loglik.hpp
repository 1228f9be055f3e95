#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "amhfit/data.hpp"
#include "amhfit/params.hpp"
#include "amhfit/thresholds.hpp"

namespace amhfit {

namespace detail {

// Adjacent-threshold cell probabilities can cancel to zero under extreme
// linear predictors; cells are floored here before the log so the
// likelihood stays finite (a large negative value, never NaN).
inline constexpr double cell_floor = 1e-300;

// One observed cell, standardized arguments:
//   s   = theta - mu
//   tk  = tau_k     - nu  (+inf when k == K)
//   tk1 = tau_{k-1} - nu  (-inf when k == 1)
// Emits log p and, when asked, the partials of log p with respect to
// s, tk, tk1 and omega. Partials with respect to tk and tau_k coincide;
// d/dnu = -(d_tk + d_tk1) and d/dmu = -d_s at the call site.
struct CellEval {
    double logp = 0.0;
    double d_s = 0.0;
    double d_tk = 0.0;
    double d_tk1 = 0.0;
    double d_omega = 0.0;
};

inline CellEval cell_logp(double s, double tk, double tk1, double omega, int x,
                          bool need_grad) {
    const bool top = (tk == inf);
    const bool bottom = (tk1 == -inf);

    // cdf pieces A_k = P(X=0, Y<=k) and their derivatives
    double ak, ak_s = 0.0, ak_t = 0.0, ak_w = 0.0;
    double ak1, ak1_s = 0.0, ak1_t = 0.0, ak1_w = 0.0;
    if (top) {
        ak = logistic_cdf(s);
        if (need_grad) ak_s = logistic_pdf(s);
    } else {
        const double ld = log_amh_denom(s, tk, omega);
        ak = std::exp(-ld);
        if (need_grad) {
            const double lw = std::log1p(-omega);
            ak_s = std::exp(-s + softplus(lw - tk) - 2.0 * ld);
            ak_t = std::exp(-tk + softplus(lw - s) - 2.0 * ld);
            ak_w = std::exp(-s - tk - 2.0 * ld);
        }
    }
    if (bottom) {
        ak1 = 0.0;
    } else {
        const double ld = log_amh_denom(s, tk1, omega);
        ak1 = std::exp(-ld);
        if (need_grad) {
            const double lw = std::log1p(-omega);
            ak1_s = std::exp(-s + softplus(lw - tk1) - 2.0 * ld);
            ak1_t = std::exp(-tk1 + softplus(lw - s) - 2.0 * ld);
            ak1_w = std::exp(-s - tk1 - 2.0 * ld);
        }
    }

    CellEval out;
    double prob, p_s, p_tk, p_tk1, p_w;
    if (x == 0) {
        prob = ak - ak1;
        p_s = ak_s - ak1_s;
        p_tk = ak_t;
        p_tk1 = -ak1_t;
        p_w = ak_w - ak1_w;
    } else {
        const double bk = top ? 1.0 : logistic_cdf(tk);
        const double bk1 = bottom ? 0.0 : logistic_cdf(tk1);
        prob = (bk - bk1) - (ak - ak1);
        p_s = -(ak_s - ak1_s);
        p_tk = (top ? 0.0 : logistic_pdf(tk)) - ak_t;
        p_tk1 = -((bottom ? 0.0 : logistic_pdf(tk1)) - ak1_t);
        p_w = -(ak_w - ak1_w);
    }
    const double pf = std::max(prob, cell_floor);
    out.logp = std::log(pf);
    // a floored cell contributes a constant, so its true slope is zero
    if (need_grad && prob > cell_floor) {
        out.d_s = p_s / pf;
        out.d_tk = p_tk / pf;
        out.d_tk1 = p_tk1 / pf;
        out.d_omega = p_w / pf;
    }
    return out;
}

// Row-level evaluation at explicit extra location shifts (ax, ay), shared
// by the fixed-effects likelihood (shifts zero) and the conditional
// likelihood of the mixed model. grad_natural, when non-null, is
// accumulated over the (theta, tau, beta_x, beta_y, zeta[, l]) layout;
// d_ax/d_ay receive the partials with respect to the shifts.
inline double row_loglik(const ParamVector& p, const ParamShape& shape, const DataRow& r,
                         double ax, double ay, Eigen::VectorXd* grad_natural,
                         double* d_ax = nullptr, double* d_ay = nullptr) {
    double mu = ax, nu = ay, eta = 0.0;
    for (std::size_t j = 0; j < r.z1.size(); ++j) mu += r.z1[j] * p.beta_x[j];
    for (std::size_t j = 0; j < r.z2.size(); ++j) nu += r.z2[j] * p.beta_y[j];
    for (std::size_t j = 0; j < r.zw.size(); ++j) eta += r.zw[j] * p.zeta[j];
    const double omega = std::tanh(eta);

    const int K = p.k_levels();
    const double s = p.theta - mu;
    const double tk = (r.y == K) ? inf : p.tau[std::size_t(r.y) - 1] - nu;
    const double tk1 = (r.y == 1) ? -inf : p.tau[std::size_t(r.y) - 2] - nu;

    const CellEval c = cell_logp(s, tk, tk1, omega, r.x, grad_natural != nullptr || d_ax != nullptr);
    if (grad_natural) {
        Eigen::VectorXd& g = *grad_natural;
        const double w = r.weight;
        g[0] += w * c.d_s;
        if (r.y < K) g[shape.tau_offset() + r.y - 1] += w * c.d_tk;
        if (r.y > 1) g[shape.tau_offset() + r.y - 2] += w * c.d_tk1;
        const double d_nu = -(c.d_tk + c.d_tk1);
        for (std::size_t j = 0; j < r.z1.size(); ++j)
            g[shape.beta_x_offset() + int(j)] += w * (-c.d_s) * r.z1[j];
        for (std::size_t j = 0; j < r.z2.size(); ++j)
            g[shape.beta_y_offset() + int(j)] += w * d_nu * r.z2[j];
        const double d_eta = c.d_omega * (1.0 - omega * omega);
        for (std::size_t j = 0; j < r.zw.size(); ++j)
            g[shape.zeta_offset() + int(j)] += w * d_eta * r.zw[j];
    }
    if (d_ax) *d_ax = -c.d_s;
    if (d_ay) *d_ay = -(c.d_tk + c.d_tk1);
    return r.weight * c.logp;
}

} // namespace detail

// Weighted log-likelihood of the fixed-effects model. Locations and the
// association vary by row through the design columns:
//   mu_i = z1_i . beta_x,  nu_i = z2_i . beta_y,  omega_i = tanh(zw_i . zeta).
// Rows are reduced in their stored order, so the value is reproducible.
inline double loglik(const ParamVector& p, const Dataset& data) {
    double ll = 0.0;
    const ParamShape shape = ParamShape::of(p);
    for (const DataRow& r : data.rows)
        ll += detail::row_loglik(p, shape, r, 0.0, 0.0, nullptr);
    return ll;
}

// Log-likelihood together with its gradient on the natural scale
// (theta, tau, beta_x, beta_y, zeta). grad is resized and overwritten.
inline double loglik_grad(const ParamVector& p, const Dataset& data, Eigen::VectorXd& grad) {
    const ParamShape shape = ParamShape::of(p);
    grad = Eigen::VectorXd::Zero(shape.size());
    double ll = 0.0;
    for (const DataRow& r : data.rows)
        ll += detail::row_loglik(p, shape, r, 0.0, 0.0, &grad);
    return ll;
}

} // namespace amhfit
