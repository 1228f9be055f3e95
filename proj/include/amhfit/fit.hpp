#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amhfit/data.hpp"
#include "amhfit/loglik.hpp"
#include "amhfit/optimize.hpp"
#include "amhfit/params.hpp"

namespace amhfit {

struct FitResult {
    ParamVector estimates;
    ParamShape shape;
    Eigen::VectorXd free;  // estimates in the free parametrisation
    Eigen::MatrixXd vcov;  // inverse observed information, free scale
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
    bool info_singular = false;
    bool boundary = false; // mixed fits: a variance component collapsed
    std::string message;
    std::vector<std::string> names; // per free/natural coordinate

    // Covariance on the reporting scale (theta, tau, beta, zeta[, l1, l2, l12]).
    Eigen::MatrixXd report_vcov() const {
        const Eigen::MatrixXd jac = report_jacobian(shape, free);
        return jac * vcov * jac.transpose();
    }
};

namespace detail {

// Observed information as the symmetrised central finite difference of the
// supplied gradient, steps h_j = cbrt(eps) (1 + |x_j|).
inline Eigen::MatrixXd observed_information(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_fn,
    const Eigen::VectorXd& x) {
    const int n = int(x.size());
    const double ch = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd info(n, n);
    Eigen::VectorXd xp = x;
    for (int j = 0; j < n; ++j) {
        const double h = ch * (1.0 + std::fabs(x[j]));
        const double xj = x[j];
        xp[j] = xj + h;
        const Eigen::VectorXd gp = grad_fn(xp);
        xp[j] = xj - h;
        const Eigen::VectorXd gm = grad_fn(xp);
        xp[j] = xj;
        info.col(j) = (gp - gm) / (2.0 * h);
    }
    return 0.5 * (info + info.transpose());
}

inline void invert_information(const Eigen::MatrixXd& info, FitResult& out) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(info.rows(), info.cols());
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        out.vcov = ldlt.solve(identity);
        return;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
    if (lu.isInvertible()) {
        out.vcov = lu.solve(identity);
        for (int i = 0; i < out.vcov.rows(); ++i)
            if (!(out.vcov(i, i) > 0.0)) {
                out.message += (out.message.empty() ? "" : "; ");
                out.message += "observed information is not positive definite";
                break;
            }
        return;
    }
    out.info_singular = true;
    out.message += (out.message.empty() ? "" : "; ");
    out.message += "observed information is singular";
    out.vcov = Eigen::MatrixXd::Constant(info.rows(), info.cols(),
                                         std::numeric_limits<double>::quiet_NaN());
}

inline void check_levels_observed(const Dataset& data) {
    std::vector<double> level_weight(std::size_t(data.k_levels), 0.0);
    for (const DataRow& r : data.rows) level_weight[std::size_t(r.y) - 1] += r.weight;
    for (int k = 0; k < data.k_levels; ++k)
        if (!(level_weight[std::size_t(k)] > 0.0))
            throw std::invalid_argument(
                "fit: y level " + std::to_string(k + 1) +
                " carries no observations; merge levels or lower k_levels");
}

// Objective over a subset of coordinates, the rest pinned at fixed values.
inline Objective restrict_objective(const Objective& full, const Eigen::VectorXd& fixed,
                                    const std::vector<int>& free_idx) {
    return [full, fixed, free_idx](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        Eigen::VectorXd xf = fixed;
        for (std::size_t i = 0; i < free_idx.size(); ++i) xf[free_idx[i]] = x[int(i)];
        if (!grad) return full(xf, nullptr);
        Eigen::VectorXd gf;
        const double v = full(xf, &gf);
        grad->resize(int(free_idx.size()));
        for (std::size_t i = 0; i < free_idx.size(); ++i) (*grad)[int(i)] = gf[free_idx[i]];
        return v;
    };
}

} // namespace detail

// Negative log-likelihood over the free parametrisation, with gradient.
// The dataset is captured by reference and must outlive the objective.
inline Objective make_objective(const Dataset& data, const ParamShape& shape) {
    return [&data, shape](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const ParamVector p = from_free(shape, x);
        if (!grad) return -loglik(p, data);
        Eigen::VectorXd gn;
        const double ll = loglik_grad(p, data, gn);
        *grad = -grad_to_free(shape, x, gn);
        return -ll;
    };
}

// Starting values from the marginal regressions: closed-form intercepts
// from the weighted margins; when covariates are present the marginal
// coefficients are the maximisers of the omega = 0 likelihood (the joint
// log-likelihood factorises there), found with zeta pinned at zero. The
// association always starts at zero. Falls back to the moment-based
// intercepts if the marginal optimisation fails.
inline ParamVector starting_values(const Dataset& data, const ModelSpec&) {
    data.validate();
    detail::check_levels_observed(data);
    const double n = data.total_weight();
    double wx1 = 0.0;
    std::vector<double> wy(std::size_t(data.k_levels), 0.0);
    for (const DataRow& r : data.rows) {
        wx1 += r.weight * r.x;
        wy[std::size_t(r.y) - 1] += r.weight;
    }
    const double eps = 0.5 / n;
    auto clamp01 = [eps](double p) { return std::min(std::max(p, eps), 1.0 - eps); };

    ParamVector p;
    p.theta = -logit(clamp01(wx1 / n));
    p.tau.resize(std::size_t(data.k_levels) - 1);
    double cum = 0.0;
    for (int k = 0; k + 1 < data.k_levels; ++k) {
        cum += wy[std::size_t(k)];
        p.tau[std::size_t(k)] = logit(clamp01(cum / n));
    }
    for (std::size_t k = 1; k < p.tau.size(); ++k) // guard equal cumulative frequencies
        if (!(p.tau[k] > p.tau[k - 1])) p.tau[k] = p.tau[k - 1] + 1e-6;
    p.beta_x.assign(std::size_t(data.z1_width), 0.0);
    p.beta_y.assign(std::size_t(data.z2_width), 0.0);
    p.zeta.assign(std::size_t(data.zw_width), 0.0);

    if (data.z1_width + data.z2_width > 0) {
        const ParamShape shape = ParamShape::of(p);
        const Objective full = make_objective(data, shape);
        std::vector<int> free_idx;
        for (int i = 0; i < shape.zeta_offset(); ++i) free_idx.push_back(i);
        const Eigen::VectorXd x0 = to_free(p);
        Eigen::VectorXd x0r(int(free_idx.size()));
        for (std::size_t i = 0; i < free_idx.size(); ++i) x0r[int(i)] = x0[free_idx[i]];
        OptimOptions marginal_opts;
        marginal_opts.grad_tol = 1e-5;
        const OptimResult r =
            minimize(detail::restrict_objective(full, x0, free_idx), x0r, marginal_opts);
        if (r.converged) {
            Eigen::VectorXd xf = x0;
            for (std::size_t i = 0; i < free_idx.size(); ++i) xf[free_idx[i]] = r.x[int(i)];
            return from_free(shape, xf);
        }
    }
    return p;
}

inline FitResult fit(const Dataset& data_in, const ModelSpec& spec) {
    if (spec.random_effects)
        throw std::invalid_argument("fit: use fit_mixed for random-effects models");
    Dataset data = aggregate(data_in);
    data.k_levels = spec.k_levels;
    data.validate();
    detail::check_levels_observed(data);

    const ParamVector start = starting_values(data, spec);
    const ParamShape shape = ParamShape::of(start);
    const Objective obj = make_objective(data, shape);
    const OptimResult opt = minimize(obj, to_free(start));

    FitResult out;
    out.shape = shape;
    out.free = opt.x;
    out.estimates = from_free(shape, opt.x);
    out.loglik = -opt.value;
    out.converged = opt.converged;
    out.iterations = opt.iterations;
    out.grad_norm = opt.grad_norm;
    out.message = opt.message;
    out.names = parameter_names(shape, data);

    auto grad_fn = [&obj](const Eigen::VectorXd& x) {
        Eigen::VectorXd g;
        obj(x, &g);
        return g;
    };
    detail::invert_information(detail::observed_information(grad_fn, opt.x), out);
    return out;
}

struct DeltaResult {
    double value = 0.0;
    double se = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool ok = true;
};

// Delta-method interval for a smooth transform g of the free parameters:
// se = sqrt(grad g . vcov . grad g) with a central finite-difference
// gradient; the 95% interval is value -+ 1.96 se. Flagged not-ok when the
// gradient vanishes numerically and the se degenerates to zero.
inline DeltaResult delta_method(const FitResult& fit,
                                const std::function<double(const Eigen::VectorXd&)>& g) {
    DeltaResult res;
    res.value = g(fit.free);
    const Eigen::VectorXd dg = fd_gradient(g, fit.free);
    if (dg.cwiseAbs().maxCoeff() == 0.0) {
        res.ok = false;
        return res;
    }
    const double var = dg.dot(fit.vcov * dg);
    res.se = var > 0.0 ? std::sqrt(var) : 0.0;
    res.ok = res.se > 0.0;
    res.lo = res.value - 1.96 * res.se;
    res.hi = res.value + 1.96 * res.se;
    return res;
}

// Delta-method interval computed on a transformed scale and mapped back
// through a monotone link (endpoints swapped for a decreasing link).
inline DeltaResult delta_method_transformed(
    const FitResult& fit, const std::function<double(const Eigen::VectorXd&)>& g,
    const std::function<double(double)>& back) {
    DeltaResult res = delta_method(fit, g);
    res.value = back(res.value);
    double lo = back(res.lo), hi = back(res.hi);
    if (lo > hi) std::swap(lo, hi);
    res.lo = lo;
    res.hi = hi;
    return res;
}

} // namespace amhfit
