#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace amhfit {

// Objective for minimization: returns f(x) and, when grad is non-null,
// writes the gradient. Non-finite values are treated by the line search as
// "step too long".
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct OptimOptions {
    int max_iter = 500;
    double grad_tol = 1e-6;  // max-abs gradient at convergence
    double step_tol = 1e-10; // relative step length below which iteration stalls
    double max_step = 5.0;   // trial-step length cap; guards saturating coordinates
    bool precondition = true; // seed the inverse Hessian with FD curvature diagonals
};

struct OptimResult {
    Eigen::VectorXd x;
    Eigen::VectorXd grad;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0; // max-abs at the final point
    std::vector<double> trace;
    std::string message;
};

// Central finite-difference gradient with per-coordinate steps
// h_i = cbrt(eps) (1 + |x_i|).
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x) {
    const double ch = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (int i = 0; i < x.size(); ++i) {
        const double h = ch * (1.0 + std::fabs(x[i]));
        const double xi = x[i];
        xp[i] = xi + h;
        const double fp = f(xp);
        xp[i] = xi - h;
        const double fm = f(xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Wraps a value-only objective with the numerical gradient above.
inline Objective with_fd_gradient(std::function<double(const Eigen::VectorXd&)> f) {
    return [f](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        if (grad) *grad = fd_gradient(f, x);
        return f(x);
    };
}

// Dense BFGS with backtracking Armijo line search. Updates that would
// break positive definiteness (s.y <= 0 up to roundoff) are skipped.
inline OptimResult minimize(const Objective& fn, Eigen::VectorXd x0,
                            const OptimOptions& opts = {}) {
    const int n = int(x0.size());
    OptimResult res;
    res.x = std::move(x0);
    Eigen::VectorXd g(n);
    double f = fn(res.x, &g);
    res.trace.push_back(f);
    if (!std::isfinite(f)) {
        res.value = f;
        res.message = "objective not finite at the starting point";
        return res;
    }

    // Badly scaled columns (covariates spanning orders of magnitude) make a
    // bare identity seed hopeless; per-coordinate curvature from one pass of
    // gradient differences fixes the scale before the first step. The same
    // reseed recovers the endgame when roundoff-length steps have poisoned
    // the curvature estimate.
    Eigen::MatrixXd hinv(n, n);
    auto reseed = [&]() {
        hinv = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, g.norm());
        if (!opts.precondition) return;
        const double ch = std::cbrt(std::numeric_limits<double>::epsilon());
        Eigen::VectorXd xp = res.x, gp(n), gm(n);
        for (int i = 0; i < n; ++i) {
            const double h = ch * (1.0 + std::fabs(res.x[i]));
            const double xi = xp[i];
            xp[i] = xi + h;
            fn(xp, &gp);
            xp[i] = xi - h;
            fn(xp, &gm);
            xp[i] = xi;
            const double curv = (gp[i] - gm[i]) / (2.0 * h);
            if (std::isfinite(curv) && curv > 1e-8) hinv(i, i) = 1.0 / curv;
        }
    };
    reseed();
    bool scaled = opts.precondition;
    const double c1 = 1e-4;
    int restarts_left = 2;

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        res.grad_norm = g.cwiseAbs().maxCoeff();
        if (res.grad_norm <= opts.grad_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd dir = -(hinv * g);
        double slope = dir.dot(g);
        if (!(slope < 0.0)) { // not a descent direction; reset curvature
            hinv.setIdentity();
            dir = -g;
            slope = dir.dot(g);
        }

        double t = std::min(1.0, opts.max_step / dir.norm());
        double fnew = 0.0;
        Eigen::VectorXd xnew, gnew(n);
        bool ok = false;
        // roundoff allowance: near the optimum the decrease drops below the
        // resolution of f and the Armijo test alone would deadlock
        const double feps = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(f));
        for (int ls = 0; ls < 60; ++ls) {
            xnew = res.x + t * dir;
            fnew = fn(xnew, nullptr);
            if (std::isfinite(fnew) && fnew <= f + c1 * t * slope + feps) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if (!ok) {
            if (restarts_left-- > 0) {
                reseed();
                continue;
            }
            res.message = "line search failed";
            break;
        }
        fnew = fn(xnew, &gnew);

        const Eigen::VectorXd s = xnew - res.x;
        const Eigen::VectorXd y = gnew - g;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            if (!scaled) {
                hinv *= sy / y.squaredNorm();
                scaled = true;
            }
            const Eigen::VectorXd hy = hinv * y;
            const double shy = 1.0 + y.dot(hy) / sy;
            hinv += (shy / sy) * (s * s.transpose()) -
                    (hy * s.transpose() + s * hy.transpose()) / sy;
        }

        const double step = s.norm();
        res.x = xnew;
        f = fnew;
        g = gnew;
        res.trace.push_back(f);
        if (step <= opts.step_tol * (1.0 + res.x.norm())) {
            res.grad_norm = g.cwiseAbs().maxCoeff();
            res.converged = res.grad_norm <= opts.grad_tol;
            if (!res.converged && restarts_left-- > 0) {
                reseed();
                continue;
            }
            if (!res.converged) res.message = "step size underflow before gradient tolerance";
            ++it;
            break;
        }
    }
    // Endgame: once f is flat to machine resolution the line search cannot
    // localise the optimum further, but the gradient still carries signal.
    // Newton steps on the gradient (curvature from central differences of
    // the gradient itself), accepted on a gradient-norm decrease, polish
    // the root of g to the requested tolerance.
    res.grad_norm = g.cwiseAbs().maxCoeff();
    if (!res.converged && res.grad_norm <= 1e4 * opts.grad_tol) {
        const double ch = std::cbrt(std::numeric_limits<double>::epsilon());
        double gnorm = g.cwiseAbs().maxCoeff();
        for (int polish = 0; polish < 5 && gnorm > opts.grad_tol; ++polish) {
            Eigen::MatrixXd hess(n, n);
            Eigen::VectorXd xp = res.x, gp(n), gm(n);
            for (int j = 0; j < n; ++j) {
                const double h = ch * (1.0 + std::fabs(res.x[j]));
                const double xj = xp[j];
                xp[j] = xj + h;
                fn(xp, &gp);
                xp[j] = xj - h;
                fn(xp, &gm);
                xp[j] = xj;
                hess.col(j) = (gp - gm) / (2.0 * h);
            }
            hess = 0.5 * (hess + hess.transpose());
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
            if (ldlt.info() != Eigen::Success) break;
            Eigen::VectorXd delta = -ldlt.solve(g);
            if (!delta.allFinite()) break;
            bool improved = false;
            for (int halve = 0; halve < 4; ++halve) {
                const Eigen::VectorXd xtry = res.x + delta;
                Eigen::VectorXd gtry(n);
                const double ftry = fn(xtry, &gtry);
                if (std::isfinite(ftry) && gtry.cwiseAbs().maxCoeff() < gnorm) {
                    res.x = xtry;
                    f = ftry;
                    g = gtry;
                    gnorm = g.cwiseAbs().maxCoeff();
                    improved = true;
                    break;
                }
                delta *= 0.5;
            }
            if (!improved) break;
        }
        if (gnorm <= opts.grad_tol) {
            res.converged = true;
            res.message.clear();
        }
    }

    res.value = f;
    res.grad = g;
    res.iterations = it;
    res.grad_norm = g.cwiseAbs().maxCoeff();
    if (res.converged) res.message = "converged";
    else if (res.message.empty()) res.message = "iteration limit reached";
    return res;
}

} // namespace amhfit
