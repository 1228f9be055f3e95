#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "amhfit/logistic.hpp"

namespace amhfit {

// Gauss-Hermite rule for the weight function exp(-x^2): integrates
// polynomials up to degree 2R - 1 exactly against the weight.
struct GhRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    int order() const { return int(nodes.size()); }
};

namespace detail {

// Orthonormal Hermite values h_0..h_r at x plus the derivative of h_r.
// Recurrence: h_{k+1} = x sqrt(2/(k+1)) h_k - sqrt(k/(k+1)) h_{k-1}.
inline void hermite_orthonormal(int r, double x, Eigen::VectorXd& h, double& dh_r) {
    h[0] = std::pow(pi, -0.25);
    if (r >= 1) h[1] = std::sqrt(2.0) * x * h[0];
    for (int k = 1; k < r; ++k)
        h[k + 1] = x * std::sqrt(2.0 / (k + 1)) * h[k] - std::sqrt(double(k) / (k + 1)) * h[k - 1];
    dh_r = r >= 1 ? std::sqrt(2.0 * r) * h[r - 1] : 0.0;
}

} // namespace detail

// Golub-Welsch eigenvalues of the Jacobi matrix seed the nodes; a few
// Newton steps on the orthonormal recurrence polish them, and weights come
// from the Christoffel sum 1 / sum_k h_k(x)^2. The eigen route alone loses
// relative precision on the extreme weights, which the polish restores to
// machine accuracy. Node/weight pairs are symmetrised so the rule is
// exactly even.
inline GhRule gh_rule(int r) {
    if (r < 1) throw std::invalid_argument("gh_rule: order must be >= 1");
    GhRule rule;
    if (r == 1) {
        rule.nodes = Eigen::VectorXd::Zero(1);
        rule.weights = Eigen::VectorXd::Constant(1, std::sqrt(pi));
        return rule;
    }
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(r, r);
    for (int i = 1; i < r; ++i) {
        const double b = std::sqrt(i / 2.0);
        jacobi(i, i - 1) = b;
        jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi, Eigen::EigenvaluesOnly);
    rule.nodes = es.eigenvalues();
    rule.weights.resize(r);

    Eigen::VectorXd h(r + 1);
    double dh = 0.0;
    for (int i = 0; i < r; ++i) {
        double x = rule.nodes[i];
        for (int step = 0; step < 3; ++step) {
            detail::hermite_orthonormal(r, x, h, dh);
            x -= h[r] / dh;
        }
        detail::hermite_orthonormal(r, x, h, dh);
        rule.nodes[i] = x;
        double christoffel = 0.0;
        for (int k = 0; k < r; ++k) christoffel += h[k] * h[k];
        rule.weights[i] = 1.0 / christoffel;
    }

    for (int i = 0; i < r / 2; ++i) {
        const int j = r - 1 - i;
        const double n = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        rule.nodes[i] = -n;
        rule.nodes[j] = n;
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if (r % 2) rule.nodes[r / 2] = 0.0;
    return rule;
}

} // namespace amhfit
