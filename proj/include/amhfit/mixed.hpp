#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "amhfit/fit.hpp"
#include "amhfit/loglik.hpp"
#include "amhfit/quadrature.hpp"
#include "amhfit/thresholds.hpp"

namespace amhfit {

// Configuration of the correlated random-intercept extension: quadrature
// order per dimension and starting Cholesky factors of D = L L^T.
struct RandomEffectSpec {
    int gh_order = 20;
    double l1 = 0.5;
    double l2 = 0.5;
    double l12 = 0.0;

    void validate() const {
        if (gh_order < 2) throw std::invalid_argument("RandomEffectSpec: gh_order must be >= 2");
        if (!(l1 > 0.0) || !(l2 > 0.0))
            throw std::invalid_argument("RandomEffectSpec: l1, l2 must be positive");
    }
};

namespace detail {

struct SubjectGroups {
    // row indices per subject, subjects in ascending id order so the
    // reduction order is independent of row ordering
    std::vector<std::vector<std::size_t>> groups;
};

inline SubjectGroups group_by_subject(const Dataset& data) {
    std::map<std::int64_t, std::vector<std::size_t>> bysubj;
    for (std::size_t i = 0; i < data.rows.size(); ++i)
        bysubj[data.rows[i].subject].push_back(i);
    SubjectGroups out;
    for (auto& [id, rows] : bysubj) out.groups.push_back(std::move(rows));
    return out;
}

} // namespace detail

// Marginal log-likelihood of the random-intercept model: per subject the
// conditional likelihood is integrated over correlated normal intercepts
// by applying the univariate Gauss-Hermite rule twice after the Cholesky
// substitution,
//   I_i = (1/pi) sum_{r,s} w_r w_s L_i(l1 sqrt2 z_r, l12 sqrt2 z_r + l2 sqrt2 z_s).
// Per-subject conditional log-likelihoods are combined by max-shifted
// exponentials, so long trial sequences cannot underflow. When grad is
// non-null it receives the gradient on the natural scale
// (theta, tau, beta_x, beta_y, zeta, l1, l2, l12).
inline double marginal_loglik(const ParamVector& p, const Dataset& data, int gh_order,
                              Eigen::VectorXd* grad = nullptr) {
    if (!p.has_random)
        throw std::invalid_argument("marginal_loglik: parameters carry no random-effect block");
    if (gh_order < 2) throw std::invalid_argument("marginal_loglik: gh_order must be >= 2");
    const GhRule rule = gh_rule(gh_order);
    const ParamShape shape = ParamShape::of(p);
    const detail::SubjectGroups subj = detail::group_by_subject(data);
    const double sqrt2 = std::sqrt(2.0);
    const int r = rule.order();

    Eigen::VectorXd logw(r);
    for (int i = 0; i < r; ++i) logw[i] = std::log(rule.weights[i]);

    if (grad) *grad = Eigen::VectorXd::Zero(shape.size());
    Eigen::VectorXd node_ll(r * r);
    Eigen::VectorXd node_grad;
    Eigen::MatrixXd node_grads;
    double total = 0.0;

    for (const auto& rows : subj.groups) {
        // pass 1: conditional log-likelihood at every node pair
        for (int a = 0; a < r; ++a) {
            const double ax = p.l1 * sqrt2 * rule.nodes[a];
            for (int b = 0; b < r; ++b) {
                const double ay = p.l12 * sqrt2 * rule.nodes[a] + p.l2 * sqrt2 * rule.nodes[b];
                double ll = 0.0;
                for (std::size_t idx : rows)
                    ll += detail::row_loglik(p, shape, data.rows[idx], ax, ay, nullptr);
                node_ll[a * r + b] = logw[a] + logw[b] + ll;
            }
        }
        const double m = node_ll.maxCoeff();
        double z = 0.0;
        for (int i = 0; i < r * r; ++i) z += std::exp(node_ll[i] - m);
        total += m + std::log(z) - std::log(pi);

        if (!grad) continue;
        // pass 2: softmax-weighted conditional scores
        for (int a = 0; a < r; ++a) {
            const double ax = p.l1 * sqrt2 * rule.nodes[a];
            for (int b = 0; b < r; ++b) {
                const double q = std::exp(node_ll[a * r + b] - m) / z;
                if (q < 1e-16) continue;
                const double ay = p.l12 * sqrt2 * rule.nodes[a] + p.l2 * sqrt2 * rule.nodes[b];
                node_grad = Eigen::VectorXd::Zero(shape.size());
                double d_ax_sum = 0.0, d_ay_sum = 0.0;
                for (std::size_t idx : rows) {
                    double d_ax = 0.0, d_ay = 0.0;
                    detail::row_loglik(p, shape, data.rows[idx], ax, ay, &node_grad, &d_ax,
                                       &d_ay);
                    const double w = data.rows[idx].weight;
                    d_ax_sum += w * d_ax;
                    d_ay_sum += w * d_ay;
                }
                const int r0 = shape.random_offset();
                node_grad[r0 + 0] = d_ax_sum * sqrt2 * rule.nodes[a];
                node_grad[r0 + 1] = d_ay_sum * sqrt2 * rule.nodes[b];
                node_grad[r0 + 2] = d_ay_sum * sqrt2 * rule.nodes[a];
                *grad += q * node_grad;
            }
        }
    }
    return total;
}

// Maximum marginal likelihood for the random-intercept model. Estimation
// runs over (free fixed-effect block, log l1, log l2, l12); solutions with
// a collapsed variance component are flagged as boundary.
inline FitResult fit_mixed(const Dataset& data_in, const ModelSpec& spec,
                           const RandomEffectSpec& re = {}) {
    re.validate();
    Dataset data = aggregate(data_in);
    data.k_levels = spec.k_levels;
    data.validate();
    detail::check_levels_observed(data);
    if (data.n_subjects() < 2)
        throw std::invalid_argument("fit_mixed: need at least two subjects");

    ModelSpec fixed_spec = spec;
    fixed_spec.random_effects = false;
    ParamVector start = starting_values(data, fixed_spec);
    start.has_random = true;
    start.l1 = re.l1;
    start.l2 = re.l2;
    start.l12 = re.l12;

    const ParamShape shape = ParamShape::of(start);
    const Objective obj = [&data, shape, &re](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const ParamVector p = from_free(shape, x);
        if (!grad) return -marginal_loglik(p, data, re.gh_order);
        Eigen::VectorXd gn;
        const double ll = marginal_loglik(p, data, re.gh_order, &gn);
        *grad = -grad_to_free(shape, x, gn);
        return -ll;
    };
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
    // below ~0.05 the likelihood is flat in log(l) to within the gradient
    // tolerance; the component has effectively collapsed
    out.boundary = out.estimates.l1 < 0.05 || out.estimates.l2 < 0.05;

    auto grad_fn = [&obj](const Eigen::VectorXd& x) {
        Eigen::VectorXd g;
        obj(x, &g);
        return g;
    };
    detail::invert_information(detail::observed_information(grad_fn, opt.x), out);
    return out;
}

// Cell probabilities of the observed pair with the random intercepts
// integrated out at the fitted covariance, by the same two-pass rule.
inline CellTable population_cell_probabilities(const ParamVector& p, int gh_order,
                                               double z1_effect = 0.0, double z2_effect = 0.0,
                                               double omega_eta = 0.0) {
    if (!p.has_random)
        throw std::invalid_argument("population_cell_probabilities: no random-effect block");
    const GhRule rule = gh_rule(gh_order);
    const double sqrt2 = std::sqrt(2.0);
    const int k = p.k_levels();
    const Thresholds th(p.theta, p.tau);
    const double omega = std::tanh(omega_eta);
    std::vector<double> vals(std::size_t(2 * k), 0.0);
    for (int a = 0; a < rule.order(); ++a)
        for (int b = 0; b < rule.order(); ++b) {
            const double ax = p.l1 * sqrt2 * rule.nodes[a];
            const double ay = p.l12 * sqrt2 * rule.nodes[a] + p.l2 * sqrt2 * rule.nodes[b];
            const double w = rule.weights[a] * rule.weights[b] / pi;
            const AmhParams ap(omega, z1_effect + ax, z2_effect + ay);
            for (int x = 0; x <= 1; ++x)
                for (int y = 1; y <= k; ++y)
                    vals[std::size_t(x) * k + y - 1] += w * pmf(th, ap, x, y);
        }
    // the node weights sum to sqrt(pi) only up to roundoff; renormalise so
    // the table honours its sum-to-one invariant
    double total = 0.0;
    for (double v : vals) total += v;
    for (double& v : vals) v /= total;
    return CellTable::make(k, CellTable::Role::probabilities, std::move(vals));
}

// Population-level global odds ratio at ordinal level k: the collapsed
// 2x2 odds ratio of the integrated table. zw_row is required when the
// association model carries covariates; by default the single intercept
// coefficient is used.
inline double population_association(const FitResult& fit, int k, double z1_effect = 0.0,
                                     double z2_effect = 0.0, int gh_order = 20,
                                     const std::vector<double>& zw_row = {}) {
    const ParamVector& p = fit.estimates;
    if (k < 1 || k >= p.k_levels())
        throw std::domain_error("population_association: level k outside {1..K-1}");
    double eta = 0.0;
    if (zw_row.empty()) {
        if (p.zeta.size() != 1)
            throw std::invalid_argument(
                "population_association: covariate-dependent association needs zw_row");
        eta = p.zeta[0];
    } else {
        if (zw_row.size() != p.zeta.size())
            throw std::invalid_argument("population_association: zw_row width mismatch");
        for (std::size_t j = 0; j < zw_row.size(); ++j) eta += zw_row[j] * p.zeta[j];
    }
    const CellTable t =
        population_cell_probabilities(p, gh_order, z1_effect, z2_effect, eta);
    double above1 = 0.0, below1 = 0.0, above0 = 0.0, below0 = 0.0;
    for (int y = 1; y <= p.k_levels(); ++y) {
        (y > k ? above0 : below0) += t.at(0, y);
        (y > k ? above1 : below1) += t.at(1, y);
    }
    return (above1 / below1) / (above0 / below0);
}

} // namespace amhfit
