#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "amhfit/association.hpp"
#include "amhfit/mixed.hpp"
#include "amhfit/simulate.hpp"
#include "helpers.hpp"

using namespace amhfit;

namespace {

// 20 subjects x trials ordinal/binary panel, intercept-only, K = 3.
Dataset panel_design(int n_subjects, int trials, int k) {
    Dataset d = blank_design(n_subjects * trials, k);
    std::size_t i = 0;
    for (int s = 0; s < n_subjects; ++s)
        for (int t = 0; t < trials; ++t) d.rows[i++].subject = s;
    return d;
}

ParamVector panel_params(double l1, double l2, double l12, double omega) {
    ParamVector p;
    p.theta = 0.0;
    p.tau = {-0.5, 0.8};
    p.zeta = {std::atanh(omega)};
    p.has_random = true;
    p.l1 = l1;
    p.l2 = l2;
    p.l12 = l12;
    return p;
}

// Oracle fixture: a known, moderate covariance keeps the plain-rule
// quadrature error orders of magnitude below the Monte Carlo noise the
// tests compare against.
const ParamVector fixture_params = panel_params(0.3, 0.3, 0.12, 0.7);
const Dataset mixed_fixture = [] {
    return aggregate(simulate(fixture_params, panel_design(20, 50, 3), 515).data);
}();

} // namespace

TEST_CASE("gauss-hermite rule") {
    const GhRule r1 = gh_rule(1);
    CHECK(r1.nodes[0] == 0.0);
    CHECK(r1.weights[0] == doctest::Approx(std::sqrt(pi)).epsilon(1e-15));

    const GhRule r2 = gh_rule(2);
    CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(r2.weights[0] == doctest::Approx(std::sqrt(pi) / 2.0).epsilon(1e-14));

    // integral of x^4 e^{-x^2} = (3/4) sqrt(pi), exact at R = 20
    const GhRule r20 = gh_rule(20);
    double quartic = 0.0;
    for (int i = 0; i < 20; ++i) quartic += r20.weights[i] * std::pow(r20.nodes[i], 4);
    CHECK(std::fabs(quartic - 0.75 * std::sqrt(pi)) <= 1e-13);

    for (int r : {3, 8, 20, 33}) {
        const GhRule rule = gh_rule(r);
        CHECK(std::fabs(rule.weights.sum() - std::sqrt(pi)) <= 1e-12);
        for (int i = 0; i < r; ++i)
            CHECK(rule.nodes[i] == doctest::Approx(-rule.nodes[r - 1 - i]).epsilon(1e-14));
        // exactness for polynomials through degree 2R-1 against the
        // closed-form Gaussian moments Gamma((m+1)/2); node roundoff is
        // amplified by the degree, hence the scaled tolerance
        for (int m = 0; m + 1 <= 2 * r - 1; m += 2) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], m);
            CHECK(s == doctest::Approx(std::tgamma((m + 1) / 2.0))
                           .epsilon(1e-12 * (1.0 + double(m) * double(m))));
        }
    }
    CHECK_THROWS_AS((void)gh_rule(0), std::invalid_argument);
}

TEST_CASE("cholesky substitution equals the bivariate normal density") {
    Rng rng(606);
    for (int rep = 0; rep < 100; ++rep) {
        const double l1 = 0.2 + 2.0 * rng.uniform();
        const double l2 = 0.2 + 2.0 * rng.uniform();
        const double l12 = -1.5 + 3.0 * rng.uniform();
        const double dx2 = l1 * l1, dxy = l1 * l12, dy2 = l12 * l12 + l2 * l2;
        const double det = dx2 * dy2 - dxy * dxy;
        for (int pts = 0; pts < 10; ++pts) {
            const double u = -3.0 + 6.0 * rng.uniform();
            const double v = -3.0 + 6.0 * rng.uniform();
            const double quad = (dy2 * u * u - 2.0 * dxy * u * v + dx2 * v * v) / det;
            const double direct = std::exp(-0.5 * quad) / (2.0 * pi * std::sqrt(det));
            const double transform =
                normal_pdf(u / l1) * normal_pdf(v / l2 - l12 * u / (l1 * l2)) / (l1 * l2);
            CHECK(std::fabs(direct - transform) <= 1e-12);
        }
    }
}

TEST_CASE("two-pass quadrature reproduces polynomial-times-normal integrals") {
    // E[u^a v^b] under (u, v) = (l1 N1, l12 N1 + l2 N2), independent N(0,1):
    // odd orders vanish and even Gaussian moments are products of double
    // factorials; tested through the same substitution the likelihood uses
    const double l1 = 0.8, l2 = 1.3, l12 = -0.6;
    const GhRule rule = gh_rule(8);
    auto moment = [&](int a, int b) {
        double s = 0.0;
        for (int i = 0; i < rule.order(); ++i)
            for (int j = 0; j < rule.order(); ++j) {
                const double u = l1 * std::sqrt(2.0) * rule.nodes[i];
                const double v = l12 * std::sqrt(2.0) * rule.nodes[i] +
                                 l2 * std::sqrt(2.0) * rule.nodes[j];
                s += rule.weights[i] * rule.weights[j] * std::pow(u, a) * std::pow(v, b);
            }
        return s / pi;
    };
    CHECK(moment(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(moment(1, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
    CHECK(moment(2, 0) == doctest::Approx(l1 * l1).epsilon(1e-12));
    CHECK(moment(0, 2) == doctest::Approx(l12 * l12 + l2 * l2).epsilon(1e-12));
    CHECK(moment(1, 1) == doctest::Approx(l1 * l12).epsilon(1e-12));
    const double dy2 = l12 * l12 + l2 * l2;
    CHECK(moment(0, 4) == doctest::Approx(3.0 * dy2 * dy2).epsilon(1e-12));
    CHECK(moment(2, 2) ==
          doctest::Approx(l1 * l1 * dy2 + 2.0 * (l1 * l12) * (l1 * l12)).epsilon(1e-12));
}

TEST_CASE("degenerate random effects recover the fixed-effects likelihood") {
    ParamVector p = panel_params(1e-6, 1e-6, 0.0, 0.7);
    const double ll_mixed = marginal_loglik(p, mixed_fixture, 15);
    ParamVector fixed = p;
    fixed.has_random = false;
    CHECK(std::fabs(ll_mixed - loglik(fixed, mixed_fixture)) <= 1e-4);
}

TEST_CASE("marginal loglik against Monte Carlo integration") {
    const ParamVector p = fixture_params;
    const double gh = marginal_loglik(p, mixed_fixture, 15);

    // per-subject plain Monte Carlo with independent normal draws; the
    // delta-method standard error of sum(log I_i) aggregates per subject
    const ParamShape shape = ParamShape::of(p);
    std::map<std::int64_t, std::vector<const DataRow*>> groups;
    for (const DataRow& r : mixed_fixture.rows) groups[r.subject].push_back(&r);
    Rng rng(4040);
    const int ndraw = 1000000;
    double mc = 0.0, var_log = 0.0;
    for (auto& [sid, rows] : groups) {
        double mean = 0.0, m2 = 0.0;
        for (int d = 0; d < ndraw; ++d) {
            const double n1 = rng.normal(), n2 = rng.normal();
            const double ax = p.l1 * n1;
            const double ay = p.l12 * n1 + p.l2 * n2;
            double ll = 0.0;
            for (const DataRow* r : rows) ll += detail::row_loglik(p, shape, *r, ax, ay, nullptr);
            const double li = std::exp(ll);
            const double delta = li - mean;
            mean += delta / (d + 1);
            m2 += delta * (li - mean);
        }
        const double se_mean = std::sqrt(m2 / ndraw / ndraw);
        mc += std::log(mean);
        var_log += (se_mean / mean) * (se_mean / mean);
    }
    const double se = std::sqrt(var_log);
    CHECK(std::fabs(gh - mc) <= 3.0 * se);
}

TEST_CASE("quadrature refinement converges") {
    const ParamVector p = fixture_params;
    const double g10 = marginal_loglik(p, mixed_fixture, 10);
    const double g20 = marginal_loglik(p, mixed_fixture, 20);
    const double g30 = marginal_loglik(p, mixed_fixture, 30);
    const double g40 = marginal_loglik(p, mixed_fixture, 40);
    CHECK(std::fabs(g20 - g10) >= std::fabs(g40 - g20));
    CHECK(std::fabs(g30 - g20) <= 1e-6);
}

TEST_CASE("marginal loglik is invariant to row order") {
    const ParamVector p = panel_params(0.8, 1.2, -0.3, 0.5);
    Dataset shuffled = mixed_fixture;
    // deterministic shuffle: reverse, then interleave halves
    std::vector<DataRow> rows;
    for (auto it = shuffled.rows.rbegin(); it != shuffled.rows.rend(); ++it) rows.push_back(*it);
    std::vector<DataRow> inter;
    const std::size_t half = rows.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        inter.push_back(rows[half + i]);
        inter.push_back(rows[i]);
    }
    if (rows.size() % 2) inter.push_back(rows.back());
    shuffled.rows = inter;
    CHECK(marginal_loglik(p, shuffled, 12) ==
          doctest::Approx(marginal_loglik(p, mixed_fixture, 12)).epsilon(1e-15));
}

TEST_CASE("marginal loglik gradient matches finite differences") {
    const ParamVector p0 = panel_params(0.9, 1.1, 0.4, 0.6);
    const ParamShape shape = ParamShape::of(p0);
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd x = to_free(p0);
        for (int i = 0; i < x.size(); ++i) x[i] += -0.2 + 0.4 * rng.uniform();
        Eigen::VectorXd gn;
        const ParamVector p = from_free(shape, x);
        marginal_loglik(p, mixed_fixture, 8, &gn);
        const Eigen::VectorXd analytic = grad_to_free(shape, x, gn);
        const Eigen::VectorXd numeric = fd_gradient(
            [&](const Eigen::VectorXd& q) {
                return marginal_loglik(from_free(shape, q), mixed_fixture, 8);
            },
            x);
        for (int i = 0; i < x.size(); ++i)
            CHECK(std::fabs(analytic[i] - numeric[i]) <=
                  1e-5 * std::max(1.0, std::fabs(numeric[i])));
    }
}

TEST_CASE("mixed fit recovers the generating parameters") {
    // d_x = d_y = 1, d_xy = 0.5 in Cholesky form
    const ParamVector gen = panel_params(1.0, std::sqrt(0.75), 0.5, 0.7);
    const Dataset data =
        aggregate(simulate(gen, panel_design(50, 100, 3), 2718).data);
    ModelSpec spec;
    spec.k_levels = 3;
    spec.random_effects = true;
    RandomEffectSpec re;
    re.gh_order = 30;
    const FitResult r = fit_mixed(data, spec, re);
    REQUIRE(r.converged);
    CHECK(!r.boundary);

    const Eigen::MatrixXd vr = r.report_vcov();
    const int r0 = r.shape.random_offset();
    const double targets[3] = {gen.l1, gen.l2, gen.l12};
    const double est[3] = {r.estimates.l1, r.estimates.l2, r.estimates.l12};
    for (int i = 0; i < 3; ++i)
        CHECK(std::fabs(est[i] - targets[i]) <= 3.0 * std::sqrt(vr(r0 + i, r0 + i)));
    const int zi = r.shape.zeta_offset();
    CHECK(std::fabs(r.estimates.zeta[0] - std::atanh(0.7)) <=
          3.0 * std::sqrt(r.vcov(zi, zi)));
    CHECK(std::fabs(r.estimates.theta - gen.theta) <= 3.0 * std::sqrt(vr(0, 0)));
    for (int k = 0; k < 2; ++k)
        CHECK(std::fabs(r.estimates.tau[std::size_t(k)] - gen.tau[std::size_t(k)]) <=
              3.0 * std::sqrt(vr(1 + k, 1 + k)));
}

TEST_CASE("homogeneous data drive the variance components to the boundary") {
    ParamVector gen = panel_params(1.0, 1.0, 0.0, 0.6); // heterogeneity removed below
    gen.l1 = 1e-12;
    gen.l2 = 1e-12;
    const Dataset data = aggregate(simulate(gen, panel_design(15, 80, 3), 905).data);
    ModelSpec spec;
    spec.k_levels = 3;
    spec.random_effects = true;
    RandomEffectSpec re;
    re.gh_order = 8;
    re.l1 = 0.3;
    re.l2 = 0.3;
    const FitResult r = fit_mixed(data, spec, re);
    CHECK(r.boundary);
    CHECK(r.estimates.l1 < 0.05);
    CHECK(r.estimates.l2 < 0.05);
}

TEST_CASE("shared intercepts equal the tied-column constrained fit") {
    // alpha_x = alpha_y: the bivariate machinery pinned at l12 = l1 and
    // l2 -> 0 must agree with a univariate-quadrature shared model
    ParamVector gen = panel_params(0.9, 1e-9, 0.9, 0.6);
    const Dataset data = aggregate(simulate(gen, panel_design(25, 60, 3), 33).data);
    const ParamShape shape = ParamShape::of(gen);
    const GhRule rule = gh_rule(24);

    auto shared_univariate = [&](const ParamVector& p) {
        std::map<std::int64_t, std::vector<const DataRow*>> groups;
        for (const DataRow& r : data.rows) groups[r.subject].push_back(&r);
        double total = 0.0;
        for (auto& [sid, rows] : groups) {
            Eigen::VectorXd node_ll(rule.order());
            for (int i = 0; i < rule.order(); ++i) {
                const double a = p.l1 * std::sqrt(2.0) * rule.nodes[i];
                double ll = 0.0;
                for (const DataRow* r : rows)
                    ll += detail::row_loglik(p, shape, *r, a, a, nullptr);
                node_ll[i] = std::log(rule.weights[i]) + ll;
            }
            const double m = node_ll.maxCoeff();
            double z = 0.0;
            for (int i = 0; i < rule.order(); ++i) z += std::exp(node_ll[i] - m);
            total += m + std::log(z) - 0.5 * std::log(pi);
        }
        return total;
    };

    Rng rng(77);
    for (int rep = 0; rep < 4; ++rep) {
        ParamVector p = gen;
        p.theta += -0.3 + 0.6 * rng.uniform();
        p.l1 = 0.5 + 0.8 * rng.uniform();
        p.l12 = p.l1;
        p.l2 = 1e-9;
        CHECK(marginal_loglik(p, data, 24) ==
              doctest::Approx(shared_univariate(p)).epsilon(1e-9));
    }
}

TEST_CASE("population association") {
    // D -> 0 collapses to the fixed-effects odds ratio
    ParamVector p = panel_params(1e-7, 1e-7, 0.0, 0.6);
    FitResult fake;
    fake.estimates = p;
    fake.shape = ParamShape::of(p);
    const Thresholds th(p.theta, p.tau);
    for (int k = 1; k <= 2; ++k)
        CHECK(population_association(fake, k, 0.0, 0.0, 20) ==
              doctest::Approx(odds_ratio(th, AmhParams(0.6), k)).epsilon(1e-8));

    // Monte Carlo oracle for the integrated table at a proper D
    ParamVector q = panel_params(0.9, 0.7, 0.3, 0.5);
    FitResult fit_q;
    fit_q.estimates = q;
    fit_q.shape = ParamShape::of(q);
    const double pop = population_association(fit_q, 1, 0.0, 0.0, 24);
    Rng rng(505);
    const int nd = 400000;
    double cells[2][3] = {{0, 0, 0}, {0, 0, 0}};
    const Thresholds thq(q.theta, q.tau);
    for (int d = 0; d < nd; ++d) {
        const double n1 = rng.normal(), n2 = rng.normal();
        const AmhParams ap(0.5, q.l1 * n1, q.l12 * n1 + q.l2 * n2);
        for (int x = 0; x <= 1; ++x)
            for (int y = 1; y <= 3; ++y) cells[x][y - 1] += pmf(thq, ap, x, y);
    }
    const double above1 = cells[1][1] + cells[1][2], below1 = cells[1][0];
    const double above0 = cells[0][1] + cells[0][2], below0 = cells[0][0];
    const double mc = (above1 / below1) / (above0 / below0);
    CHECK(pop == doctest::Approx(mc).epsilon(0.01));

    // shared heterogeneity induces marginal association even at omega = 0
    ParamVector ind = panel_params(1.0, 1.0, 0.8, 0.0);
    FitResult fit_ind;
    fit_ind.estimates = ind;
    fit_ind.shape = ParamShape::of(ind);
    for (int k = 1; k <= 2; ++k) CHECK(population_association(fit_ind, k) > 1.05);
}
