#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "amhfit/association.hpp"
#include "amhfit/fit.hpp"
#include "amhfit/rng.hpp"
#include "helpers.hpp"

using namespace amhfit;

namespace {

Dataset trekking_dataset() {
    Dataset d;
    d.k_levels = 5;
    const double counts[2][5] = {{33, 45, 60, 26, 6}, {14, 29, 80, 56, 16}};
    for (int x = 0; x <= 1; ++x)
        for (int y = 1; y <= 5; ++y) {
            DataRow r;
            r.x = x;
            r.y = y;
            r.weight = counts[x][y - 1];
            d.rows.push_back(r);
        }
    return d;
}

// definitional odds ratio assembled from the joint cdf and the marginals
double odds_ratio_definitional(const Thresholds& th, const AmhParams& p, int k) {
    const double h = amh_cdf(p, th.theta, th.tau[std::size_t(k) - 1]);
    const double f1 = logistic_cdf(th.theta - p.mu);
    const double f2 = logistic_cdf(th.tau[std::size_t(k) - 1] - p.nu);
    return h * (1.0 - f1 - f2 + h) / ((f1 - h) * (f2 - h));
}

} // namespace

TEST_CASE("odds ratio closed form equals the definitional form") {
    Rng rng(17);
    for (int rep = 0; rep < 1000; ++rep) {
        const double om = -0.98 + 1.96 * rng.uniform();
        const AmhParams p(om, -1.0 + 2.0 * rng.uniform(), -1.0 + 2.0 * rng.uniform());
        const Thresholds th(-2.0 + 4.0 * rng.uniform(),
                            {-1.5 + 1.5 * rng.uniform(), 0.5 + 1.5 * rng.uniform()});
        for (int k = 1; k <= 2; ++k) {
            const double closed = odds_ratio(th, p, k);
            const double defn = odds_ratio_definitional(th, p, k);
            CHECK(std::fabs(closed - defn) <= 1e-10 * std::max(1.0, defn));
        }
    }
}

TEST_CASE("odds ratio basics and limits") {
    const Thresholds th(0.0, {0.0});
    CHECK(odds_ratio(th, AmhParams(0.0), 1) == doctest::Approx(1.0).epsilon(1e-14));

    // omega = 1 branch at zero thresholds: 2 + 1 + 1
    CHECK(odds_ratio(th, AmhParams(1.0), 1) == doctest::Approx(4.0).epsilon(1e-14));

    // the omega -> 1 limit is continuous
    const Thresholds th2(0.4, {-0.7, 0.9});
    for (int k = 1; k <= 2; ++k)
        CHECK(std::fabs(odds_ratio(th2, AmhParams(1.0 - 1e-8), k) -
                        odds_ratio(th2, AmhParams(1.0), k)) <= 1e-6);

    // sign coherence and the fixed-omega range [1+w, 1/(1-w)]
    Rng rng(23);
    for (int rep = 0; rep < 400; ++rep) {
        const double om = -0.95 + 1.9 * rng.uniform();
        const Thresholds t(-2.0 + 4.0 * rng.uniform(),
                           {-2.0 + 2.0 * rng.uniform(), 0.5 + 2.0 * rng.uniform()});
        for (int k = 1; k <= 2; ++k) {
            const double psi = odds_ratio(t, AmhParams(om), k);
            CHECK(psi > 0.0);
            if (om > 0.0) CHECK(psi > 1.0);
            if (om < 0.0) CHECK(psi < 1.0);
            if (om == 0.0) CHECK(psi == doctest::Approx(1.0));
            CHECK(psi >= 1.0 + om - 1e-12);
            CHECK(psi <= 1.0 / (1.0 - om) + 1e-12);
        }
    }
}

TEST_CASE("odds ratio range") {
    // at zero effective thresholds the upper endpoint is 2 + 1 + 1
    const Thresholds th(0.0, {0.0});
    const OddsRatioRange r0 = odds_ratio_range(th, 1);
    CHECK(r0.upper == doctest::Approx(4.0).epsilon(1e-14));

    // limiting arithmetic: effective arguments -> -inf push the lower
    // endpoint to 1/2, -> +inf push the upper endpoint to 2
    const Thresholds far(30.0, {30.0});
    CHECK(odds_ratio_range(far, 1).upper == doctest::Approx(2.0).epsilon(1e-12));
    const Thresholds low(-30.0, {-30.0});
    CHECK(odds_ratio_range(low, 1).lower == doctest::Approx(0.5).epsilon(1e-12));

    // psi stays inside the range across the omega sweep
    Rng rng(37);
    for (int rep = 0; rep < 300; ++rep) {
        const Thresholds t(-2.0 + 4.0 * rng.uniform(),
                           {-2.0 + 2.0 * rng.uniform(), 0.5 + 2.0 * rng.uniform()});
        const double z1 = -1.0 + 2.0 * rng.uniform();
        const double z2 = -1.0 + 2.0 * rng.uniform();
        for (int k = 1; k <= 2; ++k) {
            const OddsRatioRange r = odds_ratio_range(t, k, z1, z2);
            for (double om : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
                const double psi = odds_ratio(t, AmhParams(om), k, z1, z2);
                CHECK(psi >= r.lower - 1e-12);
                CHECK(psi <= r.upper + 1e-12);
            }
            // endpoints are attained at omega = -+1
            CHECK(odds_ratio(t, AmhParams(-1.0), k, z1, z2) ==
                  doctest::Approx(r.lower).epsilon(1e-12));
            CHECK(odds_ratio(t, AmhParams(1.0), k, z1, z2) ==
                  doctest::Approx(r.upper).epsilon(1e-12));
        }
    }
}

TEST_CASE("log odds ratio approximation") {
    const Thresholds th(0.2, {-0.4});
    CHECK(log_odds_ratio_approx(th, AmhParams(0.0), 1).approx == doctest::Approx(0.0));

    // small omega, small thresholds: approximation within 0.02 of exact
    for (double t1 : {-0.5, 0.0, 0.5})
        for (double t2 : {-0.5, 0.0, 0.5}) {
            const Thresholds t(t1, {t2});
            const LogOrApprox a = log_odds_ratio_approx(t, AmhParams(0.3), 1);
            CHECK(a.abs_error <= 0.02);
            // value stays inside the asymptote interval
            CHECK(a.approx >= std::log1p(0.3) - 1e-12);
            CHECK(a.approx <= -std::log1p(-0.3) + 1e-12);
        }

    CHECK_THROWS_AS((void)log_odds_ratio_approx(th, AmhParams(1.0), 1), std::domain_error);

    // maximal effect-modification span at the trekking association
    CHECK(1.0 / (1.0 - 0.76 * 0.76) == doctest::Approx(2.37).epsilon(2e-3));
}

TEST_CASE("binary correlations") {
    CHECK(binary_correlation_amh(0.3, -0.7, 0.0) == 0.0);
    CHECK(binary_correlation_type2(0.3, -0.7, 0.0) == 0.0);

    // extremum value omega / (2 (1 + sqrt(1-omega))) approaches 1/2 as
    // omega -> 1, where the extremum point (1/2) log(1-omega) runs off to
    // -inf; at the origin the omega = 1 correlation is 1/3
    CHECK(binary_correlation_amh(0.0, 0.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    const double om_near1 = 1.0 - 1e-9;
    const double argmax = 0.5 * std::log1p(-om_near1);
    CHECK(binary_correlation_amh(argmax, argmax, om_near1) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(binary_correlation_type2(0.0, 0.0, 1.0) == doctest::Approx(0.25).epsilon(1e-14));

    // worked value and agreement with the pmf-based Pearson correlation
    CHECK(binary_correlation_amh(0.0, 0.0, 0.8) == doctest::Approx(0.25).epsilon(1e-14));
    Rng rng(41);
    for (int rep = 0; rep < 300; ++rep) {
        const double om = -0.98 + 1.96 * rng.uniform();
        const double t1 = -2.0 + 4.0 * rng.uniform();
        const double t2 = -2.0 + 4.0 * rng.uniform();
        const Thresholds th(t1, {t2});
        const ObservedMoments m = observed_moments(th, AmhParams(om));
        const double rho_pmf = m.cov_xy / std::sqrt(m.var_x * m.var_y);
        CHECK(std::fabs(binary_correlation_amh(t1, t2, om) - rho_pmf) <= 1e-12);

        // AMH correlation dominates the type 2 correlation away from zero
        if (om != 0.0)
            CHECK(binary_correlation_amh(t1, t2, om) > binary_correlation_type2(t1, t2, om));
    }

    // numerical maximisation lands on the closed-form extremum
    for (double om : {0.5, 0.9, -0.8}) {
        const Objective neg = [om](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
            const double sign = om > 0.0 ? -1.0 : 1.0;
            auto f = [&](const Eigen::VectorXd& q) {
                return sign * binary_correlation_amh(q[0], q[1], om);
            };
            if (grad) *grad = fd_gradient(f, x);
            return f(x);
        };
        Eigen::VectorXd x0(2);
        x0 << 0.3, -0.3;
        OptimOptions opts;
        opts.grad_tol = 1e-10;
        const OptimResult r = minimize(neg, x0, opts);
        REQUIRE(r.converged);
        const double argmax = 0.5 * std::log1p(-om);
        CHECK(std::fabs(r.x[0] - argmax) <= 1e-4);
        CHECK(std::fabs(r.x[1] - argmax) <= 1e-4);
        const double extremum = om / (2.0 * (1.0 + std::sqrt(1.0 - om)));
        CHECK(std::fabs(-r.value * (om > 0.0 ? 1.0 : -1.0) - extremum) <= 1e-8);
    }

    // overall bounds across a parameter sweep
    Rng rng2(43);
    for (int rep = 0; rep < 500; ++rep) {
        const double om = -1.0 + 2.0 * rng2.uniform();
        const double rho = binary_correlation_amh(-4.0 + 8.0 * rng2.uniform(),
                                                  -4.0 + 8.0 * rng2.uniform(), om);
        CHECK(rho <= 0.5 + 1e-12);
        CHECK(rho >= -1.0 / (2.0 * (1.0 + std::sqrt(2.0))) - 1e-12);
    }
}

TEST_CASE("frechet correlation bounds") {
    const CorrelationBounds half = frechet_correlation_bounds(0.5, 0.5);
    CHECK(half.lower == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(half.upper == doctest::Approx(1.0).epsilon(1e-14));

    for (double p : {0.1, 0.37, 0.81})
        CHECK(frechet_correlation_bounds(p, p).upper == doctest::Approx(1.0).epsilon(1e-14));

    const CorrelationBounds skew = frechet_correlation_bounds(0.9, 0.1);
    CHECK(skew.upper == doctest::Approx(1.0 / 9.0).epsilon(1e-14));

    CHECK_THROWS_AS((void)frechet_correlation_bounds(0.0, 0.5), std::domain_error);
    CHECK_THROWS_AS((void)frechet_correlation_bounds(0.5, 1.0), std::domain_error);
}

TEST_CASE("observed odds ratios from the trekking table") {
    const CellTable counts = CellTable::make(
        5, CellTable::Role::counts, {33, 45, 60, 26, 6, 14, 29, 80, 56, 16});
    const std::vector<double> ors = observed_odds_ratios(counts);
    REQUIRE(ors.size() == 4);
    const double published[4] = {3.11, 3.00, 2.52, 2.44};
    for (int k = 0; k < 4; ++k)
        CHECK(std::fabs(ors[std::size_t(k)] - published[k]) <= 0.005);
}

TEST_CASE("trekking fit: predicted odds ratios and intervals") {
    ModelSpec spec;
    spec.k_levels = 5;
    const FitResult r = fit(trekking_dataset(), spec);
    REQUIRE(r.converged);
    const Thresholds th(r.estimates.theta, r.estimates.tau);
    const double omega = std::tanh(r.estimates.zeta[0]);

    const double pub_or[4] = {3.40, 2.87, 2.43, 2.30};
    const double pub_ci[4][2] = {{1.98, 5.86}, {1.96, 4.21}, {1.85, 3.19}, {1.80, 2.93}};
    // independently computed fixed-point values, for tighter pinning
    const double oracle_or[4] = {3.4035, 2.8703, 2.4288, 2.2950};
    const double oracle_ci[4][2] = {
        {1.9759, 5.8625}, {1.9555, 4.2129}, {1.8498, 3.1889}, {1.7986, 2.9285}};

    const ParamShape shape = r.shape;
    for (int k = 1; k <= 4; ++k) {
        const double psi = odds_ratio(th, AmhParams(omega), k);
        CHECK(std::fabs(psi - pub_or[k - 1]) <= 0.02);
        CHECK(psi == doctest::Approx(oracle_or[k - 1]).epsilon(2e-3));

        const DeltaResult ci = delta_method_transformed(
            r,
            [k, shape](const Eigen::VectorXd& x) {
                const ParamVector p = from_free(shape, x);
                const Thresholds t(p.theta, p.tau);
                return std::log(odds_ratio(t, AmhParams(std::tanh(p.zeta[0])), k));
            },
            [](double v) { return std::exp(v); });
        CHECK(ci.ok);
        CHECK(std::fabs(ci.lo - pub_ci[k - 1][0]) <= 0.03);
        CHECK(std::fabs(ci.hi - pub_ci[k - 1][1]) <= 0.03);
        CHECK(ci.lo == doctest::Approx(oracle_ci[k - 1][0]).epsilon(3e-3));
        CHECK(ci.hi == doctest::Approx(oracle_ci[k - 1][1]).epsilon(3e-3));
    }
}

TEST_CASE("latent cross moment at the trekking fit") {
    ModelSpec spec;
    spec.k_levels = 5;
    const FitResult r = fit(trekking_dataset(), spec);
    REQUIRE(r.converged);
    const IntervalEstimate cm = latent_cross_moment(r, 10);
    CHECK(cm.ok);

    // fixed-point values from an independent optimisation and delta method
    CHECK(cm.value == doctest::Approx(0.987156).epsilon(2e-3));
    CHECK(cm.lo == doctest::Approx(0.634450).epsilon(5e-3));
    CHECK(cm.hi == doctest::Approx(1.339861).epsilon(5e-3));

    // and the published point estimate
    CHECK(std::fabs(cm.value - 0.99) <= 0.01);

    // zero association gives a zero cross moment
    FitResult zero = r;
    zero.free[r.shape.zeta_offset()] = 0.0;
    CHECK(latent_cross_moment(zero, 10).value == doctest::Approx(0.0).epsilon(1e-12));
}
