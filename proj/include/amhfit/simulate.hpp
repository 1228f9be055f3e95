#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "amhfit/data.hpp"
#include "amhfit/params.hpp"
#include "amhfit/sampler.hpp"
#include "amhfit/thresholds.hpp"

namespace amhfit {

struct SimOutput {
    Dataset data;
    std::vector<std::pair<double, double>> latent; // one pair per row
};

// Draws observed (x, y) data through the threshold rule at fixed
// parameters. The design argument provides covariate rows, subjects and
// the table dimensions; its x/y fields are overwritten. With a
// random-effects block, correlated intercepts (l1 u, l12 u + l2 v) are
// drawn once per subject, in first-appearance order, so output is
// reproducible for a given seed. Row associations must lie in [0, 1), the
// sampler's domain.
inline SimOutput simulate(const ParamVector& params, Dataset design, std::uint64_t seed) {
    params.validate();
    if (int(params.tau.size()) + 1 != design.k_levels)
        throw std::invalid_argument("simulate: thresholds do not match k_levels");
    Rng rng(seed);
    const Thresholds th(params.theta, params.tau);

    std::map<std::int64_t, std::pair<double, double>> effects;
    SimOutput out;
    out.latent.reserve(design.rows.size());
    for (DataRow& r : design.rows) {
        double ax = 0.0, ay = 0.0;
        if (params.has_random) {
            auto it = effects.find(r.subject);
            if (it == effects.end()) {
                const double n1 = rng.normal();
                const double n2 = rng.normal();
                it = effects
                         .emplace(r.subject, std::make_pair(params.l1 * n1,
                                                            params.l12 * n1 + params.l2 * n2))
                         .first;
            }
            ax = it->second.first;
            ay = it->second.second;
        }
        double mu = ax, nu = ay, eta = 0.0;
        for (std::size_t j = 0; j < r.z1.size(); ++j) mu += r.z1[j] * params.beta_x[j];
        for (std::size_t j = 0; j < r.z2.size(); ++j) nu += r.z2[j] * params.beta_y[j];
        for (std::size_t j = 0; j < r.zw.size(); ++j) eta += r.zw[j] * params.zeta[j];
        const double omega = std::tanh(eta);
        if (!(omega >= 0.0 && omega < 1.0))
            throw std::domain_error("simulate: row association outside the sampler domain [0, 1)");

        const auto latent = amh_draw(AmhParams(omega, mu, nu), rng);
        r.x = latent.first > th.theta ? 1 : 0;
        int y = 1;
        for (double t : th.tau)
            if (latent.second > t) ++y;
        r.y = y;
        r.weight = 1.0;
        out.latent.push_back(latent);
    }
    out.data = std::move(design);
    return out;
}

// Intercept-only design of n unit-weight rows.
inline Dataset blank_design(int n, int k_levels) {
    Dataset d;
    d.k_levels = k_levels;
    d.rows.resize(std::size_t(n));
    return d;
}

} // namespace amhfit
