#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "amhfit/amh.hpp"
#include "amhfit/rng.hpp"

namespace amhfit {

// One draw from the latent AMH distribution via its geometric-mixture
// representation, valid for omega in (0, 1):
//
//   M ~ geom(1 - omega) on {1, 2, ...};  given M the coordinates are
//   independent maxima of M i.i.d. variables, each the minimum of a
//   geometric number of standard logistics.
//
// Both inner laws are closed under geometric min/max: the row minimum is
// logistic with location log(1 - omega), and the maximum of M such draws
// is sampled exactly by powering a uniform by 1/M before the quantile map.
// For omega == 0 the coordinates are independent logistic draws.
inline std::pair<double, double> amh_draw(const AmhParams& p, Rng& rng) {
    if (p.omega == 0.0) return {p.mu + rng.logistic(), p.nu + rng.logistic()};
    const double shift = std::log1p(-p.omega);
    const double m = double(rng.geometric(1.0 - p.omega));
    const double lx = std::log(rng.uniform()) / m; // log(U^{1/M})
    const double ly = std::log(rng.uniform()) / m;
    const double x = lx - std::log(-std::expm1(lx)); // logit(U^{1/M})
    const double y = ly - std::log(-std::expm1(ly));
    return {p.mu + shift + x, p.nu + shift + y};
}

// n i.i.d. draws whose joint cdf is amh_cdf(p, . , .). Deterministic for a
// given seed. Requires omega in [0, 1); negative-omega sampling has no
// mixture representation and is not provided.
inline std::vector<std::pair<double, double>> sample(const AmhParams& p,
                                                     std::uint64_t seed,
                                                     std::size_t n) {
    if (!(p.omega >= 0.0 && p.omega < 1.0))
        throw std::domain_error("sample: requires omega in [0, 1)");
    Rng rng(seed);
    std::vector<std::pair<double, double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(amh_draw(p, rng));
    return out;
}

} // namespace amhfit
