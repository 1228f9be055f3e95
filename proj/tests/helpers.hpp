#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "amhfit/rng.hpp"

namespace testutil {

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Tensor-product Simpson over [a,b] x [a,b].
inline double simpson2d(const std::function<double(double, double)>& f, double a, double b,
                        int n) {
    return simpson(
        [&](double u) { return simpson([&](double v) { return f(u, v); }, a, b, n); }, a, b, n);
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
};

inline MeanVar mean_var(const std::vector<double>& v) {
    MeanVar r;
    for (double x : v) r.mean += x;
    r.mean /= double(v.size());
    for (double x : v) r.var += (x - r.mean) * (x - r.mean);
    r.var /= double(v.size());
    return r;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const MeanVar ma = mean_var(a), mb = mean_var(b);
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
    c /= double(a.size());
    return c / std::sqrt(ma.var * mb.var);
}

} // namespace testutil
