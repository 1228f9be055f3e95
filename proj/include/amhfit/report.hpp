#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amhfit/association.hpp"
#include "amhfit/fit.hpp"
#include "amhfit/mixed.hpp"
#include "amhfit/thresholds.hpp"
#include "amhfit/version.hpp"

namespace amhfit {

using json = nlohmann::json;

// FNV-1a over the raw bytes; recorded so a report names its input.
inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (in.get(c)) {
        h ^= std::uint64_t(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << "fnv1a:" << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

struct EstimateRow {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::string note; // e.g. the backtransform applied, or "fixed"
};

// Estimates with 95% intervals on the reporting scale. Thresholds and
// coefficients are plain Wald rows from the transformed covariance; each
// association coefficient additionally yields its tanh backtransform, and
// a random-effect block yields the implied covariance entries by the
// delta method.
inline std::vector<EstimateRow> estimate_rows(const FitResult& fit) {
    std::vector<EstimateRow> rows;
    const ParamShape& s = fit.shape;
    const Eigen::MatrixXd vr = fit.report_vcov();
    const ParamVector& p = fit.estimates;

    auto wald = [&](int idx, const std::string& name, double value) {
        const double se = std::sqrt(std::max(vr(idx, idx), 0.0));
        rows.push_back({name, value, se, value - 1.96 * se, value + 1.96 * se, ""});
    };
    wald(0, "theta", p.theta);
    for (int k = 0; k < s.n_tau; ++k)
        wald(s.tau_offset() + k, fit.names[std::size_t(s.tau_offset() + k)],
             p.tau[std::size_t(k)]);
    for (int j = 0; j < s.n_beta_x; ++j)
        wald(s.beta_x_offset() + j, fit.names[std::size_t(s.beta_x_offset() + j)],
             p.beta_x[std::size_t(j)]);
    for (int j = 0; j < s.n_beta_y; ++j)
        wald(s.beta_y_offset() + j, fit.names[std::size_t(s.beta_y_offset() + j)],
             p.beta_y[std::size_t(j)]);
    for (int j = 0; j < s.n_zeta; ++j) {
        const int idx = s.zeta_offset() + j;
        wald(idx, fit.names[std::size_t(idx)], p.zeta[std::size_t(j)]);
        const EstimateRow z = rows.back();
        std::string name = fit.names[std::size_t(idx)];
        name.replace(0, 4, "omega");
        rows.push_back({name, std::tanh(z.estimate), z.se * (1.0 - std::pow(std::tanh(z.estimate), 2)),
                        std::tanh(z.lo), std::tanh(z.hi), "interval backtransformed from the atanh scale"});
    }
    if (s.has_random) {
        const int r0 = s.random_offset();
        // positive factors get their intervals on the log scale, like omega
        // on the atanh scale, so the endpoints respect the parameter space
        for (int j = 0; j < 2; ++j) {
            const double se_log = std::sqrt(std::max(fit.vcov(r0 + j, r0 + j), 0.0));
            const double log_l = fit.free[r0 + j];
            const double value = std::exp(log_l);
            rows.push_back({j == 0 ? "l1" : "l2", value, value * se_log,
                            std::exp(log_l - 1.96 * se_log), std::exp(log_l + 1.96 * se_log),
                            "interval backtransformed from the log scale"});
        }
        wald(r0 + 2, "l12", p.l12);
        const auto derived = [&](const std::string& name,
                                 const std::function<double(const Eigen::VectorXd&)>& g) {
            const DeltaResult d = delta_method(fit, g);
            rows.push_back({name, d.value, d.se, d.lo, d.hi, "delta method"});
        };
        derived("d_x2", [r0](const Eigen::VectorXd& x) {
            const double l1 = std::exp(x[r0]);
            return l1 * l1;
        });
        derived("d_y2", [r0](const Eigen::VectorXd& x) {
            const double l2 = std::exp(x[r0 + 1]);
            return x[r0 + 2] * x[r0 + 2] + l2 * l2;
        });
        derived("d_xy", [r0](const Eigen::VectorXd& x) { return std::exp(x[r0]) * x[r0 + 2]; });
        if (!fit.boundary) // undefined once a variance component collapses
            derived("re_correlation", [r0](const Eigen::VectorXd& x) {
                const double l2 = std::exp(x[r0 + 1]), l12 = x[r0 + 2];
                return l12 / std::sqrt(l12 * l12 + l2 * l2);
            });
    }
    return rows;
}

inline json fit_to_json(const FitResult& fit) {
    json j;
    j["converged"] = fit.converged;
    j["loglik"] = fit.loglik;
    j["iterations"] = fit.iterations;
    j["gradient_norm"] = fit.grad_norm;
    j["info_singular"] = fit.info_singular;
    j["boundary"] = fit.boundary;
    j["message"] = fit.message;
    j["names"] = fit.names;
    j["shape"] = {{"n_tau", fit.shape.n_tau},
                  {"n_beta_x", fit.shape.n_beta_x},
                  {"n_beta_y", fit.shape.n_beta_y},
                  {"n_zeta", fit.shape.n_zeta},
                  {"has_random", fit.shape.has_random}};
    j["free"] = std::vector<double>(fit.free.data(), fit.free.data() + fit.free.size());
    std::vector<std::vector<double>> vc(std::size_t(fit.vcov.rows()));
    for (int i = 0; i < fit.vcov.rows(); ++i)
        vc[std::size_t(i)] = std::vector<double>(fit.vcov.row(i).begin(), fit.vcov.row(i).end());
    j["vcov_free"] = vc;

    json est = json::array();
    for (const EstimateRow& r : estimate_rows(fit))
        est.push_back({{"name", r.name},
                       {"estimate", r.estimate},
                       {"se", r.se},
                       {"lower", r.lo},
                       {"upper", r.hi},
                       {"note", r.note}});
    j["estimates"] = est;
    return j;
}

inline FitResult fit_from_json(const json& j) {
    FitResult fit;
    fit.converged = j.at("converged").get<bool>();
    fit.loglik = j.at("loglik").get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.grad_norm = j.at("gradient_norm").get<double>();
    fit.info_singular = j.at("info_singular").get<bool>();
    fit.boundary = j.at("boundary").get<bool>();
    fit.message = j.at("message").get<std::string>();
    fit.names = j.at("names").get<std::vector<std::string>>();
    const json& s = j.at("shape");
    fit.shape = ParamShape{s.at("n_tau").get<int>(), s.at("n_beta_x").get<int>(),
                           s.at("n_beta_y").get<int>(), s.at("n_zeta").get<int>(),
                           s.at("has_random").get<bool>()};
    const auto free = j.at("free").get<std::vector<double>>();
    fit.free = Eigen::Map<const Eigen::VectorXd>(free.data(), long(free.size()));
    const auto vc = j.at("vcov_free").get<std::vector<std::vector<double>>>();
    fit.vcov.resize(long(vc.size()), long(vc.size()));
    for (std::size_t i = 0; i < vc.size(); ++i)
        for (std::size_t k = 0; k < vc.size(); ++k) fit.vcov(long(i), long(k)) = vc[i][k];
    fit.estimates = from_free(fit.shape, fit.free);
    return fit;
}

inline json provenance_json(const std::string& input_path, std::uint64_t seed,
                            const std::string& command) {
    return {{"tool", "amhfit"},
            {"version", version},
            {"command", command},
            {"input", input_path},
            {"input_digest", input_path.empty() ? "" : file_digest(input_path)},
            {"seed", seed}};
}

// Aligned text table of the estimates block.
inline std::string render_estimates(const FitResult& fit) {
    std::ostringstream out;
    out << std::left << std::setw(22) << "parameter" << std::right << std::setw(14)
        << "estimate" << std::setw(14) << "2.5%" << std::setw(14) << "97.5%" << "\n";
    out << std::string(64, '-') << "\n";
    out << std::fixed << std::setprecision(4);
    for (const EstimateRow& r : estimate_rows(fit))
        out << std::left << std::setw(22) << r.name << std::right << std::setw(14) << r.estimate
            << std::setw(14) << r.lo << std::setw(14) << r.hi << "\n";
    return out.str();
}

inline std::string render_cells(const CellTable& t, const std::string& title) {
    std::ostringstream out;
    out << title << "\n" << std::fixed << std::setprecision(2);
    for (int x = 0; x <= 1; ++x) {
        out << "  x=" << x << ":";
        for (int y = 1; y <= t.k_levels; ++y) out << std::setw(9) << t.at(x, y);
        out << "\n";
    }
    return out.str();
}

} // namespace amhfit
