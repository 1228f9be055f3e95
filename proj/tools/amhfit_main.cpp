// Command-line front end: fit, predict, assoc and simulate subcommands
// around the amhfit library. Exit codes: 0 success, 1 non-convergence,
// 2 input error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amhfit/association.hpp"
#include "amhfit/csv.hpp"
#include "amhfit/fit.hpp"
#include "amhfit/mixed.hpp"
#include "amhfit/report.hpp"
#include "amhfit/simulate.hpp"

namespace {

using amhfit::json;

struct CommonArgs {
    std::string data_path;
    std::string fit_path;
    std::string out_path;
    amhfit::ModelSpec spec;
};

void add_model_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--data", args.data_path, "input CSV with a header row")->required();
    cmd->add_option("--k", args.spec.k_levels, "number of ordinal levels K");
    cmd->add_option("--x-col", args.spec.x_column, "binary outcome column (default x)");
    cmd->add_option("--y-col", args.spec.y_column, "ordinal outcome column (default y)");
    cmd->add_option("--x-covs", args.spec.z1_columns, "covariate columns for the x location")
        ->delimiter(',');
    cmd->add_option("--y-covs", args.spec.z2_columns, "covariate columns for the y location")
        ->delimiter(',');
    cmd->add_option("--omega-covs", args.spec.zw_columns,
                    "association covariates; factor:NAME expands to per-level indicators")
        ->delimiter(',');
    cmd->add_option("--weight", args.spec.weight_column, "count-weight column");
    cmd->add_flag("--random-effects", args.spec.random_effects,
                  "correlated subject intercepts integrated by quadrature");
    cmd->add_option("--subject", args.spec.subject_column, "subject id column");
    cmd->add_option("--gh-order", args.spec.gh_order, "quadrature order per dimension");
    cmd->add_option("--seed", args.spec.seed, "random seed");
}

void write_output(const std::string& out_path, const json& report) {
    if (out_path.empty()) return;
    std::ofstream out(out_path);
    out << report.dump(2) << "\n";
}

json load_fit_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw amhfit::IngestError("cannot open fit report '" + path + "'");
    json j;
    in >> j;
    return j;
}

amhfit::ModelSpec spec_from_report(const json& report) {
    amhfit::ModelSpec spec;
    const json& m = report.at("model");
    spec.k_levels = m.at("k").get<int>();
    spec.x_column = m.at("x_col").get<std::string>();
    spec.y_column = m.at("y_col").get<std::string>();
    spec.z1_columns = m.at("x_covs").get<std::vector<std::string>>();
    spec.z2_columns = m.at("y_covs").get<std::vector<std::string>>();
    spec.zw_columns = m.at("omega_covs").get<std::vector<std::string>>();
    spec.weight_column = m.at("weight_col").get<std::string>();
    spec.subject_column = m.at("subject_col").get<std::string>();
    spec.random_effects = m.at("random_effects").get<bool>();
    spec.gh_order = m.at("gh_order").get<int>();
    return spec;
}

json model_json(const amhfit::ModelSpec& spec) {
    return {{"k", spec.k_levels},
            {"x_col", spec.x_column},
            {"y_col", spec.y_column},
            {"x_covs", spec.z1_columns},
            {"y_covs", spec.z2_columns},
            {"omega_covs", spec.zw_columns},
            {"weight_col", spec.weight_column},
            {"subject_col", spec.subject_column},
            {"random_effects", spec.random_effects},
            {"gh_order", spec.gh_order}};
}

// Weighted observed and expected 2xK tables; expected cells accumulate
// per-row predicted probabilities times the row weight.
std::pair<amhfit::CellTable, amhfit::CellTable> predicted_tables(
    const amhfit::FitResult& fit, const amhfit::Dataset& data) {
    const int k = data.k_levels;
    if (fit.estimates.k_levels() != k)
        throw amhfit::IngestError("fit and data disagree on K");
    std::vector<double> obs(std::size_t(2 * k), 0.0);
    std::vector<double> exp(std::size_t(2 * k), 0.0);
    const amhfit::ParamVector& p = fit.estimates;
    const amhfit::Thresholds th(p.theta, p.tau);
    for (const amhfit::DataRow& r : data.rows) {
        obs[std::size_t(r.x) * k + r.y - 1] += r.weight;
        double mu = 0.0, nu = 0.0, eta = 0.0;
        for (std::size_t j = 0; j < r.z1.size(); ++j) mu += r.z1[j] * p.beta_x[j];
        for (std::size_t j = 0; j < r.z2.size(); ++j) nu += r.z2[j] * p.beta_y[j];
        for (std::size_t j = 0; j < r.zw.size(); ++j) eta += r.zw[j] * p.zeta[j];
        const amhfit::AmhParams ap(std::tanh(eta), mu, nu);
        for (int x = 0; x <= 1; ++x)
            for (int y = 1; y <= k; ++y)
                exp[std::size_t(x) * k + y - 1] += r.weight * amhfit::pmf(th, ap, x, y);
    }
    return {amhfit::CellTable::make(k, amhfit::CellTable::Role::counts, std::move(obs)),
            amhfit::CellTable::make(k, amhfit::CellTable::Role::counts, std::move(exp))};
}

json cells_json(const amhfit::CellTable& t) {
    json rows = json::array();
    for (int x = 0; x <= 1; ++x) {
        json row = json::array();
        for (int y = 1; y <= t.k_levels; ++y) row.push_back(t.at(x, y));
        rows.push_back(row);
    }
    return rows;
}

int cmd_fit(const CommonArgs& args) {
    const amhfit::Dataset data = amhfit::ingest_csv(args.data_path, args.spec);
    amhfit::FitResult fit;
    if (args.spec.random_effects) {
        amhfit::RandomEffectSpec re;
        re.gh_order = args.spec.gh_order;
        fit = amhfit::fit_mixed(data, args.spec, re);
    } else {
        fit = amhfit::fit(data, args.spec);
    }

    json report;
    report["provenance"] = amhfit::provenance_json(args.data_path, args.spec.seed, "fit");
    report["model"] = model_json(args.spec);
    report["data"] = {{"rows", data.rows.size()}, {"effective_n", data.total_weight()}};
    report["fit"] = amhfit::fit_to_json(fit);
    write_output(args.out_path, report);

    std::cout << "fit: " << (fit.converged ? "converged" : "NOT CONVERGED") << " (" << fit.message
              << "), loglik " << std::setprecision(10) << fit.loglik << ", "
              << fit.iterations << " iterations\n\n"
              << amhfit::render_estimates(fit);
    if (fit.boundary)
        std::cout << "note: a variance component collapsed to the boundary\n";
    return fit.converged ? 0 : 1;
}

int cmd_predict(const CommonArgs& args) {
    const json fit_report = load_fit_report(args.fit_path);
    const amhfit::ModelSpec spec = spec_from_report(fit_report);
    const amhfit::FitResult fit = amhfit::fit_from_json(fit_report.at("fit"));
    const amhfit::Dataset data = amhfit::ingest_csv(args.data_path, spec);
    const auto [obs, exp] = predicted_tables(fit, data);
    const double chi2 = amhfit::goodness_of_fit(obs, exp);

    json report;
    report["provenance"] = amhfit::provenance_json(args.data_path, spec.seed, "predict");
    report["observed"] = cells_json(obs);
    report["expected"] = cells_json(exp);
    report["chi_square"] = chi2;
    write_output(args.out_path, report);

    std::cout << amhfit::render_cells(obs, "observed counts")
              << amhfit::render_cells(exp, "predicted counts") << std::fixed
              << std::setprecision(4) << "chi-square: " << chi2 << "\n";
    return 0;
}

int cmd_assoc(const CommonArgs& args, double sigma_x, double sigma_y) {
    const json fit_report = load_fit_report(args.fit_path);
    const amhfit::ModelSpec spec = spec_from_report(fit_report);
    const amhfit::FitResult fit = amhfit::fit_from_json(fit_report.at("fit"));
    const amhfit::ParamVector& p = fit.estimates;
    const int k_levels = p.k_levels();

    json report;
    report["provenance"] = amhfit::provenance_json(args.data_path, spec.seed, "assoc");

    // predicted odds ratios with delta-method intervals on the log scale,
    // evaluated at baseline covariates; one block per association level
    // (each zeta coordinate treated as the active indicator)
    const bool have_data = !args.data_path.empty();
    std::vector<double> observed;
    if (have_data) {
        const amhfit::Dataset data = amhfit::ingest_csv(args.data_path, spec);
        std::vector<double> counts(std::size_t(2 * k_levels), 0.0);
        for (const amhfit::DataRow& r : data.rows)
            counts[std::size_t(r.x) * k_levels + r.y - 1] += r.weight;
        observed = amhfit::observed_odds_ratios(amhfit::CellTable::make(
            k_levels, amhfit::CellTable::Role::counts, std::move(counts)));
    }
    const amhfit::ParamShape shape = fit.shape;
    json or_table = json::array();
    for (int j = 0; j < shape.n_zeta; ++j) {
        if (shape.n_zeta > 1)
            std::cout << "association level " << fit.names[std::size_t(shape.zeta_offset() + j)]
                      << "\n";
        std::cout << "level   predicted OR        2.5%       97.5%"
                  << (have_data ? "   observed OR" : "") << "\n";
        for (int k = 1; k < k_levels; ++k) {
            const int zi = shape.zeta_offset() + j;
            const amhfit::DeltaResult ci = amhfit::delta_method_transformed(
                fit,
                [k, zi, shape](const Eigen::VectorXd& x) {
                    const amhfit::ParamVector q = amhfit::from_free(shape, x);
                    const amhfit::Thresholds th(q.theta, q.tau);
                    return std::log(
                        amhfit::odds_ratio(th, amhfit::AmhParams(std::tanh(x[zi])), k));
                },
                [](double v) { return std::exp(v); });
            json row = {{"k", k},
                        {"zeta", fit.names[std::size_t(zi)]},
                        {"psi", ci.value},
                        {"lower", ci.lo},
                        {"upper", ci.hi}};
            std::cout << std::setw(5) << k << std::fixed << std::setprecision(4) << std::setw(14)
                      << ci.value << std::setw(12) << ci.lo << std::setw(12) << ci.hi;
            if (have_data) {
                row["observed"] = observed[std::size_t(k) - 1];
                std::cout << std::setw(14) << observed[std::size_t(k) - 1];
            }
            std::cout << "\n";
            or_table.push_back(row);
        }
    }
    report["odds_ratios"] = or_table;

    if (fit.shape.n_zeta == 1) {
        const amhfit::IntervalEstimate cm = amhfit::latent_cross_moment(fit, 10);
        report["cross_moment"] = {
            {"estimate", cm.value}, {"lower", cm.lo}, {"upper", cm.hi}, {"n_terms", 10}};
        std::cout << "\nlatent cross moment: " << std::setprecision(4) << cm.value << "  ["
                  << cm.lo << ", " << cm.hi << "]\n";
        if (sigma_x > 0.0 && sigma_y > 0.0) {
            const double s = sigma_x * sigma_y;
            report["cross_moment_scaled"] = {
                {"estimate", s * cm.value}, {"lower", s * cm.lo}, {"upper", s * cm.hi},
                {"sigma_x", sigma_x},       {"sigma_y", sigma_y}};
            std::cout << "scaled by sigma_x*sigma_y = " << s << ": " << s * cm.value << "  ["
                      << s * cm.lo << ", " << s * cm.hi << "]\n";
        }
    }
    write_output(args.out_path, report);
    return 0;
}

struct SimulateArgs {
    int n = 1000;
    int k = 2;
    double theta = 0.0;
    std::vector<double> tau;
    double omega = 0.0;
    std::uint64_t seed = 1;
    bool latent = false;
    std::string out_path;
};

int cmd_simulate(const SimulateArgs& args) {
    amhfit::ParamVector p;
    p.theta = args.theta;
    p.tau = args.tau.empty() ? std::vector<double>{0.0} : args.tau;
    p.zeta = {std::atanh(args.omega)};
    if (int(p.tau.size()) + 1 != args.k)
        throw amhfit::IngestError("--tau must list K-1 thresholds");
    const amhfit::SimOutput sim =
        amhfit::simulate(p, amhfit::blank_design(args.n, args.k), args.seed);

    std::ostringstream buffer;
    amhfit::write_simulation_csv(buffer, sim.data, args.latent ? &sim.latent : nullptr);
    if (args.out_path.empty()) {
        std::cout << buffer.str();
    } else {
        std::ofstream out(args.out_path, std::ios::binary);
        out << buffer.str();
        std::cout << "wrote " << args.n << " draws to " << args.out_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bivariate logistic regression for paired binary/ordinal outcomes"};
    app.require_subcommand(1);

    CommonArgs fit_args;
    CLI::App* fit_cmd = app.add_subcommand("fit", "maximum-likelihood fit");
    add_model_flags(fit_cmd, fit_args);
    fit_cmd->add_option("--out", fit_args.out_path, "write the JSON report here");

    CommonArgs predict_args;
    CLI::App* predict_cmd =
        app.add_subcommand("predict", "expected cell counts and goodness of fit");
    predict_cmd->add_option("--fit", predict_args.fit_path, "JSON report from fit")->required();
    predict_cmd->add_option("--data", predict_args.data_path, "the fitted data")->required();
    predict_cmd->add_option("--out", predict_args.out_path, "write the JSON report here");

    CommonArgs assoc_args;
    double sigma_x = 0.0, sigma_y = 0.0;
    CLI::App* assoc_cmd = app.add_subcommand("assoc", "odds ratios and latent association");
    assoc_cmd->add_option("--fit", assoc_args.fit_path, "JSON report from fit")->required();
    assoc_cmd->add_option("--data", assoc_args.data_path, "data for the observed OR column");
    assoc_cmd->add_option("--sigma-x", sigma_x, "scale for the latent x standard deviation");
    assoc_cmd->add_option("--sigma-y", sigma_y, "scale for the latent y standard deviation");
    assoc_cmd->add_option("--out", assoc_args.out_path, "write the JSON report here");

    SimulateArgs sim_args;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "draw observations from the model");
    sim_cmd->add_option("--n", sim_args.n, "number of draws")->required();
    sim_cmd->add_option("--k", sim_args.k, "number of ordinal levels");
    sim_cmd->add_option("--theta", sim_args.theta, "x threshold");
    sim_cmd->add_option("--tau", sim_args.tau, "K-1 ordered y thresholds")->delimiter(',');
    sim_cmd->add_option("--omega", sim_args.omega, "association in [0, 1)");
    sim_cmd->add_option("--seed", sim_args.seed, "random seed");
    sim_cmd->add_flag("--latent", sim_args.latent, "also emit the latent pair");
    sim_cmd->add_option("--out", sim_args.out_path, "write the CSV here (default stdout)");

    try {
        app.parse(argc, argv);
        if (fit_cmd->parsed()) return cmd_fit(fit_args);
        if (predict_cmd->parsed()) return cmd_predict(predict_args);
        if (assoc_cmd->parsed()) return cmd_assoc(assoc_args, sigma_x, sigma_y);
        if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const amhfit::IngestError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const amhfit::json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
