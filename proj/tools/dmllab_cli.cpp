// dmllab command line: seeded Monte Carlo experiments over synthetic
// causal designs, with CSV/JSON outputs meant for external plotting.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dmllab/dmllab.hpp"

namespace fs = std::filesystem;

namespace {

dmllab::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
    nlohmann::json j;
    in >> j;
    return dmllab::config_from_json(j);
}

std::vector<double> json_doubles(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw std::invalid_argument("config missing '" + key + "'");
    return j.at(key).get<std::vector<double>>();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dmllab: double machine learning simulation laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string results_path;
    std::string out_path;

    auto* run = app.add_subcommand("run", "run an experiment grid from a JSON config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();

    auto* surface = app.add_subcommand(
        "surface", "fixed-penalty lasso surface over a lambda grid (PLR on the BCH design)");
    surface->add_option("--config", config_path, "config with lambda_grid_ell/lambda_grid_m")
        ->required();

    auto* scaling =
        app.add_subcommand("scaling", "sample-size scaling study (BCH design, PLR)");
    scaling->add_option("--config", config_path, "config with n_values")->required();

    auto* dgp = app.add_subcommand("dgp", "data generation utilities");
    dgp->require_subcommand(1);
    auto* dgp_export = dgp->add_subcommand("export", "write one dataset plus its truth sidecar");
    std::string kind = "bch";
    int template_id = 1;
    std::size_t n = 0, p = 0;
    std::uint64_t seed = 1, coeff_seed = 1;
    std::string prefix = "dgp";
    double rho = 0.5, r2y = 0.5, r2d = 0.5, theta = 0.5;
    dgp_export->add_option("--kind", kind, "bch or acic_template")->default_val("bch");
    dgp_export->add_option("--template-id", template_id, "ACIC template (1..16)");
    dgp_export->add_option("--n", n, "rows (0 = template default)");
    dgp_export->add_option("--p", p, "covariates (0 = template default)");
    dgp_export->add_option("--seed", seed, "data draw seed");
    dgp_export->add_option("--coeff-seed", coeff_seed, "template coefficient seed");
    dgp_export->add_option("--rho", rho, "BCH AR(1) correlation");
    dgp_export->add_option("--r2-y", r2y, "BCH outcome-equation R^2");
    dgp_export->add_option("--r2-d", r2d, "BCH treatment-equation R^2");
    dgp_export->add_option("--theta0", theta, "BCH causal parameter");
    dgp_export->add_option("--out", prefix, "output prefix (<prefix>_data.csv, <prefix>_truth.json)");

    auto* agg = app.add_subcommand("aggregate", "aggregate a results CSV into metric rows");
    agg->add_option("results", results_path, "results.csv from a run")->required();
    agg->add_option("--out", out_path, "output CSV (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = load_config(config_path);
            const int rc = dmllab::run_experiment(cfg);
            std::cout << "wrote " << cfg.output_dir << "/results.csv, aggregate.csv, manifest.json\n";
            return rc;
        }
        if (*surface) {
            std::ifstream in(config_path);
            if (!in) throw std::invalid_argument("cannot open config '" + config_path + "'");
            nlohmann::json j;
            in >> j;
            const auto cfg = dmllab::config_from_json(j);
            const auto cells = dmllab::run_lambda_surface_in_memory(
                cfg, json_doubles(j, "lambda_grid_ell"), json_doubles(j, "lambda_grid_m"));
            fs::create_directories(cfg.output_dir);
            const auto path = fs::path(cfg.output_dir) / "surface.csv";
            std::ofstream(path) << dmllab::surface_csv(cells);
            std::cout << "wrote " << path.string() << "\n";
            return 0;
        }
        if (*scaling) {
            std::ifstream in(config_path);
            if (!in) throw std::invalid_argument("cannot open config '" + config_path + "'");
            nlohmann::json j;
            in >> j;
            const auto cfg = dmllab::config_from_json(j);
            if (!j.contains("n_values")) throw std::invalid_argument("config missing 'n_values'");
            const auto n_values = j.at("n_values").get<std::vector<std::size_t>>();
            const auto cells = dmllab::run_scaling_study_in_memory(cfg, n_values);
            fs::create_directories(cfg.output_dir);
            const auto path = fs::path(cfg.output_dir) / "scaling.csv";
            std::ofstream(path) << dmllab::scaling_csv(cells);
            std::cout << "wrote " << path.string() << "\n";
            return 0;
        }
        if (*dgp_export) {
            dmllab::DgpSpec spec;
            spec.kind = kind == "bch" ? dmllab::DgpKind::bch : dmllab::DgpKind::acic_template;
            if (kind != "bch" && kind != "acic_template")
                throw std::invalid_argument("--kind must be bch or acic_template");
            spec.template_id = template_id;
            spec.n = n;
            spec.p = p;
            spec.coeff_seed = coeff_seed;
            spec.bch_rho = rho;
            spec.bch_r2_y = r2y;
            spec.bch_r2_d = r2d;
            spec.bch_theta = theta;
            const auto gen = dmllab::generate(spec, dmllab::RngStream(seed));
            std::ofstream(prefix + "_data.csv") << dmllab::dataset_csv(gen.data);
            std::ofstream(prefix + "_truth.json") << dmllab::truth_json(gen).dump(2) << '\n';
            std::cout << "wrote " << prefix << "_data.csv and " << prefix << "_truth.json\n";
            return 0;
        }
        if (*agg) {
            std::ifstream in(results_path);
            if (!in) throw std::invalid_argument("cannot open '" + results_path + "'");
            const auto results = dmllab::read_results_csv(in);
            const std::string csv = dmllab::aggregate_csv_from_results(results);
            if (out_path.empty()) {
                std::cout << csv;
            } else {
                std::ofstream(out_path) << csv;
                std::cout << "wrote " << out_path << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
