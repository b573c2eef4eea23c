#ifndef DMLLAB_RUNNER_HPP
#define DMLLAB_RUNNER_HPP

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dmllab/dgp.hpp"
#include "dmllab/metrics.hpp"
#include "dmllab/selection.hpp"

namespace dmllab {

struct LearnerEntry {
    std::string label;
    LearnerSpec spec;
};

struct ExperimentConfig {
    DgpSpec dgp;
    std::vector<ModelKind> models{ModelKind::plr};
    std::vector<LearnerEntry> learners;
    std::vector<TuningScheme> schemes{TuningScheme::full_sample};
    std::size_t k_folds = 5;
    std::size_t reps = 20;
    std::uint64_t master_seed = 1;
    double clip = 0.01;
    double level = 0.95;
    std::size_t workers = 1;
    std::string output_dir = "out";
    Aggregation aggregation = Aggregation::pooled;
    IrmGFit irm_g_fit = IrmGFit::pooled;
    std::size_t tuning_folds = 5;

    void validate() const {
        if (reps < 1) throw std::invalid_argument("config: reps must be >= 1");
        if (learners.empty()) throw std::invalid_argument("config: no learners");
        if (models.empty()) throw std::invalid_argument("config: no models");
        if (schemes.empty()) throw std::invalid_argument("config: no schemes");
        if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("config: level in (0,1)");
        if (k_folds < 2) throw std::invalid_argument("config: k_folds must be >= 2");
    }
};

// ---------------------------------------------------------------------
// config JSON (field names mirror ExperimentConfig)
// ---------------------------------------------------------------------

inline ModelKind model_from_name(const std::string& s) {
    if (s == "plr") return ModelKind::plr;
    if (s == "irm") return ModelKind::irm;
    throw std::invalid_argument("unknown model '" + s + "'");
}

inline TuningScheme scheme_from_name(const std::string& s) {
    if (s == "full_sample") return TuningScheme::full_sample;
    if (s == "split_sample") return TuningScheme::split_sample;
    if (s == "on_folds") return TuningScheme::on_folds;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

inline LearnerFamily family_from_name(const std::string& s) {
    for (LearnerFamily f : {LearnerFamily::lasso, LearnerFamily::cv_lasso, LearnerFamily::tree,
                            LearnerFamily::random_forest, LearnerFamily::gradient_boosting,
                            LearnerFamily::ols, LearnerFamily::logistic, LearnerFamily::stacking})
        if (s == family_name(f)) return f;
    throw std::invalid_argument("unknown learner family '" + s + "'");
}

inline LearnerEntry learner_entry_from_json(const nlohmann::json& j) {
    LearnerEntry e;
    e.label = j.at("label").get<std::string>();
    if (j.contains("family")) {
        e.spec.label = e.label;
        e.spec.family = family_from_name(j.at("family").get<std::string>());
        e.spec.tune = j.value("tune", true);
        if (j.contains("params"))
            for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
                e.spec.fixed[it.key()] = it.value().get<double>();
    } else {
        e.spec = LearnerSpec::named(e.label);
        if (j.contains("params"))
            for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
                e.spec.fixed[it.key()] = it.value().get<double>();
    }
    return e;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const auto& d = j.at("dgp");
    const std::string kind = d.value("kind", std::string("bch"));
    cfg.dgp.kind = kind == "bch" ? DgpKind::bch : DgpKind::acic_template;
    if (kind != "bch" && kind != "acic_template")
        throw std::invalid_argument("dgp.kind must be bch or acic_template");
    cfg.dgp.template_id = d.value("template_id", 1);
    cfg.dgp.n = d.value("n", 0);
    cfg.dgp.p = d.value("p", 0);
    cfg.dgp.coeff_seed = d.value("coeff_seed", 1);
    cfg.dgp.bch_rho = d.value("rho", 0.5);
    cfg.dgp.bch_r2_y = d.value("r2_y", 0.5);
    cfg.dgp.bch_r2_d = d.value("r2_d", 0.5);
    cfg.dgp.bch_theta = d.value("theta0", 0.5);

    cfg.models.clear();
    for (const auto& m : j.at("models")) cfg.models.push_back(model_from_name(m));
    for (const auto& l : j.at("learners")) cfg.learners.push_back(learner_entry_from_json(l));
    cfg.schemes.clear();
    for (const auto& s : j.at("schemes")) cfg.schemes.push_back(scheme_from_name(s));
    cfg.k_folds = j.value("k_folds", 5);
    cfg.reps = j.value("reps", 20);
    cfg.master_seed = j.value("master_seed", 1);
    cfg.clip = j.value("clip", 0.01);
    cfg.level = j.value("level", 0.95);
    cfg.workers = j.value("workers", 1);
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.aggregation =
        j.value("aggregation", std::string("pooled")) == "per_fold" ? Aggregation::per_fold
                                                                    : Aggregation::pooled;
    cfg.irm_g_fit =
        j.value("irm_g_fit", std::string("pooled")) == "split" ? IrmGFit::split : IrmGFit::pooled;
    cfg.tuning_folds = j.value("tuning_folds", 5);
    if (const char* env = std::getenv("DMLLAB_WORKERS")) cfg.workers = std::strtoul(env, nullptr, 10);
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["dgp"] = {{"kind", cfg.dgp.kind == DgpKind::bch ? "bch" : "acic_template"},
                {"template_id", cfg.dgp.template_id},
                {"n", cfg.dgp.n},
                {"p", cfg.dgp.p},
                {"coeff_seed", cfg.dgp.coeff_seed},
                {"rho", cfg.dgp.bch_rho},
                {"r2_y", cfg.dgp.bch_r2_y},
                {"r2_d", cfg.dgp.bch_r2_d},
                {"theta0", cfg.dgp.bch_theta}};
    j["models"] = nlohmann::json::array();
    for (ModelKind m : cfg.models) j["models"].push_back(model_name(m));
    j["learners"] = nlohmann::json::array();
    for (const auto& l : cfg.learners) {
        nlohmann::json e = {{"label", l.label},
                            {"family", family_name(l.spec.family)},
                            {"tune", l.spec.tune}};
        if (!l.spec.fixed.empty()) e["params"] = l.spec.fixed;
        j["learners"].push_back(e);
    }
    j["schemes"] = nlohmann::json::array();
    for (TuningScheme s : cfg.schemes) j["schemes"].push_back(scheme_name(s));
    j["k_folds"] = cfg.k_folds;
    j["reps"] = cfg.reps;
    j["master_seed"] = cfg.master_seed;
    j["clip"] = cfg.clip;
    j["level"] = cfg.level;
    j["workers"] = cfg.workers;
    j["output_dir"] = cfg.output_dir;
    j["aggregation"] = cfg.aggregation == Aggregation::per_fold ? "per_fold" : "pooled";
    j["irm_g_fit"] = cfg.irm_g_fit == IrmGFit::split ? "split" : "pooled";
    j["tuning_folds"] = cfg.tuning_folds;
    return j;
}

// ---------------------------------------------------------------------
// deterministic formatting
// ---------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double_or_nan(const std::string& s) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

} // namespace detail

// ---------------------------------------------------------------------
// single-cell pipeline
// ---------------------------------------------------------------------

/// Deterministic seed stream for one (rep, model, learner, scheme) cell;
/// adding a learner or scheme never shifts any other cell's draws.
inline RngStream cell_stream(std::uint64_t master_seed, const DgpSpec& dgp, std::size_t rep,
                             ModelKind model, const std::string& learner, TuningScheme scheme) {
    return RngStream(master_seed, hash_tag("cell"))
        .derive(hash_tag(dgp.label()))
        .derive(rep)
        .derive(hash_tag(model_name(model)))
        .derive(hash_tag(learner))
        .derive(hash_tag(scheme_name(scheme)));
}

inline FoldPartition partition_for(const Dataset& data, ModelKind model, std::size_t k,
                                   RngStream rng) {
    if (model == ModelKind::irm && data.treatment_kind == TreatmentKind::binary)
        return make_stratified_kfold(data.d, k, rng);
    return make_kfold(data.n(), k, rng);
}

struct CellOutput {
    RepetitionResult result;
    std::string error_code;
    nlohmann::json tuning_audit;
};

namespace detail {

inline nlohmann::json config_brief(const LearnerConfig& cfg) {
    nlohmann::json j = {{"family", family_name(cfg.family)}, {"hyperparams", cfg.hyperparams}};
    if (!cfg.base_configs.empty()) {
        j["bases"] = nlohmann::json::array();
        for (const auto& b : cfg.base_configs) j["bases"].push_back(config_brief(b));
    }
    return j;
}

inline nlohmann::json audit_json(const TuningOutcome& outcome, bool include_tables) {
    nlohmann::json j;
    j["scheme"] = scheme_name(outcome.scheme);
    j["estimation_size"] = outcome.estimation_indices.size();
    j["per_fold"] = nlohmann::json::array();
    for (std::size_t k = 0; k < outcome.k(); ++k)
        j["per_fold"].push_back({{"outcome", config_brief(outcome.config_for(k).outcome)},
                                 {"treatment", config_brief(outcome.config_for(k).treatment)},
                                 {"cv_loss", outcome.cv_losses[k]}});
    if (include_tables) {
        j["tables"] = nlohmann::json::array();
        for (const auto& e : outcome.audit) {
            nlohmann::json t = {{"fold", e.fold}, {"role", e.role}, {"cv_loss", e.cv_loss}};
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& [label, loss] : e.table) rows.push_back({label, loss});
            t["table"] = rows;
            j["tables"].push_back(std::move(t));
        }
    }
    return j;
}

inline std::string error_slug(const std::exception& e) {
    if (dynamic_cast<const StratificationError*>(&e)) return "stratification-infeasible";
    if (dynamic_cast<const SchemeInfeasibleError*>(&e)) return "scheme-infeasible";
    if (dynamic_cast<const FoldDegenerateError*>(&e)) return "fold-degenerate";
    if (dynamic_cast<const DegenerateDesignError*>(&e)) return "degenerate-design";
    if (dynamic_cast<const InvalidModelError*>(&e)) return "invalid-model";
    if (dynamic_cast<const UndefinedMetricError*>(&e)) return "undefined-metric";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid-argument";
    return "error";
}

} // namespace detail

/// Tune, cross-fit and estimate one cell on a shared repetition dataset.
inline CellOutput run_dml_cell(const GeneratedData& gen, const LearnerEntry& learner,
                               ModelKind model, TuningScheme scheme, std::size_t k_folds,
                               RngStream rng, double clip, double level, Aggregation aggregation,
                               IrmGFit irm_g_fit, const CausalEstimate& oracle,
                               std::size_t tuning_folds, bool audit_tables) {
    CellOutput out;
    out.result.rep_id = 0;
    out.result.dgp = gen.spec.label();
    out.result.model_kind = model;
    out.result.learner = learner.label;
    out.result.scheme = scheme_name(scheme);
    out.result.theta0 = gen.truth.theta0;
    out.result.oracle = oracle;
    try {
        const NuisanceSpecs specs{learner.spec};
        TuningOutcome outcome;
        FoldPartition partition;
        if (scheme == TuningScheme::on_folds) {
            partition = partition_for(gen.data, model, k_folds, rng.derive(hash_tag("part")));
            outcome = tune_on_folds(specs, gen.data, model, partition,
                                    rng.derive(hash_tag("tune")), tuning_folds);
        } else if (scheme == TuningScheme::full_sample) {
            outcome = tune_full_sample(specs, gen.data, model, k_folds,
                                       rng.derive(hash_tag("tune")), tuning_folds);
            partition = partition_for(gen.data, model, k_folds, rng.derive(hash_tag("part")));
        } else {
            outcome = tune_split_sample(specs, gen.data, model, k_folds,
                                        rng.derive(hash_tag("tune")), tuning_folds);
        }

        const Dataset* est_data = &gen.data;
        Dataset est_holder;
        if (scheme == TuningScheme::split_sample) {
            est_holder = subset(gen.data, outcome.estimation_indices);
            est_data = &est_holder;
            partition = partition_for(*est_data, model, k_folds, rng.derive(hash_tag("part")));
        }

        const NuisancePredictions nuis = cross_fit_nuisances(
            *est_data, outcome, model, partition, rng.derive(hash_tag("cf")), clip, irm_g_fit);
        out.result.estimate = model == ModelKind::plr
                                  ? plr_estimate(*est_data, nuis, level, aggregation)
                                  : irm_ate_estimate(*est_data, nuis, level, aggregation);
        out.result.quality = nuisance_quality(*est_data, nuis, out.result.estimate.theta_hat);
        out.tuning_audit = detail::audit_json(outcome, audit_tables);
    } catch (const std::exception& e) {
        out.error_code = detail::error_slug(e);
        out.tuning_audit = nlohmann::json{{"error", e.what()}};
    }
    return out;
}

// ---------------------------------------------------------------------
// results CSV
// ---------------------------------------------------------------------

inline const char* kResultsHeader =
    "rep_id,dgp,model,learner,scheme,theta_hat,std_error,ci_low,ci_high,theta0,"
    "oracle_theta_hat,rmse_m,rmse_ell,rmse_g,combined_loss,predictive_loss_y,error_code";

inline std::string result_row_csv(std::size_t rep_id, const RepetitionResult& r,
                                  const std::string& error_code) {
    using detail::format_double;
    std::ostringstream os;
    os << rep_id << ',' << r.dgp << ',' << model_name(r.model_kind) << ',' << r.learner << ','
       << r.scheme << ',';
    if (error_code.empty()) {
        os << format_double(r.estimate.theta_hat) << ',' << format_double(r.estimate.std_error)
           << ',' << format_double(r.estimate.ci_low) << ',' << format_double(r.estimate.ci_high);
    } else {
        os << ",,,";
    }
    os << ',' << format_double(r.theta0) << ',' << format_double(r.oracle.theta_hat) << ',';
    if (error_code.empty()) {
        os << format_double(r.quality.rmse_m) << ',' << format_double(r.quality.rmse_ell) << ','
           << format_double(r.quality.rmse_g) << ',' << format_double(r.quality.combined_loss)
           << ',' << format_double(r.quality.predictive_loss_y);
    } else {
        os << ",,,,";
    }
    os << ',' << error_code;
    return os.str();
}

/// Parse a results CSV back into repetition results (estimate rows only).
inline std::vector<RepetitionResult> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kResultsHeader)
        throw std::invalid_argument("results CSV: unexpected header");
    std::vector<RepetitionResult> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 17) throw std::invalid_argument("results CSV: bad row");
        if (cells[3] == "oracle" || !cells[16].empty()) continue;
        RepetitionResult r;
        r.rep_id = std::stoul(cells[0]);
        r.dgp = cells[1];
        r.model_kind = model_from_name(cells[2]);
        r.learner = cells[3];
        r.scheme = cells[4];
        r.estimate.theta_hat = detail::parse_double_or_nan(cells[5]);
        r.estimate.std_error = detail::parse_double_or_nan(cells[6]);
        r.estimate.ci_low = detail::parse_double_or_nan(cells[7]);
        r.estimate.ci_high = detail::parse_double_or_nan(cells[8]);
        r.theta0 = detail::parse_double_or_nan(cells[9]);
        r.oracle.theta_hat = detail::parse_double_or_nan(cells[10]);
        r.quality.rmse_m = detail::parse_double_or_nan(cells[11]);
        r.quality.rmse_ell = detail::parse_double_or_nan(cells[12]);
        r.quality.rmse_g = detail::parse_double_or_nan(cells[13]);
        r.quality.combined_loss = detail::parse_double_or_nan(cells[14]);
        r.quality.predictive_loss_y = detail::parse_double_or_nan(cells[15]);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string aggregate_csv_from_results(const std::vector<RepetitionResult>& results) {
    using detail::format_double;
    std::map<std::tuple<std::string, std::string, std::string, std::string>,
             std::vector<RepetitionResult>>
        groups;
    for (const auto& r : results)
        groups[{r.dgp, model_name(r.model_kind), r.learner, r.scheme}].push_back(r);
    std::ostringstream os;
    os << "dgp,model,learner,scheme,rrmse,rrmse_minus_1,mean_bias,std_dev,coverage,"
          "mean_combined_loss,mean_predictive_loss_y,reps\n";
    for (const auto& [key, rows] : groups) {
        MetricsRecord m;
        std::string note;
        try {
            m = aggregate(rows);
        } catch (const UndefinedMetricError&) {
            m.reps = rows.size();
            m.rrmse = m.rrmse_minus_1 = std::numeric_limits<double>::quiet_NaN();
        }
        os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
           << std::get<3>(key) << ',' << format_double(m.rrmse) << ','
           << format_double(m.rrmse_minus_1) << ',' << format_double(m.mean_bias) << ','
           << format_double(m.std_dev) << ',' << format_double(m.coverage) << ','
           << format_double(m.mean_combined_loss) << ',' << format_double(m.mean_predictive_loss)
           << ',' << m.reps << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------
// experiment driver
// ---------------------------------------------------------------------

namespace detail {

struct CellTask {
    std::size_t rep = 0;
    std::size_t model_i = 0, learner_i = 0, scheme_i = 0;
};

/// Run tasks over a bounded worker pool; results land in slot order so
/// output is identical for any worker count.
template <typename Fn>
inline void run_pool(std::size_t n_tasks, std::size_t workers, Fn&& fn) {
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(workers, n_tasks);
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

} // namespace detail

struct ExperimentOutput {
    std::string results_csv;
    std::string aggregate_csv;
    nlohmann::json manifest;
    std::size_t failed_cells = 0;
    std::size_t total_cells = 0;
};

/// Run the full repetition x (model, learner, scheme) grid in memory.
/// Every cell is a pure function of its derived seed, so output is
/// byte-identical for any worker count.
inline ExperimentOutput run_experiment_in_memory(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t cells_per_rep =
        cfg.models.size() * cfg.learners.size() * cfg.schemes.size();

    ExperimentOutput out;
    std::ostringstream results;
    results << kResultsHeader << '\n';
    nlohmann::json cell_manifest = nlohmann::json::array();

    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        const GeneratedData gen =
            generate(cfg.dgp, RngStream(cfg.master_seed, hash_tag("data")).derive(rep));
        std::map<std::size_t, CausalEstimate> oracles;
        std::map<std::size_t, std::string> oracle_errors;
        for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
            try {
                oracles[mi] = oracle_estimate(gen, cfg.models[mi], cfg.clip, cfg.level);
            } catch (const std::exception& e) {
                oracles[mi] = CausalEstimate{};
                oracles[mi].theta_hat = std::numeric_limits<double>::quiet_NaN();
                oracle_errors[mi] = detail::error_slug(e);
            }
        }

        std::vector<CellOutput> slots(cells_per_rep);
        std::vector<detail::CellTask> tasks;
        tasks.reserve(cells_per_rep);
        for (std::size_t mi = 0; mi < cfg.models.size(); ++mi)
            for (std::size_t li = 0; li < cfg.learners.size(); ++li)
                for (std::size_t si = 0; si < cfg.schemes.size(); ++si)
                    tasks.push_back({rep, mi, li, si});

        detail::run_pool(tasks.size(), cfg.workers, [&](std::size_t i) {
            const auto& t = tasks[i];
            const ModelKind model = cfg.models[t.model_i];
            const LearnerEntry& learner = cfg.learners[t.learner_i];
            const TuningScheme scheme = cfg.schemes[t.scheme_i];
            if (oracle_errors.count(t.model_i)) {
                slots[i].result.dgp = gen.spec.label();
                slots[i].result.model_kind = model;
                slots[i].result.learner = learner.label;
                slots[i].result.scheme = scheme_name(scheme);
                slots[i].result.theta0 = gen.truth.theta0;
                slots[i].error_code = oracle_errors.at(t.model_i);
                slots[i].result.rep_id = rep;
                return;
            }
            RngStream rng =
                cell_stream(cfg.master_seed, cfg.dgp, rep, model, learner.label, scheme);
            slots[i] = run_dml_cell(gen, learner, model, scheme, cfg.k_folds, rng, cfg.clip,
                                    cfg.level, cfg.aggregation, cfg.irm_g_fit, oracles[t.model_i],
                                    cfg.tuning_folds, rep == 0);
            slots[i].result.rep_id = rep;
        });

        for (std::size_t i = 0; i < slots.size(); ++i) {
            results << result_row_csv(rep, slots[i].result, slots[i].error_code) << '\n';
            if (!slots[i].error_code.empty()) ++out.failed_cells;
            nlohmann::json m = {{"rep", rep},
                                {"model", model_name(cfg.models[tasks[i].model_i])},
                                {"learner", cfg.learners[tasks[i].learner_i].label},
                                {"scheme", scheme_name(cfg.schemes[tasks[i].scheme_i])},
                                {"error_code", slots[i].error_code},
                                {"tuning", slots[i].tuning_audit}};
            cell_manifest.push_back(std::move(m));
        }
        // oracle rows, one per model
        for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
            RepetitionResult r;
            r.rep_id = rep;
            r.dgp = gen.spec.label();
            r.model_kind = cfg.models[mi];
            r.learner = "oracle";
            r.scheme = "-";
            r.theta0 = gen.truth.theta0;
            r.estimate = oracles[mi];
            r.oracle = oracles[mi];
            results << result_row_csv(
                           rep, r, oracle_errors.count(mi) ? oracle_errors.at(mi) : "")
                    << '\n';
        }
        out.total_cells += cells_per_rep;
    }

    out.results_csv = results.str();
    {
        std::istringstream is(out.results_csv);
        out.aggregate_csv = aggregate_csv_from_results(read_results_csv(is));
    }
    out.manifest = {{"format_version", 1},
                    {"tool", "dmllab"},
                    {"config", config_to_json(cfg)},
                    {"cells", std::move(cell_manifest)}};
    return out;
}

/// Run and persist results.csv, aggregate.csv, manifest.json (and a
/// timing line in run.log, kept out of the deterministic files).
/// Returns a nonzero exit status when more than 10% of cells failed.
inline int run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentOutput out = run_experiment_in_memory(cfg);
    fs::create_directories(cfg.output_dir);
    std::ofstream(fs::path(cfg.output_dir) / "results.csv") << out.results_csv;
    std::ofstream(fs::path(cfg.output_dir) / "aggregate.csv") << out.aggregate_csv;
    std::ofstream(fs::path(cfg.output_dir) / "manifest.json") << out.manifest.dump(2) << '\n';
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    std::ofstream(fs::path(cfg.output_dir) / "run.log", std::ios::app)
        << "cells=" << out.total_cells << " failed=" << out.failed_cells << " ms=" << ms.count()
        << '\n';
    return out.failed_cells * 10 > out.total_cells ? 1 : 0;
}

// ---------------------------------------------------------------------
// lambda surface (fixed-penalty lasso over a grid, PLR on BCH)
// ---------------------------------------------------------------------

struct SurfaceCell {
    double lambda_ell = 0.0, lambda_m = 0.0;
    double mse_theta = 0.0;
    double coverage = 0.0;
    double mean_combined_loss = 0.0;
    std::size_t reps = 0;
};

inline std::vector<SurfaceCell> run_lambda_surface_in_memory(
    const ExperimentConfig& cfg, const std::vector<double>& lambda_grid_ell,
    const std::vector<double>& lambda_grid_m) {
    if (cfg.dgp.kind != DgpKind::bch)
        throw std::invalid_argument("lambda surface runs on the bch design");
    if (lambda_grid_ell.empty() || lambda_grid_m.empty())
        throw std::invalid_argument("lambda surface: empty grid");

    std::vector<SurfaceCell> cells;
    for (double le : lambda_grid_ell)
        for (double lm : lambda_grid_m) cells.push_back({le, lm, 0, 0, 0, 0});

    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        const GeneratedData gen =
            generate(cfg.dgp, RngStream(cfg.master_seed, hash_tag("data")).derive(rep));
        const FoldPartition partition =
            make_kfold(gen.data.n(), cfg.k_folds,
                       RngStream(cfg.master_seed, hash_tag("surface-part")).derive(rep));
        detail::run_pool(cells.size(), cfg.workers, [&](std::size_t i) {
            SurfaceCell& cell = cells[i];
            TuningOutcome outcome;
            outcome.scheme = TuningScheme::full_sample;
            NuisanceConfigs nc;
            nc.outcome.family = LearnerFamily::lasso;
            nc.outcome.hyperparams = {{"lambda", cell.lambda_ell}};
            nc.treatment.family = LearnerFamily::lasso;
            nc.treatment.hyperparams = {{"lambda", cell.lambda_m}};
            outcome.per_fold.assign(cfg.k_folds, nc);
            outcome.cv_losses.assign(cfg.k_folds, 0.0);
            RngStream rng = RngStream(cfg.master_seed, hash_tag("surface-cell"))
                                .derive(rep)
                                .derive(i);
            const NuisancePredictions nuis = cross_fit_nuisances(
                gen.data, outcome, ModelKind::plr, partition, rng, cfg.clip, cfg.irm_g_fit);
            const CausalEstimate est =
                plr_estimate(gen.data, nuis, cfg.level, cfg.aggregation);
            const NuisanceQuality q = nuisance_quality(gen.data, nuis, est.theta_hat);
            const double err = est.theta_hat - gen.truth.theta0;
            cell.mse_theta += err * err;
            if (gen.truth.theta0 >= est.ci_low && gen.truth.theta0 <= est.ci_high)
                cell.coverage += 1.0;
            cell.mean_combined_loss += q.combined_loss;
            ++cell.reps;
        });
    }
    for (auto& cell : cells) {
        cell.mse_theta /= static_cast<double>(cell.reps);
        cell.coverage /= static_cast<double>(cell.reps);
        cell.mean_combined_loss /= static_cast<double>(cell.reps);
    }
    return cells;
}

inline std::string surface_csv(const std::vector<SurfaceCell>& cells) {
    std::ostringstream os;
    os << "lambda_ell,lambda_m,mse_theta,coverage,mean_combined_loss,reps\n";
    for (const auto& c : cells)
        os << detail::format_double(c.lambda_ell) << ',' << detail::format_double(c.lambda_m)
           << ',' << detail::format_double(c.mse_theta) << ',' << detail::format_double(c.coverage)
           << ',' << detail::format_double(c.mean_combined_loss) << ',' << c.reps << '\n';
    return os.str();
}

// ---------------------------------------------------------------------
// sample-size scaling study
// ---------------------------------------------------------------------

struct ScalingCell {
    std::size_t n = 0;
    std::string learner, scheme;
    double rmse_theta = 0.0;
    double mean_combined_loss = 0.0;
    std::size_t reps = 0;
};

inline std::vector<ScalingCell> run_scaling_study_in_memory(const ExperimentConfig& cfg,
                                                            const std::vector<std::size_t>& n_values) {
    if (cfg.dgp.kind != DgpKind::bch)
        throw std::invalid_argument("scaling study runs on the bch design");
    if (n_values.empty()) throw std::invalid_argument("scaling study: no sample sizes");

    std::vector<ScalingCell> cells;
    for (std::size_t n : n_values) {
        ExperimentConfig sub = cfg;
        sub.dgp.n = n;
        sub.models = {ModelKind::plr};
        const ExperimentOutput out = run_experiment_in_memory(sub);
        std::istringstream is(out.results_csv);
        const auto results = read_results_csv(is);
        std::map<std::pair<std::string, std::string>, ScalingCell> grouped;
        for (const auto& r : results) {
            if (r.learner == "oracle") continue;
            auto& cell = grouped[{r.learner, r.scheme}];
            cell.n = n;
            cell.learner = r.learner;
            cell.scheme = r.scheme;
            const double err = r.estimate.theta_hat - r.theta0;
            cell.rmse_theta += err * err;
            cell.mean_combined_loss += r.quality.combined_loss;
            ++cell.reps;
        }
        for (auto& [key, cell] : grouped) {
            cell.rmse_theta = std::sqrt(cell.rmse_theta / static_cast<double>(cell.reps));
            cell.mean_combined_loss /= static_cast<double>(cell.reps);
            cells.push_back(cell);
        }
    }
    return cells;
}

inline std::string scaling_csv(const std::vector<ScalingCell>& cells) {
    std::ostringstream os;
    os << "n,learner,scheme,rmse_theta,mean_combined_loss,reps\n";
    for (const auto& c : cells)
        os << c.n << ',' << c.learner << ',' << c.scheme << ','
           << detail::format_double(c.rmse_theta) << ','
           << detail::format_double(c.mean_combined_loss) << ',' << c.reps << '\n';
    return os.str();
}

// ---------------------------------------------------------------------
// dataset export
// ---------------------------------------------------------------------

inline std::string dataset_csv(const Dataset& data) {
    std::ostringstream os;
    os << "y,d";
    for (std::size_t j = 1; j <= data.p(); ++j) os << ",x" << j;
    os << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        os << detail::format_double(data.y[i]) << ',' << detail::format_double(data.d[i]);
        for (std::size_t j = 0; j < data.p(); ++j)
            os << ',' << detail::format_double(data.x(i, j));
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json truth_json(const GeneratedData& gen) {
    return {{"theta0", gen.truth.theta0},
            {"dgp", gen.spec.label()},
            {"n", gen.data.n()},
            {"p", gen.data.p()},
            {"coeff_seed", gen.spec.coeff_seed},
            {"ell0", gen.truth.ell0},
            {"m0", gen.truth.m0},
            {"g0_0", gen.truth.g0_0},
            {"g0_1", gen.truth.g0_1},
            {"eps", gen.truth.eps},
            {"v", gen.truth.v}};
}

} // namespace dmllab

#endif
