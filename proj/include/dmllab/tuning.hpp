#ifndef DMLLAB_TUNING_HPP
#define DMLLAB_TUNING_HPP

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dmllab/dataset.hpp"
#include "dmllab/errors.hpp"
#include "dmllab/folds.hpp"
#include "dmllab/learners/fit.hpp"

namespace dmllab {

enum class TuningScheme { full_sample, split_sample, on_folds };
enum class ModelKind { plr, irm };

inline const char* scheme_name(TuningScheme s) {
    switch (s) {
        case TuningScheme::full_sample: return "full_sample";
        case TuningScheme::split_sample: return "split_sample";
        case TuningScheme::on_folds: return "on_folds";
    }
    return "?";
}

inline const char* model_name(ModelKind m) { return m == ModelKind::plr ? "plr" : "irm"; }

/// Explicit hyperparameter grid for one learner family.
struct SearchSpace {
    LearnerFamily family = LearnerFamily::tree;
    std::vector<std::map<std::string, double>> grid;
};

struct GridSearchResult {
    LearnerConfig best;
    double cv_loss = 0.0;
    std::vector<std::pair<LearnerConfig, double>> table;
    std::size_t failed_points = 0;
};

namespace detail {
inline double holdout_loss_of(const std::vector<double>& pred, const std::vector<double>& y,
                              const std::vector<std::size_t>& idx, Task task) {
    double loss = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (task == Task::probability) {
            const double p = clamp_prob(pred[i]);
            loss -= y[idx[i]] * std::log(p) + (1.0 - y[idx[i]]) * std::log(1.0 - p);
        } else {
            const double d = pred[i] - y[idx[i]];
            loss += d * d;
        }
    }
    return loss / static_cast<double>(idx.size());
}
} // namespace detail

/// Exhaustive CV grid search. Loss is MSE (regression) or log-loss
/// (probability) averaged over folds. A grid point whose fit throws is
/// scored +inf rather than aborting the search; ties break to the
/// earlier grid entry. The full table is returned for the audit trail.
inline GridSearchResult grid_search_cv(const SearchSpace& space, const Matrix& x,
                                       const std::vector<double>& y, Task task,
                                       std::size_t folds, RngStream rng) {
    if (space.grid.empty()) throw std::invalid_argument("grid_search_cv: empty grid");
    const FoldPartition part = make_kfold(y.size(), folds, rng.derive(hash_tag("gridcv")));

    GridSearchResult out;
    out.table.reserve(space.grid.size());
    std::size_t best = 0;
    for (std::size_t g = 0; g < space.grid.size(); ++g) {
        LearnerConfig cfg;
        cfg.family = space.family;
        cfg.task = task;
        cfg.hyperparams = space.grid[g];
        double loss = 0.0;
        try {
            for (std::size_t k = 0; k < part.k(); ++k) {
                const auto train_idx = part.complement(k);
                const Matrix xt = x.take_rows(train_idx);
                std::vector<double> yt(train_idx.size());
                for (std::size_t i = 0; i < train_idx.size(); ++i) yt[i] = y[train_idx[i]];
                const FittedModel fitted = fit_model(cfg, xt, yt, rng.derive(hash_tag("grid"), g, k));
                const auto pred = fitted.predict(x.take_rows(part.folds[k]));
                loss += detail::holdout_loss_of(pred, y, part.folds[k], task);
            }
            loss /= static_cast<double>(part.k());
        } catch (const std::exception&) {
            loss = std::numeric_limits<double>::infinity();
            ++out.failed_points;
        }
        out.table.emplace_back(cfg, loss);
        if (loss < out.table[best].second) best = g;
    }
    out.best = out.table[best].first;
    out.cv_loss = out.table[best].second;
    return out;
}

/// Experiment-level learner description. Tunable labels: "lasso"
/// (penalty by internal CV), "forest" (depth grid 4/5/6, 100 trees),
/// "boosting" (rounds up to 100 by early stopping; depth 2, rate 0.1),
/// "stacking" (stacks the three tuned learners), "linear" (OLS or
/// logistic by task, nothing to tune). tune=false freezes `fixed`.
struct LearnerSpec {
    std::string label;
    LearnerFamily family = LearnerFamily::ols;
    bool tune = true;
    std::map<std::string, double> fixed;

    static LearnerSpec named(const std::string& label) {
        LearnerSpec s;
        s.label = label;
        if (label == "lasso") s.family = LearnerFamily::cv_lasso;
        else if (label == "forest") s.family = LearnerFamily::random_forest;
        else if (label == "boosting") s.family = LearnerFamily::gradient_boosting;
        else if (label == "stacking") s.family = LearnerFamily::stacking;
        else if (label == "linear") { s.family = LearnerFamily::ols; s.tune = false; }
        else throw std::invalid_argument("unknown learner label '" + label + "'");
        return s;
    }
};

/// Per-nuisance learner specs; the usual case applies one spec to both.
struct NuisanceSpecs {
    LearnerSpec outcome;
    LearnerSpec treatment;

    NuisanceSpecs() = default;
    explicit NuisanceSpecs(LearnerSpec both) : outcome(both), treatment(std::move(both)) {}
    NuisanceSpecs(LearnerSpec o, LearnerSpec t) : outcome(std::move(o)), treatment(std::move(t)) {}
};

struct TuneResult {
    LearnerConfig config;
    double cv_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<std::string, double>> table; // audit: point label -> loss
};

namespace detail {

inline LearnerConfig concrete_linear(Task task) {
    LearnerConfig cfg;
    cfg.family = task == Task::probability ? LearnerFamily::logistic : LearnerFamily::ols;
    cfg.task = task;
    return cfg;
}

inline TuneResult tune_one(const LearnerSpec& spec, const Matrix& x, const std::vector<double>& y,
                           Task task, std::size_t folds, RngStream rng);

inline TuneResult tune_stacking(const LearnerSpec& spec, const Matrix& x,
                                const std::vector<double>& y, Task task, std::size_t folds,
                                RngStream rng) {
    TuneResult out;
    out.config.family = LearnerFamily::stacking;
    out.config.task = task;
    out.config.hyperparams = {{"folds", static_cast<double>(folds)}};
    const char* base_labels[] = {"lasso", "forest", "boosting"};
    for (const char* label : base_labels) {
        LearnerSpec base = LearnerSpec::named(label);
        const TuneResult r = tune_one(base, x, y, task, folds, rng.derive(hash_tag(label)));
        out.config.base_configs.push_back(r.config);
    }
    (void)spec;
    return out;
}

inline TuneResult tune_one(const LearnerSpec& spec, const Matrix& x, const std::vector<double>& y,
                           Task task, std::size_t folds, RngStream rng) {
    TuneResult out;
    if (!spec.tune) {
        if (spec.label == "linear") {
            out.config = concrete_linear(task);
        } else {
            out.config.family = spec.family;
            out.config.task = task;
            out.config.hyperparams = spec.fixed;
        }
        out.config.validate();
        return out;
    }
    switch (spec.family) {
        case LearnerFamily::cv_lasso:
        case LearnerFamily::lasso: {
            // probability-task propensities still fit fine as a linear
            // probability lasso; predictions are clamped downstream
            const std::size_t grid_size = static_cast<std::size_t>(
                spec.fixed.count("grid_size") ? spec.fixed.at("grid_size") : 100);
            const FittedModel cv = fit_cv_lasso(x, y, folds, grid_size, rng, 1e-8, 2000, task);
            out.config.family = LearnerFamily::lasso;
            out.config.task = task;
            out.config.hyperparams = {{"lambda", lasso_lambda(cv)}};
            const auto& curve = lasso_cv_curve(cv);
            out.cv_loss = std::numeric_limits<double>::infinity();
            for (const auto& [lam, loss] : curve) {
                out.table.emplace_back("lambda=" + std::to_string(lam), loss);
                out.cv_loss = std::min(out.cv_loss, loss);
            }
            break;
        }
        case LearnerFamily::random_forest: {
            SearchSpace space;
            space.family = LearnerFamily::random_forest;
            for (double depth : {4.0, 5.0, 6.0}) {
                std::map<std::string, double> point = spec.fixed;
                point.erase("grid_size");
                point["max_depth"] = depth;
                if (!point.count("n_trees")) point["n_trees"] = 100.0;
                space.grid.push_back(std::move(point));
            }
            const GridSearchResult r = grid_search_cv(space, x, y, task, folds, rng);
            out.config = r.best;
            out.cv_loss = r.cv_loss;
            for (const auto& [cfg, loss] : r.table)
                out.table.emplace_back("max_depth=" + std::to_string(cfg.require("max_depth")),
                                       loss);
            break;
        }
        case LearnerFamily::gradient_boosting: {
            LearnerConfig probe;
            probe.family = LearnerFamily::gradient_boosting;
            probe.task = task;
            probe.hyperparams = spec.fixed;
            probe.hyperparams.erase("grid_size");
            probe.hyperparams["early_stop_folds"] = static_cast<double>(folds);
            const FittedModel fitted = fit_model(probe, x, y, rng);
            out.config = fitted.config();
            // the refit's round count is the tuned value; keep it fixed
            out.config.hyperparams["rounds"] = fitted.config().get("rounds", 0.0);
            const auto& curve = boosting_validation_curve(fitted);
            out.cv_loss = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < curve.size(); ++r) {
                out.table.emplace_back("rounds=" + std::to_string(r), curve[r]);
                out.cv_loss = std::min(out.cv_loss, curve[r]);
            }
            break;
        }
        case LearnerFamily::stacking:
            return tune_stacking(spec, x, y, task, folds, rng);
        case LearnerFamily::ols:
        case LearnerFamily::logistic:
            out.config = concrete_linear(task);
            break;
        case LearnerFamily::tree: {
            SearchSpace space;
            space.family = LearnerFamily::tree;
            for (double depth : {4.0, 5.0, 6.0}) {
                std::map<std::string, double> point = spec.fixed;
                point["max_depth"] = depth;
                space.grid.push_back(std::move(point));
            }
            const GridSearchResult r = grid_search_cv(space, x, y, task, folds, rng);
            out.config = r.best;
            out.cv_loss = r.cv_loss;
            break;
        }
    }
    out.config.validate();
    return out;
}

} // namespace detail

/// Per-nuisance configs chosen by one of the three data-splitting
/// schemes, replicated or varying per cross-fitting fold.
struct NuisanceConfigs {
    LearnerConfig outcome;   // ell (PLR) or g (IRM)
    LearnerConfig treatment; // m
};

struct TuningAuditEntry {
    std::size_t fold = 0;
    std::string role;
    LearnerConfig config;
    double cv_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<std::string, double>> table;
};

struct TuningOutcome {
    TuningScheme scheme = TuningScheme::full_sample;
    std::vector<NuisanceConfigs> per_fold;
    std::vector<double> cv_losses; // per fold: outcome + treatment best CV losses
    std::vector<std::size_t> estimation_indices; // split_sample only
    std::vector<TuningAuditEntry> audit;

    const NuisanceConfigs& config_for(std::size_t fold) const { return per_fold.at(fold); }
    std::size_t k() const { return per_fold.size(); }
};

namespace detail {

struct RoleProblem {
    Matrix x;
    std::vector<double> y;
    Task task;
};

inline RoleProblem outcome_problem(const Dataset& data, ModelKind kind) {
    if (kind == ModelKind::plr) return {data.x, data.y, Task::regression};
    return {data.x.with_prepended_column(data.d), data.y, Task::regression};
}

inline RoleProblem treatment_problem(const Dataset& data, ModelKind kind) {
    const bool binary = data.treatment_kind == TreatmentKind::binary;
    if (kind == ModelKind::irm && !binary)
        throw InvalidModelError("IRM requires a binary treatment");
    return {data.x, data.d, binary ? Task::probability : Task::regression};
}

inline std::pair<NuisanceConfigs, double> tune_both_roles(const NuisanceSpecs& specs,
                                                          const Dataset& data, ModelKind kind,
                                                          std::size_t folds, RngStream rng,
                                                          std::size_t fold_tag,
                                                          std::vector<TuningAuditEntry>& audit) {
    const RoleProblem op = outcome_problem(data, kind);
    const RoleProblem tp = treatment_problem(data, kind);
    const TuneResult ores =
        tune_one(specs.outcome, op.x, op.y, op.task, folds, rng.derive(hash_tag("outcome")));
    const TuneResult tres =
        tune_one(specs.treatment, tp.x, tp.y, tp.task, folds, rng.derive(hash_tag("treatment")));
    audit.push_back({fold_tag, "outcome", ores.config, ores.cv_loss, ores.table});
    audit.push_back({fold_tag, "treatment", tres.config, tres.cv_loss, tres.table});
    double total = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(ores.cv_loss) && std::isfinite(tres.cv_loss))
        total = ores.cv_loss + tres.cv_loss;
    return {{ores.config, tres.config}, total};
}

} // namespace detail

/// Tune on the whole sample with CV splits independent of the DML
/// cross-fitting partition; one config per nuisance for every fold.
inline TuningOutcome tune_full_sample(const NuisanceSpecs& specs, const Dataset& data,
                                      ModelKind kind, std::size_t k_folds, RngStream rng,
                                      std::size_t tuning_folds = 5) {
    TuningOutcome out;
    out.scheme = TuningScheme::full_sample;
    auto [configs, loss] =
        detail::tune_both_roles(specs, data, kind, tuning_folds, rng, 0, out.audit);
    out.per_fold.assign(k_folds, configs);
    out.cv_losses.assign(k_folds, loss);
    return out;
}

/// Tune with CV on a random half; the other half is reserved for
/// estimation, so the tuning and causal-estimation samples never
/// overlap.
inline TuningOutcome tune_split_sample(const NuisanceSpecs& specs, const Dataset& data,
                                       ModelKind kind, std::size_t k_folds, RngStream rng,
                                       std::size_t tuning_folds = 5) {
    if (data.n() < 8) throw SchemeInfeasibleError("split_sample needs n >= 8");
    auto [tune_idx, est_idx] = split_half(data.n(), rng.derive(hash_tag("half")));
    const Dataset tune_data = subset(data, tune_idx);

    TuningOutcome out;
    out.scheme = TuningScheme::split_sample;
    auto [configs, loss] = detail::tune_both_roles(specs, tune_data, kind, tuning_folds,
                                                   rng.derive(hash_tag("tune")), 0, out.audit);
    out.per_fold.assign(k_folds, configs);
    out.cv_losses.assign(k_folds, loss);
    out.estimation_indices = std::move(est_idx);
    return out;
}

/// Tune inside each cross-fitting fold: fold k's configs come from CV
/// on its training complement only, so configs may differ per fold.
/// Costs K times the fits of the other schemes.
inline TuningOutcome tune_on_folds(const NuisanceSpecs& specs, const Dataset& data, ModelKind kind,
                                   const FoldPartition& partition, RngStream rng,
                                   std::size_t tuning_folds = 5) {
    TuningOutcome out;
    out.scheme = TuningScheme::on_folds;
    out.per_fold.reserve(partition.k());
    for (std::size_t k = 0; k < partition.k(); ++k) {
        const Dataset train = subset(data, partition.complement(k));
        auto [configs, loss] =
            detail::tune_both_roles(specs, train, kind, tuning_folds, rng.derive(k), k, out.audit);
        out.per_fold.push_back(configs);
        out.cv_losses.push_back(loss);
    }
    return out;
}

} // namespace dmllab

#endif
