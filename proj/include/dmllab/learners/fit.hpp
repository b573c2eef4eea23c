#ifndef DMLLAB_LEARNERS_FIT_HPP
#define DMLLAB_LEARNERS_FIT_HPP

#include "dmllab/learners/boosting.hpp"
#include "dmllab/learners/forest.hpp"
#include "dmllab/learners/lasso.hpp"
#include "dmllab/learners/linear.hpp"
#include "dmllab/learners/stacking.hpp"
#include "dmllab/learners/tree.hpp"

namespace dmllab {

/// Single fitting entry point used by tuning, cross-fitting and
/// stacking. Deterministic given (config, data, rng).
inline FittedModel fit_model(const LearnerConfig& config, const Matrix& x,
                             const std::vector<double>& y, RngStream rng) {
    config.validate();
    fit_counter().fetch_add(1, std::memory_order_relaxed);
    switch (config.family) {
        case LearnerFamily::ols:
            return fit_ols(x, y);
        case LearnerFamily::logistic:
            return fit_logistic(x, y, static_cast<std::size_t>(config.get("max_iter", 200)),
                                config.get("tol", 1e-8));
        case LearnerFamily::lasso:
            return fit_lasso(x, y, config.require("lambda"), config.get("tol", 1e-8),
                             static_cast<std::size_t>(config.get("max_sweeps", 2000)),
                             config.task);
        case LearnerFamily::cv_lasso:
            return fit_cv_lasso(x, y, static_cast<std::size_t>(config.get("folds", 5)),
                                static_cast<std::size_t>(config.get("grid_size", 100)), rng,
                                config.get("tol", 1e-8),
                                static_cast<std::size_t>(config.get("max_sweeps", 2000)),
                                config.task);
        case LearnerFamily::tree:
            return fit_tree(x, y, static_cast<std::size_t>(config.require("max_depth")),
                            static_cast<std::size_t>(config.get("min_leaf", 5)), config.task);
        case LearnerFamily::random_forest:
            return fit_random_forest(x, y, static_cast<std::size_t>(config.require("max_depth")),
                                     static_cast<std::size_t>(config.get("n_trees", 100)),
                                     static_cast<std::size_t>(config.get("mtry", 0)), rng,
                                     config.task,
                                     static_cast<std::size_t>(config.get("min_leaf", 5)),
                                     config.get("bootstrap", 1.0) != 0.0);
        case LearnerFamily::gradient_boosting: {
            const double fixed = config.get("rounds", -1.0);
            return fit_gradient_boosting(
                x, y, static_cast<std::size_t>(config.get("max_depth", 2)),
                config.get("learning_rate", 0.1),
                static_cast<std::size_t>(config.get("max_rounds", 100)),
                static_cast<std::size_t>(config.get("early_stop_folds", 5)), rng, config.task,
                static_cast<std::size_t>(config.get("min_leaf", 5)),
                fixed < 0.0 ? -1 : static_cast<long>(fixed),
                static_cast<std::size_t>(config.get("patience", 10)));
        }
        case LearnerFamily::stacking:
            return fit_stacking(config.base_configs, x, y,
                                static_cast<std::size_t>(config.get("folds", 5)), rng,
                                config.task);
    }
    throw std::invalid_argument("fit_model: unknown family");
}

inline nlohmann::json model_to_json(const FittedModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["family"] = family_name(model.config().family);
    j["task"] = model.config().task == Task::regression ? "regression" : "probability";
    j["hyperparams"] = model.config().hyperparams;
    j["feature_count"] = model.feature_count();
    j["parameters"] = model.impl()->parameters_json();
    if (model.has_warning()) j["warning"] = model.warning();
    return j;
}

} // namespace dmllab

#endif
