#ifndef DMLLAB_LEARNERS_LEARNER_HPP
#define DMLLAB_LEARNERS_LEARNER_HPP

#include <atomic>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmllab/matrix.hpp"
#include "dmllab/rng.hpp"

namespace dmllab {

enum class LearnerFamily {
    lasso,
    cv_lasso,
    tree,
    random_forest,
    gradient_boosting,
    ols,
    logistic,
    stacking,
};

enum class Task { regression, probability };

inline const char* family_name(LearnerFamily f) {
    switch (f) {
        case LearnerFamily::lasso: return "lasso";
        case LearnerFamily::cv_lasso: return "cv_lasso";
        case LearnerFamily::tree: return "tree";
        case LearnerFamily::random_forest: return "random_forest";
        case LearnerFamily::gradient_boosting: return "gradient_boosting";
        case LearnerFamily::ols: return "ols";
        case LearnerFamily::logistic: return "logistic";
        case LearnerFamily::stacking: return "stacking";
    }
    return "?";
}

/// Learner family plus hyperparameters. Stacking configs additionally
/// carry the base-learner configs they combine.
struct LearnerConfig {
    LearnerFamily family = LearnerFamily::ols;
    Task task = Task::regression;
    std::map<std::string, double> hyperparams;
    std::vector<LearnerConfig> base_configs;

    double get(const std::string& key, double fallback) const {
        auto it = hyperparams.find(key);
        return it == hyperparams.end() ? fallback : it->second;
    }

    double require(const std::string& key) const {
        auto it = hyperparams.find(key);
        if (it == hyperparams.end())
            throw std::invalid_argument(std::string("LearnerConfig: missing hyperparameter '") +
                                        key + "' for family " + family_name(family));
        return it->second;
    }

    void validate() const;

    bool operator==(const LearnerConfig& o) const {
        return family == o.family && task == o.task && hyperparams == o.hyperparams &&
               base_configs == o.base_configs;
    }
};

namespace detail {
struct FamilyKeys {
    std::vector<std::string> required;
    std::vector<std::string> optional;
};

inline const FamilyKeys& family_keys(LearnerFamily f) {
    static const std::map<LearnerFamily, FamilyKeys> keys = {
        {LearnerFamily::lasso, {{"lambda"}, {"tol", "max_sweeps"}}},
        {LearnerFamily::cv_lasso, {{}, {"folds", "grid_size", "tol", "max_sweeps"}}},
        {LearnerFamily::tree, {{"max_depth"}, {"min_leaf"}}},
        {LearnerFamily::random_forest,
         {{"max_depth"}, {"n_trees", "mtry", "min_leaf", "bootstrap"}}},
        {LearnerFamily::gradient_boosting,
         {{}, {"max_depth", "learning_rate", "max_rounds", "rounds", "min_leaf",
               "early_stop_folds", "patience"}}},
        {LearnerFamily::ols, {{}, {}}},
        {LearnerFamily::logistic, {{}, {"max_iter", "tol"}}},
        {LearnerFamily::stacking, {{}, {"folds"}}},
    };
    return keys.at(f);
}
} // namespace detail

inline void LearnerConfig::validate() const {
    const auto& keys = detail::family_keys(family);
    for (const auto& k : keys.required)
        if (!hyperparams.count(k))
            throw std::invalid_argument(std::string("LearnerConfig: family ") +
                                        family_name(family) + " requires '" + k + "'");
    for (const auto& [k, v] : hyperparams) {
        (void)v;
        bool known = false;
        for (const auto& r : keys.required) known |= (r == k);
        for (const auto& o : keys.optional) known |= (o == k);
        if (!known)
            throw std::invalid_argument(std::string("LearnerConfig: unknown hyperparameter '") +
                                        k + "' for family " + family_name(family));
    }
    if (family == LearnerFamily::ols && task == Task::probability)
        throw std::invalid_argument("LearnerConfig: ols does not support the probability task");
    if (family == LearnerFamily::logistic && task == Task::regression)
        throw std::invalid_argument("LearnerConfig: logistic is probability-task only");
    if (family == LearnerFamily::stacking && base_configs.empty())
        throw std::invalid_argument("LearnerConfig: stacking needs base configs");
    for (const auto& b : base_configs) b.validate();
}

/// Immutable fitted learner; predict is re-entrant.
class FittedModel {
public:
    struct Impl {
        virtual ~Impl() = default;
        virtual std::vector<double> predict(const Matrix& x) const = 0;
        virtual nlohmann::json parameters_json() const = 0;
    };

    FittedModel() = default;
    FittedModel(LearnerConfig config, std::size_t feature_count,
                std::shared_ptr<const Impl> impl, std::string warning = {})
        : config_(std::move(config)),
          feature_count_(feature_count),
          impl_(std::move(impl)),
          warning_(std::move(warning)) {}

    const LearnerConfig& config() const { return config_; }
    const Impl* impl() const { return impl_.get(); }
    std::size_t feature_count() const { return feature_count_; }
    bool has_warning() const { return !warning_.empty(); }
    const std::string& warning() const { return warning_; }
    bool valid() const { return impl_ != nullptr; }

    std::vector<double> predict(const Matrix& x) const {
        if (!impl_) throw std::invalid_argument("predict: model not fitted");
        if (x.rows() == 0) throw std::invalid_argument("predict: empty input");
        if (x.cols() != feature_count_)
            throw std::invalid_argument("predict: column count mismatch");
        auto out = impl_->predict(x);
        if (config_.task == Task::probability)
            for (double& v : out) v = std::min(1.0, std::max(0.0, v));
        return out;
    }

private:
    LearnerConfig config_;
    std::size_t feature_count_ = 0;
    std::shared_ptr<const Impl> impl_;
    std::string warning_;
};

inline std::vector<double> predict(const FittedModel& model, const Matrix& x) {
    return model.predict(x);
}

/// Versioned JSON snapshot of a fitted model for the runner audit trail.
inline nlohmann::json model_to_json(const FittedModel& model);

/// Running count of fit invocations; used by cost-contract tests.
inline std::atomic<std::uint64_t>& fit_counter() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

namespace detail {
inline void check_training_inputs(const Matrix& x, const std::vector<double>& y) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit: x rows and y length differ");
    if (x.rows() == 0) throw std::invalid_argument("fit: empty training set");
    if (x.cols() == 0) throw std::invalid_argument("fit: no features");
    if (!x.all_finite() || !all_finite(y))
        throw std::invalid_argument("fit: non-finite training values");
}
} // namespace detail

} // namespace dmllab

#endif
