#ifndef DMLLAB_LEARNERS_BOOSTING_HPP
#define DMLLAB_LEARNERS_BOOSTING_HPP

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dmllab/folds.hpp"
#include "dmllab/learners/tree.hpp"

namespace dmllab {

namespace detail {

constexpr double kProbClamp = 1e-6;

inline double clamp_prob(double p) {
    return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

struct BoostModelImpl final : FittedModel::Impl {
    double f0 = 0.0;
    double learning_rate = 0.1;
    bool logit = false;
    std::vector<std::vector<TreeNode>> trees;
    std::vector<double> validation_curve; // mean CV loss per round count (0..max)

    std::vector<double> predict(const Matrix& x) const override {
        std::vector<double> out(x.rows(), f0);
        for (const auto& t : trees)
            for (std::size_t i = 0; i < x.rows(); ++i)
                out[i] += learning_rate * tree_predict_row(t, x.row_ptr(i));
        if (logit)
            for (double& v : out) v = sigmoid(v);
        return out;
    }

    nlohmann::json parameters_json() const override {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t)
                nodes.push_back({{"feature", n.feature},
                                 {"threshold", n.threshold},
                                 {"value", n.value},
                                 {"left", n.left},
                                 {"right", n.right}});
            arr.push_back(std::move(nodes));
        }
        nlohmann::json j = {{"f0", f0},
                            {"learning_rate", learning_rate},
                            {"rounds", trees.size()},
                            {"trees", arr}};
        if (!validation_curve.empty()) j["validation_curve"] = validation_curve;
        return j;
    }
};

/// One boosting path on a fixed training set. scores/targets live in
/// local-id space of the builder. For the probability task the response
/// is y - p with p clamped away from 0/1.
class BoostPath {
public:
    BoostPath(const Matrix& x, const std::vector<int>& rows, const std::vector<double>& y,
              Task task, double learning_rate, std::size_t max_depth, std::size_t min_leaf)
        : builder_(x, rows),
          task_(task),
          lr_(learning_rate),
          depth_(max_depth),
          min_leaf_(min_leaf) {
        y_.resize(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) y_[t] = y[static_cast<std::size_t>(rows[t])];
        double ybar = 0.0;
        for (double v : y_) ybar += v;
        ybar /= static_cast<double>(y_.size());
        f0_ = task_ == Task::probability
                  ? std::log(clamp_prob(ybar) / (1.0 - clamp_prob(ybar)))
                  : ybar;
        score_.assign(y_.size(), f0_);
        response_.resize(y_.size());
    }

    double f0() const { return f0_; }

    const std::vector<TreeNode>& add_round() {
        for (std::size_t t = 0; t < y_.size(); ++t)
            response_[t] = task_ == Task::probability ? y_[t] - clamp_prob(sigmoid(score_[t]))
                                                      : y_[t] - score_[t];
        trees_.push_back(builder_.build(response_, depth_, min_leaf_, builder_row_feats(), nullptr));
        const auto& tree = trees_.back();
        for (std::size_t t = 0; t < y_.size(); ++t)
            score_[t] += lr_ * leaf_value(tree, t);
        return tree;
    }

    std::vector<std::vector<TreeNode>> take_trees() { return std::move(trees_); }

    double training_loss() const {
        double loss = 0.0;
        for (std::size_t t = 0; t < y_.size(); ++t) {
            if (task_ == Task::probability) {
                const double p = clamp_prob(sigmoid(score_[t]));
                loss -= y_[t] * std::log(p) + (1.0 - y_[t]) * std::log(1.0 - p);
            } else {
                const double d = y_[t] - score_[t];
                loss += d * d;
            }
        }
        return loss / static_cast<double>(y_.size());
    }

private:
    std::size_t builder_row_feats() const { return std::numeric_limits<std::size_t>::max(); }

    double leaf_value(const std::vector<TreeNode>& tree, std::size_t local) const {
        // re-predicting through the builder's column values keeps this
        // exact for duplicated rows
        int cur = 0;
        while (tree[static_cast<std::size_t>(cur)].feature >= 0) {
            const auto& nd = tree[static_cast<std::size_t>(cur)];
            cur = builder_col(static_cast<std::size_t>(nd.feature), local) <= nd.threshold
                      ? nd.left
                      : nd.right;
        }
        return tree[static_cast<std::size_t>(cur)].value;
    }

    double builder_col(std::size_t feature, std::size_t local) const {
        return builder_.column_value(feature, local);
    }

    TreeBuilder builder_;
    Task task_;
    double lr_;
    std::size_t depth_, min_leaf_;
    double f0_ = 0.0;
    std::vector<double> y_, score_, response_;
    std::vector<std::vector<TreeNode>> trees_;
};

inline double holdout_loss(const BoostModelImpl& model, const Matrix& x,
                           const std::vector<double>& y, const std::vector<std::size_t>& idx,
                           Task task) {
    double loss = 0.0;
    for (std::size_t i : idx) {
        double f = model.f0;
        for (const auto& t : model.trees)
            f += model.learning_rate * tree_predict_row(t, x.row_ptr(i));
        if (task == Task::probability) {
            const double p = clamp_prob(sigmoid(f));
            loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
        } else {
            const double d = y[i] - f;
            loss += d * d;
        }
    }
    return loss / static_cast<double>(idx.size());
}

} // namespace detail

/// Gradient boosted trees: squared loss on residuals (regression) or
/// log-loss via the gradient response y - p (probability). When rounds
/// is not fixed, the round count is picked by internal K-fold CV: all
/// folds advance in lockstep and the search stops once the mean
/// validation loss has not improved for `patience` rounds.
inline FittedModel fit_gradient_boosting(const Matrix& x, const std::vector<double>& y,
                                         std::size_t max_depth, double learning_rate,
                                         std::size_t max_rounds, std::size_t early_stop_folds,
                                         RngStream rng, Task task, std::size_t min_leaf = 5,
                                         long fixed_rounds = -1, std::size_t patience = 10) {
    detail::check_training_inputs(x, y);
    if (task == Task::probability)
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("fit_gradient_boosting: probability task needs 0/1");

    const std::size_t n = x.rows();
    std::vector<double> curve;
    std::size_t rounds;
    if (fixed_rounds >= 0) {
        rounds = std::min<std::size_t>(static_cast<std::size_t>(fixed_rounds), max_rounds);
    } else if (max_rounds == 0 || early_stop_folds < 2 || n < 2 * early_stop_folds) {
        rounds = max_rounds;
    } else {
        const FoldPartition part = make_kfold(n, early_stop_folds, rng.derive(hash_tag("escv")));
        std::vector<detail::BoostPath> paths;
        std::vector<detail::BoostModelImpl> partials(part.k());
        paths.reserve(part.k());
        for (std::size_t k = 0; k < part.k(); ++k) {
            std::vector<int> train;
            for (std::size_t i : part.complement(k)) train.push_back(static_cast<int>(i));
            paths.emplace_back(x, train, y, task, learning_rate, max_depth, min_leaf);
            partials[k].f0 = paths[k].f0();
            partials[k].learning_rate = learning_rate;
        }
        curve.resize(max_rounds + 1, 0.0);
        for (std::size_t k = 0; k < part.k(); ++k)
            curve[0] += detail::holdout_loss(partials[k], x, y, part.folds[k], task);
        curve[0] /= static_cast<double>(part.k());

        std::size_t best_round = 0;
        double best_loss = curve[0];
        std::size_t r = 0;
        while (r < max_rounds) {
            ++r;
            double loss = 0.0;
            for (std::size_t k = 0; k < part.k(); ++k) {
                partials[k].trees.push_back(paths[k].add_round());
                loss += detail::holdout_loss(partials[k], x, y, part.folds[k], task);
            }
            curve[r] = loss / static_cast<double>(part.k());
            if (curve[r] < best_loss) {
                best_loss = curve[r];
                best_round = r;
            }
            if (r - best_round >= patience) break;
        }
        curve.resize(r + 1);
        rounds = best_round;
    }

    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    detail::BoostPath path(x, all, y, task, learning_rate, max_depth, min_leaf);
    for (std::size_t r = 0; r < rounds; ++r) path.add_round();

    auto impl = std::make_shared<detail::BoostModelImpl>();
    impl->f0 = path.f0();
    impl->learning_rate = learning_rate;
    impl->logit = task == Task::probability;
    impl->trees = path.take_trees();
    impl->validation_curve = std::move(curve);

    LearnerConfig cfg;
    cfg.family = LearnerFamily::gradient_boosting;
    cfg.task = task;
    cfg.hyperparams = {{"max_depth", static_cast<double>(max_depth)},
                       {"learning_rate", learning_rate},
                       {"max_rounds", static_cast<double>(max_rounds)},
                       {"early_stop_folds", static_cast<double>(early_stop_folds)},
                       {"min_leaf", static_cast<double>(min_leaf)},
                       {"patience", static_cast<double>(patience)},
                       {"rounds", static_cast<double>(impl->trees.size())}};
    return FittedModel(std::move(cfg), x.cols(), impl);
}

/// Mean CV validation-loss curve of a boosting fit (index = rounds).
inline const std::vector<double>& boosting_validation_curve(const FittedModel& model) {
    const auto* impl = dynamic_cast<const detail::BoostModelImpl*>(model.impl());
    if (!impl) throw std::invalid_argument("boosting_validation_curve: not a boosting model");
    return impl->validation_curve;
}

} // namespace dmllab

#endif
