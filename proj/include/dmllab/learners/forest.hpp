#ifndef DMLLAB_LEARNERS_FOREST_HPP
#define DMLLAB_LEARNERS_FOREST_HPP

#include <cmath>
#include <numeric>
#include <vector>

#include "dmllab/learners/tree.hpp"

namespace dmllab {

namespace detail {

struct ForestModelImpl final : FittedModel::Impl {
    std::vector<std::vector<TreeNode>> trees;

    std::vector<double> predict(const Matrix& x) const override {
        std::vector<double> out(x.rows(), 0.0);
        for (const auto& t : trees)
            for (std::size_t i = 0; i < x.rows(); ++i)
                out[i] += tree_predict_row(t, x.row_ptr(i));
        const double inv = 1.0 / static_cast<double>(trees.size());
        for (double& v : out) v *= inv;
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
        return {{"trees", arr}};
    }
};

} // namespace detail

/// Bagged CART ensemble: bootstrap rows per tree, mtry features per
/// split (default ceil(sqrt(p))). Turning bootstrap off with n_trees=1
/// and mtry=p degenerates to fit_tree.
inline FittedModel fit_random_forest(const Matrix& x, const std::vector<double>& y,
                                     std::size_t max_depth, std::size_t n_trees, std::size_t mtry,
                                     RngStream rng, Task task, std::size_t min_leaf = 5,
                                     bool bootstrap = true) {
    detail::check_training_inputs(x, y);
    if (n_trees < 1) throw std::invalid_argument("fit_random_forest: need n_trees >= 1");
    if (task == Task::probability)
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("fit_random_forest: probability task needs 0/1 targets");
    const std::size_t n = x.rows(), p = x.cols();
    if (mtry == 0) mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    mtry = std::min(mtry, p);

    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const detail::TreeBuilder full(x, rows);

    auto impl = std::make_shared<detail::ForestModelImpl>();
    impl->trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        RngStream tree_rng = rng.derive(t);
        if (bootstrap) {
            std::vector<int> counts(n, 0);
            for (std::size_t i = 0; i < n; ++i) ++counts[tree_rng.below(n)];
            detail::TreeBuilder boot(full, counts);
            std::vector<double> y_local(boot.sample_count());
            std::size_t pos = 0;
            for (std::size_t r = 0; r < n; ++r)
                for (int c = 0; c < counts[r]; ++c) y_local[pos++] = y[r];
            impl->trees.push_back(boot.build(y_local, max_depth, min_leaf, mtry, &tree_rng));
        } else {
            impl->trees.push_back(full.build(y, max_depth, min_leaf, mtry, &tree_rng));
        }
    }

    LearnerConfig cfg;
    cfg.family = LearnerFamily::random_forest;
    cfg.task = task;
    cfg.hyperparams = {{"max_depth", static_cast<double>(max_depth)},
                       {"n_trees", static_cast<double>(n_trees)},
                       {"mtry", static_cast<double>(mtry)},
                       {"min_leaf", static_cast<double>(min_leaf)},
                       {"bootstrap", bootstrap ? 1.0 : 0.0}};
    return FittedModel(std::move(cfg), p, impl);
}

} // namespace dmllab

#endif
