#ifndef DMLLAB_LEARNERS_STACKING_HPP
#define DMLLAB_LEARNERS_STACKING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dmllab/folds.hpp"
#include "dmllab/learners/learner.hpp"

namespace dmllab {

FittedModel fit_model(const LearnerConfig& config, const Matrix& x, const std::vector<double>& y,
                      RngStream rng);

namespace detail {

/// Lawson-Hanson active-set NNLS; the meta problem has only a handful
/// of columns so the plain algorithm is ample.
inline std::vector<double> nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                std::size_t max_iter = 200) {
    const Eigen::Index p = a.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    std::vector<bool> passive(static_cast<std::size_t>(p), false);
    Eigen::VectorXd w = a.transpose() * (b - a * x);

    for (std::size_t it = 0; it < max_iter; ++it) {
        Eigen::Index best = -1;
        double best_w = 1e-12;
        for (Eigen::Index j = 0; j < p; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        for (std::size_t inner = 0; inner < max_iter; ++inner) {
            std::vector<Eigen::Index> act;
            for (Eigen::Index j = 0; j < p; ++j)
                if (passive[static_cast<std::size_t>(j)]) act.push_back(j);
            Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(act.size()));
            for (std::size_t c = 0; c < act.size(); ++c) ap.col(static_cast<Eigen::Index>(c)) = a.col(act[c]);
            const Eigen::VectorXd z =
                ap.completeOrthogonalDecomposition().solve(b);
            bool feasible = true;
            for (std::size_t c = 0; c < act.size(); ++c)
                if (z(static_cast<Eigen::Index>(c)) <= 0.0) feasible = false;
            if (feasible) {
                x.setZero();
                for (std::size_t c = 0; c < act.size(); ++c) x(act[c]) = z(static_cast<Eigen::Index>(c));
                break;
            }
            double alpha = 1.0;
            for (std::size_t c = 0; c < act.size(); ++c) {
                const double zc = z(static_cast<Eigen::Index>(c));
                const double xc = x(act[c]);
                if (zc <= 0.0 && xc - zc > 0.0) alpha = std::min(alpha, xc / (xc - zc));
            }
            for (std::size_t c = 0; c < act.size(); ++c) {
                const double zc = z(static_cast<Eigen::Index>(c));
                x(act[c]) += alpha * (zc - x(act[c]));
                if (x(act[c]) <= 1e-12) {
                    x(act[c]) = 0.0;
                    passive[static_cast<std::size_t>(act[c])] = false;
                }
            }
        }
        w = a.transpose() * (b - a * x);
    }
    return std::vector<double>(x.data(), x.data() + p);
}

struct StackingModelImpl final : FittedModel::Impl {
    std::vector<FittedModel> bases;
    std::vector<double> weights;
    bool clamp01 = false;

    std::vector<double> predict(const Matrix& x) const override {
        std::vector<double> out(x.rows(), 0.0);
        for (std::size_t b = 0; b < bases.size(); ++b) {
            if (weights[b] == 0.0) continue;
            const auto pred = bases[b].predict(x);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[b] * pred[i];
        }
        if (clamp01)
            for (double& v : out) v = std::min(1.0, std::max(0.0, v));
        return out;
    }

    nlohmann::json parameters_json() const override {
        nlohmann::json basej = nlohmann::json::array();
        for (const auto& b : bases)
            basej.push_back({{"family", family_name(b.config().family)},
                             {"hyperparams", b.config().hyperparams}});
        return {{"weights", weights}, {"bases", basej}};
    }
};

} // namespace detail

/// Stacked ensemble: each base config is fit per CV fold, the
/// out-of-fold predictions form the meta matrix, and the meta learner
/// is non-negative least squares with weights renormalized to sum 1.
/// Bases are refit on all data for prediction time. All-zero meta
/// weights fall back to uniform with a warning.
inline FittedModel fit_stacking(const std::vector<LearnerConfig>& base_configs, const Matrix& x,
                                const std::vector<double>& y, std::size_t folds, RngStream rng,
                                Task task) {
    detail::check_training_inputs(x, y);
    if (base_configs.empty()) throw std::invalid_argument("fit_stacking: no base configs");
    if (folds < 2 || folds > y.size())
        throw std::invalid_argument("fit_stacking: need 2 <= folds <= n");

    const std::size_t n = x.rows(), nb = base_configs.size();
    const FoldPartition part = make_kfold(n, folds, rng.derive(hash_tag("stackcv")));

    Eigen::MatrixXd meta(n, static_cast<Eigen::Index>(nb));
    for (std::size_t k = 0; k < part.k(); ++k) {
        const auto train_idx = part.complement(k);
        const Matrix xt = x.take_rows(train_idx);
        std::vector<double> yt(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) yt[i] = y[train_idx[i]];
        const Matrix xh = x.take_rows(part.folds[k]);
        for (std::size_t b = 0; b < nb; ++b) {
            LearnerConfig cfg = base_configs[b];
            cfg.task = task;
            const FittedModel fitted = fit_model(cfg, xt, yt, rng.derive(hash_tag("base"), k, b));
            const auto pred = fitted.predict(xh);
            for (std::size_t i = 0; i < part.folds[k].size(); ++i)
                meta(static_cast<Eigen::Index>(part.folds[k][i]), static_cast<Eigen::Index>(b)) =
                    pred[i];
        }
    }

    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
    std::vector<double> weights = detail::nnls(meta, target);
    double total = 0.0;
    for (double w : weights) total += w;
    std::string warning;
    if (total <= 0.0) {
        weights.assign(nb, 1.0 / static_cast<double>(nb));
        warning = "all-zero meta weights; fell back to uniform";
    } else {
        for (double& w : weights) w /= total;
    }

    auto impl = std::make_shared<detail::StackingModelImpl>();
    impl->weights = weights;
    impl->clamp01 = task == Task::probability;
    impl->bases.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        LearnerConfig cfg = base_configs[b];
        cfg.task = task;
        impl->bases.push_back(fit_model(cfg, x, y, rng.derive(hash_tag("refit"), b)));
    }

    LearnerConfig cfg;
    cfg.family = LearnerFamily::stacking;
    cfg.task = task;
    cfg.hyperparams = {{"folds", static_cast<double>(folds)}};
    cfg.base_configs = base_configs;
    return FittedModel(std::move(cfg), x.cols(), impl, warning);
}

/// Meta weights of a stacking model (non-negative, sum 1).
inline const std::vector<double>& stacking_weights(const FittedModel& model) {
    const auto* impl = dynamic_cast<const detail::StackingModelImpl*>(model.impl());
    if (!impl) throw std::invalid_argument("stacking_weights: not a stacking model");
    return impl->weights;
}

} // namespace dmllab

#endif
