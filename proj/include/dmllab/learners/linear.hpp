#ifndef DMLLAB_LEARNERS_LINEAR_HPP
#define DMLLAB_LEARNERS_LINEAR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dmllab/learners/learner.hpp"

namespace dmllab {

namespace detail {

inline Eigen::MatrixXd design_with_intercept(const Matrix& x) {
    Eigen::MatrixXd m(x.rows(), x.cols() + 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        m(static_cast<Eigen::Index>(i), 0) = 1.0;
        const double* row = x.row_ptr(i);
        for (std::size_t j = 0; j < x.cols(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j) + 1) = row[j];
    }
    return m;
}

struct LinearModelImpl final : FittedModel::Impl {
    double intercept = 0.0;
    std::vector<double> slopes;
    bool logit_link = false;

    std::vector<double> predict(const Matrix& x) const override {
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double* row = x.row_ptr(i);
            double v = intercept;
            for (std::size_t j = 0; j < slopes.size(); ++j) v += slopes[j] * row[j];
            out[i] = logit_link ? sigmoid(v) : v;
        }
        return out;
    }

    nlohmann::json parameters_json() const override {
        return {{"intercept", intercept}, {"slopes", slopes}};
    }
};

} // namespace detail

/// Least squares with intercept; minimum-norm solution when the design
/// is rank-deficient.
inline FittedModel fit_ols(const Matrix& x, const std::vector<double>& y) {
    detail::check_training_inputs(x, y);
    const Eigen::MatrixXd design = detail::design_with_intercept(x);
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const Eigen::VectorXd beta = cod.solve(target);

    auto impl = std::make_shared<detail::LinearModelImpl>();
    impl->intercept = beta(0);
    impl->slopes.assign(beta.data() + 1, beta.data() + beta.size());
    LearnerConfig cfg;
    cfg.family = LearnerFamily::ols;
    cfg.task = Task::regression;
    return FittedModel(cfg, x.cols(), impl);
}

/// Logistic regression by Newton iterations with step halving. Stops
/// when the log-likelihood gradient max-norm drops below tol; under
/// perfect separation the max_iter iterate is returned with a warning
/// flag instead of diverging coefficients producing non-finite output.
inline FittedModel fit_logistic(const Matrix& x, const std::vector<double>& y,
                                std::size_t max_iter = 200, double tol = 1e-8) {
    detail::check_training_inputs(x, y);
    bool any0 = false, any1 = false;
    for (double v : y) {
        if (v == 0.0) any0 = true;
        else if (v == 1.0) any1 = true;
        else throw std::invalid_argument("fit_logistic: y must be 0/1");
    }
    if (!any0 || !any1) throw std::invalid_argument("fit_logistic: both classes required");

    const Eigen::MatrixXd design = detail::design_with_intercept(x);
    const Eigen::Index n = design.rows(), q = design.cols();
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    auto loglik = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = design * b;
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = sigmoid(eta(i));
            ll += target(i) * std::log(p) + (1.0 - target(i)) * std::log(1.0 - p);
        }
        return ll;
    };

    bool converged = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd p(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(eta(i));
            w(i) = std::max(p(i) * (1.0 - p(i)), 1e-10);
        }
        const Eigen::VectorXd grad = design.transpose() * (target - p);
        if (grad.lpNorm<Eigen::Infinity>() <= tol) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
        Eigen::VectorXd step = hess.ldlt().solve(grad);
        if (!step.allFinite()) break;
        const double ll0 = loglik(beta);
        double scale = 1.0;
        Eigen::VectorXd candidate = beta + step;
        for (int h = 0; h < 30 && loglik(candidate) < ll0; ++h) {
            scale *= 0.5;
            candidate = beta + scale * step;
        }
        beta = candidate;
    }

    auto impl = std::make_shared<detail::LinearModelImpl>();
    impl->intercept = beta(0);
    impl->slopes.assign(beta.data() + 1, beta.data() + beta.size());
    impl->logit_link = true;
    LearnerConfig cfg;
    cfg.family = LearnerFamily::logistic;
    cfg.task = Task::probability;
    cfg.hyperparams = {{"max_iter", static_cast<double>(max_iter)}, {"tol", tol}};
    return FittedModel(cfg, x.cols(), impl,
                       converged ? "" : "possible separation: gradient tolerance not reached");
}

} // namespace dmllab

#endif
