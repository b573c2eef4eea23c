#ifndef DMLLAB_LEARNERS_LASSO_HPP
#define DMLLAB_LEARNERS_LASSO_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "dmllab/folds.hpp"
#include "dmllab/learners/learner.hpp"

namespace dmllab {

namespace detail {

inline double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

/// Column-standardized working copy of a design matrix. Columns are
/// centered and scaled to unit population variance; zero-variance
/// columns are marked dead and their coefficients stay 0.
struct StandardizedDesign {
    std::size_t n = 0, p = 0;
    std::vector<double> z;     // column-major, n*p
    std::vector<double> mu;    // per-column mean
    std::vector<double> sd;    // per-column population sd (0 for dead)
    std::vector<char> alive;

    explicit StandardizedDesign(const Matrix& x) {
        n = x.rows();
        p = x.cols();
        z.assign(n * p, 0.0);
        mu.assign(p, 0.0);
        sd.assign(p, 0.0);
        alive.assign(p, 0);
        for (std::size_t j = 0; j < p; ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += x(i, j);
            m /= static_cast<double>(n);
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double c = x(i, j) - m;
                v += c * c;
            }
            v /= static_cast<double>(n);
            mu[j] = m;
            if (v > 0.0) {
                sd[j] = std::sqrt(v);
                alive[j] = 1;
                double* col = z.data() + j * n;
                for (std::size_t i = 0; i < n; ++i) col[i] = (x(i, j) - m) / sd[j];
            }
        }
    }

    const double* col(std::size_t j) const { return z.data() + j * n; }
};

/// One coordinate-descent solve at a fixed lambda on standardized data.
/// beta is both warm start and output; r must equal y_centered - Z*beta
/// on entry and is kept consistent. Runs until the KKT conditions hold
/// within tol or max_sweeps full sweeps elapse.
inline void lasso_cd(const StandardizedDesign& sx, std::vector<double>& r,
                     std::vector<double>& beta, double lambda, double tol,
                     std::size_t max_sweeps) {
    const std::size_t n = sx.n, p = sx.p;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<std::size_t> active;
    active.reserve(p);

    auto update_coord = [&](std::size_t j) {
        const double* zj = sx.col(j);
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += zj[i] * r[i];
        const double u = beta[j] + dot * inv_n;
        const double bnew = soft_threshold(u, lambda);
        const double delta = bnew - beta[j];
        if (delta != 0.0) {
            for (std::size_t i = 0; i < n; ++i) r[i] -= delta * zj[i];
            beta[j] = bnew;
        }
        return std::fabs(delta);
    };

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        // Full sweep doubles as the KKT certificate check.
        double kkt_violation = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (!sx.alive[j]) continue;
            const double* zj = sx.col(j);
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += zj[i] * r[i];
            const double g = dot * inv_n;
            double viol;
            if (beta[j] == 0.0) viol = std::max(0.0, std::fabs(g) - lambda);
            else viol = std::fabs(g - lambda * ((beta[j] > 0.0) ? 1.0 : -1.0));
            kkt_violation = std::max(kkt_violation, viol);
            const double u = beta[j] + g;
            const double bnew = soft_threshold(u, lambda);
            const double delta = bnew - beta[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) r[i] -= delta * zj[i];
                beta[j] = bnew;
            }
        }
        if (kkt_violation <= tol) return;

        // Inner iterations on the current active set.
        active.clear();
        for (std::size_t j = 0; j < p; ++j)
            if (beta[j] != 0.0) active.push_back(j);
        for (std::size_t inner = 0; inner < 1000; ++inner) {
            double max_delta = 0.0;
            for (std::size_t j : active) max_delta = std::max(max_delta, update_coord(j));
            if (max_delta <= tol * 0.1) break;
        }
    }
}

struct LassoModelImpl final : FittedModel::Impl {
    double intercept = 0.0;
    std::vector<double> slopes;            // raw-feature scale
    std::vector<double> beta_standardized; // kept for KKT checks / warm starts
    double lambda = 0.0;
    std::vector<std::pair<double, double>> cv_curve; // (lambda, mean CV loss)

    std::vector<double> predict(const Matrix& x) const override {
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double* row = x.row_ptr(i);
            double v = intercept;
            for (std::size_t j = 0; j < slopes.size(); ++j) v += slopes[j] * row[j];
            out[i] = v;
        }
        return out;
    }

    nlohmann::json parameters_json() const override {
        nlohmann::json j = {{"intercept", intercept}, {"slopes", slopes}, {"lambda", lambda}};
        if (!cv_curve.empty()) {
            nlohmann::json curve = nlohmann::json::array();
            for (const auto& [lam, loss] : cv_curve) curve.push_back({lam, loss});
            j["cv_curve"] = curve;
        }
        return j;
    }
};

inline FittedModel make_lasso_model(const StandardizedDesign& sx, const std::vector<double>& beta,
                                    double ybar, double lambda, LearnerConfig cfg,
                                    std::vector<std::pair<double, double>> curve = {}) {
    auto impl = std::make_shared<LassoModelImpl>();
    impl->lambda = lambda;
    impl->beta_standardized = beta;
    impl->slopes.assign(sx.p, 0.0);
    double intercept = ybar;
    for (std::size_t j = 0; j < sx.p; ++j) {
        if (!sx.alive[j] || beta[j] == 0.0) continue;
        impl->slopes[j] = beta[j] / sx.sd[j];
        intercept -= impl->slopes[j] * sx.mu[j];
    }
    impl->intercept = intercept;
    impl->cv_curve = std::move(curve);
    return FittedModel(std::move(cfg), sx.p, impl);
}

inline double lambda_max_of(const StandardizedDesign& sx, const std::vector<double>& y_centered) {
    double lmax = 0.0;
    for (std::size_t j = 0; j < sx.p; ++j) {
        if (!sx.alive[j]) continue;
        const double* zj = sx.col(j);
        double dot = 0.0;
        for (std::size_t i = 0; i < sx.n; ++i) dot += zj[i] * y_centered[i];
        lmax = std::max(lmax, std::fabs(dot) / static_cast<double>(sx.n));
    }
    return lmax;
}

} // namespace detail

/// Lasso for the objective (1/(2n))||y - b0*1 - X*b||^2 + lambda*||b||_1
/// with unpenalized intercept. Columns are standardized to unit variance
/// internally and slopes are mapped back; zero-variance columns get
/// coefficient 0. The returned solution satisfies the KKT conditions in
/// the standardized coordinates within tol. The probability task is a
/// linear probability fit whose predictions get clamped to [0,1].
inline FittedModel fit_lasso(const Matrix& x, const std::vector<double>& y, double lambda,
                             double tol = 1e-8, std::size_t max_sweeps = 2000,
                             Task task = Task::regression) {
    detail::check_training_inputs(x, y);
    if (lambda < 0.0) throw std::invalid_argument("fit_lasso: lambda must be >= 0");

    detail::StandardizedDesign sx(x);
    const double ybar = mean(y);
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - ybar;
    std::vector<double> beta(sx.p, 0.0);
    // warm-start down a short path; cold starts far below lambda_max
    // converge slowly on correlated designs
    const double lmax = detail::lambda_max_of(sx, r);
    if (lambda < 0.5 * lmax) {
        double step = 0.5 * lmax;
        while (step > lambda) {
            detail::lasso_cd(sx, r, beta, step, std::max(tol, 1e-6), max_sweeps);
            step *= 0.6;
        }
    }
    detail::lasso_cd(sx, r, beta, lambda, tol, max_sweeps);

    LearnerConfig cfg;
    cfg.family = LearnerFamily::lasso;
    cfg.task = task;
    cfg.hyperparams = {{"lambda", lambda}, {"tol", tol},
                       {"max_sweeps", static_cast<double>(max_sweeps)}};
    return detail::make_lasso_model(sx, beta, ybar, lambda, std::move(cfg));
}

/// Log-spaced grid from lambda_max down to 1e-3*lambda_max.
inline std::vector<double> lasso_lambda_grid(const Matrix& x, const std::vector<double>& y,
                                             std::size_t grid_size = 100) {
    if (grid_size < 1) throw std::invalid_argument("lasso_lambda_grid: empty grid");
    detail::StandardizedDesign sx(x);
    const double ybar = mean(y);
    std::vector<double> yc(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yc[i] = y[i] - ybar;
    const double lmax = detail::lambda_max_of(sx, yc);
    std::vector<double> grid(grid_size);
    if (lmax <= 0.0 || grid_size == 1) {
        std::fill(grid.begin(), grid.end(), std::max(lmax, 0.0));
        return grid;
    }
    const double lmin = 1e-3 * lmax;
    const double step = std::log(lmin / lmax) / static_cast<double>(grid_size - 1);
    for (std::size_t g = 0; g < grid_size; ++g)
        grid[g] = lmax * std::exp(step * static_cast<double>(g));
    return grid;
}

/// Lambda selected by K-fold CV over the log-spaced grid, descending
/// with warm starts, then refit on all data at the winner. Ties pick
/// the earlier (larger) lambda. The CV curve is stored on the model.
inline FittedModel fit_cv_lasso(const Matrix& x, const std::vector<double>& y,
                                std::size_t folds, std::size_t grid_size, RngStream rng,
                                double tol = 1e-8, std::size_t max_sweeps = 2000,
                                Task task = Task::regression) {
    detail::check_training_inputs(x, y);
    if (folds < 2 || folds > y.size())
        throw std::invalid_argument("fit_cv_lasso: need 2 <= folds <= n");

    const std::vector<double> grid = lasso_lambda_grid(x, y, grid_size);
    const FoldPartition part = make_kfold(y.size(), folds, rng);

    std::vector<double> cv_loss(grid.size(), 0.0);
    for (std::size_t k = 0; k < part.k(); ++k) {
        const auto train_idx = part.complement(k);
        const Matrix xt = x.take_rows(train_idx);
        std::vector<double> yt(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) yt[i] = y[train_idx[i]];

        detail::StandardizedDesign sx(xt);
        const double ybar = mean(yt);
        std::vector<double> r(yt.size());
        for (std::size_t i = 0; i < yt.size(); ++i) r[i] = yt[i] - ybar;
        std::vector<double> beta(sx.p, 0.0);

        const auto& hold = part.folds[k];
        for (std::size_t g = 0; g < grid.size(); ++g) {
            detail::lasso_cd(sx, r, beta, grid[g], tol, max_sweeps);
            // validation MSE at this lambda
            double loss = 0.0;
            for (std::size_t i : hold) {
                double pred = ybar;
                const double* row = x.row_ptr(i);
                for (std::size_t j = 0; j < sx.p; ++j) {
                    if (!sx.alive[j] || beta[j] == 0.0) continue;
                    pred += beta[j] / sx.sd[j] * (row[j] - sx.mu[j]);
                }
                const double dlt = pred - y[i];
                loss += dlt * dlt;
            }
            cv_loss[g] += loss / static_cast<double>(hold.size());
        }
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (cv_loss[g] < cv_loss[best]) best = g;

    std::vector<std::pair<double, double>> curve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        curve[g] = {grid[g], cv_loss[g] / static_cast<double>(part.k())};

    // Refit on all data, warm-started down the path to the winner.
    detail::StandardizedDesign sx(x);
    const double ybar = mean(y);
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - ybar;
    std::vector<double> beta(sx.p, 0.0);
    for (std::size_t g = 0; g <= best; ++g)
        detail::lasso_cd(sx, r, beta, grid[g], tol, max_sweeps);

    LearnerConfig cfg;
    cfg.family = LearnerFamily::cv_lasso;
    cfg.task = task;
    cfg.hyperparams = {{"folds", static_cast<double>(folds)},
                       {"grid_size", static_cast<double>(grid_size)},
                       {"tol", tol},
                       {"max_sweeps", static_cast<double>(max_sweeps)}};
    return detail::make_lasso_model(sx, beta, ybar, grid[best], std::move(cfg), std::move(curve));
}

/// Selected lambda of a lasso/cv_lasso model.
inline double lasso_lambda(const FittedModel& model) {
    const auto* impl = dynamic_cast<const detail::LassoModelImpl*>(model.impl());
    if (!impl) throw std::invalid_argument("lasso_lambda: not a lasso model");
    return impl->lambda;
}

/// CV curve (lambda, mean loss) of a cv_lasso model; empty for plain lasso.
inline const std::vector<std::pair<double, double>>& lasso_cv_curve(const FittedModel& model) {
    const auto* impl = dynamic_cast<const detail::LassoModelImpl*>(model.impl());
    if (!impl) throw std::invalid_argument("lasso_cv_curve: not a lasso model");
    return impl->cv_curve;
}

} // namespace dmllab

#endif
