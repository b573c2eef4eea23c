#ifndef DMLLAB_DML_HPP
#define DMLLAB_DML_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dmllab/tuning.hpp"

namespace dmllab {

enum class Aggregation { pooled, per_fold };
enum class IrmGFit { pooled, split };

/// Cross-fitted out-of-fold nuisance predictions. Every observation's
/// prediction comes from the model fit on its fold's complement.
struct NuisancePredictions {
    ModelKind model_kind = ModelKind::plr;
    std::vector<double> ell_hat;         // PLR: E[Y|X]
    std::vector<double> m_hat;           // E[D|X]; clipped for IRM
    std::vector<double> g0_hat, g1_hat;  // IRM: E[Y|D=d,X]
    std::vector<std::size_t> fold_of;
};

/// Linear-score decomposition psi = psi_a * theta + psi_b at theta_hat.
struct ScoreComponents {
    std::vector<double> psi;
    std::vector<double> psi_a;
    std::vector<double> psi_b;
    double j_hat = 0.0; // mean(psi_a), the Jacobian estimate
};

struct CausalEstimate {
    double theta_hat = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.95;
    ModelKind model_kind = ModelKind::plr;
    std::size_t n_used = 0;
    ScoreComponents scores;
};

/// Out-of-sample nuisance fit quality (per-model combined loss and the
/// predictive loss on Y).
struct NuisanceQuality {
    double rmse_m = std::numeric_limits<double>::quiet_NaN();
    double rmse_ell = std::numeric_limits<double>::quiet_NaN();
    double rmse_g = std::numeric_limits<double>::quiet_NaN();
    double combined_loss = std::numeric_limits<double>::quiet_NaN();
    double predictive_loss_y = std::numeric_limits<double>::quiet_NaN();
};

/// Fit nuisances on each fold's complement with the fold's tuned
/// configs and predict out-of-fold. IRM propensities are clipped to
/// [clip, 1-clip]; PLR with a binary treatment uses the probability
/// task for m but applies no clipping (residualization only).
inline NuisancePredictions cross_fit_nuisances(const Dataset& data, const TuningOutcome& outcome,
                                               ModelKind kind, const FoldPartition& partition,
                                               RngStream rng, double clip = 0.01,
                                               IrmGFit g_fit = IrmGFit::pooled) {
    data.validate();
    if (partition.n != data.n())
        throw std::invalid_argument("cross_fit_nuisances: partition size != n");
    if (outcome.k() != partition.k())
        throw std::invalid_argument("cross_fit_nuisances: tuning outcome fold count mismatch");
    const bool binary = data.treatment_kind == TreatmentKind::binary;
    if (kind == ModelKind::irm && !binary) throw InvalidModelError("IRM requires binary treatment");

    const std::size_t n = data.n();
    NuisancePredictions out;
    out.model_kind = kind;
    out.fold_of = partition.fold_of();
    out.m_hat.assign(n, 0.0);
    if (kind == ModelKind::plr) out.ell_hat.assign(n, 0.0);
    else {
        out.g0_hat.assign(n, 0.0);
        out.g1_hat.assign(n, 0.0);
    }

    for (std::size_t k = 0; k < partition.k(); ++k) {
        const auto train_idx = partition.complement(k);
        const Dataset train = subset(data, train_idx);
        const Matrix x_hold = data.x.take_rows(partition.folds[k]);
        NuisanceConfigs cfg = outcome.config_for(k);

        if (kind == ModelKind::irm) {
            bool any0 = false, any1 = false;
            for (double v : train.d) (v == 1.0 ? any1 : any0) = true;
            if (!any0 || !any1)
                throw FoldDegenerateError("cross_fit_nuisances: training complement of fold " +
                                          std::to_string(k) + " lacks a treatment class");
        }

        // m: E[D|X]
        cfg.treatment.task = binary ? Task::probability : Task::regression;
        const FittedModel m_model =
            fit_model(cfg.treatment, train.x, train.d, rng.derive(hash_tag("m"), k));
        const auto m_pred = m_model.predict(x_hold);
        for (std::size_t i = 0; i < m_pred.size(); ++i) {
            double v = m_pred[i];
            if (kind == ModelKind::irm) v = std::min(1.0 - clip, std::max(clip, v));
            out.m_hat[partition.folds[k][i]] = v;
        }

        cfg.outcome.task = Task::regression;
        if (kind == ModelKind::plr) {
            const FittedModel ell_model =
                fit_model(cfg.outcome, train.x, train.y, rng.derive(hash_tag("ell"), k));
            const auto ell_pred = ell_model.predict(x_hold);
            for (std::size_t i = 0; i < ell_pred.size(); ++i)
                out.ell_hat[partition.folds[k][i]] = ell_pred[i];
        } else if (g_fit == IrmGFit::pooled) {
            const Matrix x_aug = train.x.with_prepended_column(train.d);
            const FittedModel g_model =
                fit_model(cfg.outcome, x_aug, train.y, rng.derive(hash_tag("g"), k));
            const std::vector<double> zeros(x_hold.rows(), 0.0), ones(x_hold.rows(), 1.0);
            const auto g0 = g_model.predict(x_hold.with_prepended_column(zeros));
            const auto g1 = g_model.predict(x_hold.with_prepended_column(ones));
            for (std::size_t i = 0; i < x_hold.rows(); ++i) {
                out.g0_hat[partition.folds[k][i]] = g0[i];
                out.g1_hat[partition.folds[k][i]] = g1[i];
            }
        } else {
            std::vector<std::size_t> treated, control;
            for (std::size_t i = 0; i < train.n(); ++i)
                (train.d[i] == 1.0 ? treated : control).push_back(i);
            const Dataset tr1 = subset(train, treated), tr0 = subset(train, control);
            const FittedModel g1_model =
                fit_model(cfg.outcome, tr1.x, tr1.y, rng.derive(hash_tag("g1"), k));
            const FittedModel g0_model =
                fit_model(cfg.outcome, tr0.x, tr0.y, rng.derive(hash_tag("g0"), k));
            const auto g1 = g1_model.predict(x_hold);
            const auto g0 = g0_model.predict(x_hold);
            for (std::size_t i = 0; i < x_hold.rows(); ++i) {
                out.g0_hat[partition.folds[k][i]] = g0[i];
                out.g1_hat[partition.folds[k][i]] = g1[i];
            }
        }
    }
    return out;
}

namespace detail {

inline CausalEstimate finish_estimate(ModelKind kind, double theta, std::vector<double> psi_a,
                                      std::vector<double> psi_b, double level) {
    const std::size_t n = psi_a.size();
    CausalEstimate est;
    est.model_kind = kind;
    est.theta_hat = theta;
    est.level = level;
    est.n_used = n;
    est.scores.psi_a = std::move(psi_a);
    est.scores.psi_b = std::move(psi_b);
    est.scores.psi.resize(n);
    double j_hat = 0.0, psi_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        est.scores.psi[i] = est.scores.psi_a[i] * theta + est.scores.psi_b[i];
        j_hat += est.scores.psi_a[i];
        psi_sq += est.scores.psi[i] * est.scores.psi[i];
    }
    j_hat /= static_cast<double>(n);
    psi_sq /= static_cast<double>(n);
    est.scores.j_hat = j_hat;
    const double sigma2 = psi_sq / (j_hat * j_hat);
    est.std_error = std::sqrt(sigma2 / static_cast<double>(n));
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    est.ci_low = theta - z * est.std_error;
    est.ci_high = theta + z * est.std_error;
    return est;
}

} // namespace detail

/// Partialling-out estimator: theta = sum(v*u)/sum(v^2) with
/// u = Y - ell_hat, v = D - m_hat; psi = (u - theta*v)*v. per_fold
/// aggregation averages fold-wise solutions instead of pooling scores.
inline CausalEstimate plr_estimate(const Dataset& data, const NuisancePredictions& nuis,
                                   double level = 0.95,
                                   Aggregation aggregation = Aggregation::pooled) {
    const std::size_t n = data.n();
    if (nuis.model_kind != ModelKind::plr || nuis.ell_hat.size() != n || nuis.m_hat.size() != n)
        throw std::invalid_argument("plr_estimate: nuisances do not match data");
    std::vector<double> psi_a(n), psi_b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = data.d[i] - nuis.m_hat[i];
        const double u = data.y[i] - nuis.ell_hat[i];
        psi_a[i] = -v * v;
        psi_b[i] = u * v;
    }
    double theta;
    if (aggregation == Aggregation::pooled) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += psi_b[i];
            den -= psi_a[i];
        }
        if (den <= 1e-12)
            throw DegenerateDesignError("plr_estimate: vanishing treatment residual variance");
        theta = num / den;
    } else {
        const std::size_t k_count = *std::max_element(nuis.fold_of.begin(), nuis.fold_of.end()) + 1;
        std::vector<double> num(k_count, 0.0), den(k_count, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            num[nuis.fold_of[i]] += psi_b[i];
            den[nuis.fold_of[i]] -= psi_a[i];
        }
        theta = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
            if (den[k] <= 1e-12)
                throw DegenerateDesignError("plr_estimate: fold " + std::to_string(k) +
                                            " has vanishing treatment residual variance");
            theta += num[k] / den[k];
        }
        theta /= static_cast<double>(k_count);
    }
    return detail::finish_estimate(ModelKind::plr, theta, std::move(psi_a), std::move(psi_b),
                                   level);
}

/// Doubly robust (AIPW) ATE estimator for binary treatments using
/// clipped propensities; psi_a = -1.
inline CausalEstimate irm_ate_estimate(const Dataset& data, const NuisancePredictions& nuis,
                                       double level = 0.95,
                                       Aggregation aggregation = Aggregation::pooled) {
    const std::size_t n = data.n();
    if (nuis.model_kind != ModelKind::irm || nuis.g0_hat.size() != n || nuis.m_hat.size() != n)
        throw std::invalid_argument("irm_ate_estimate: nuisances do not match data");
    for (double v : data.d)
        if (v != 0.0 && v != 1.0) throw InvalidModelError("irm_ate_estimate: non-binary treatment");

    std::vector<double> psi_a(n, -1.0), psi_b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g0 = nuis.g0_hat[i], g1 = nuis.g1_hat[i], m = nuis.m_hat[i];
        psi_b[i] = g1 - g0 + data.d[i] * (data.y[i] - g1) / m -
                   (1.0 - data.d[i]) * (data.y[i] - g0) / (1.0 - m);
    }
    double theta;
    if (aggregation == Aggregation::pooled) {
        theta = mean(psi_b);
    } else {
        const std::size_t k_count = *std::max_element(nuis.fold_of.begin(), nuis.fold_of.end()) + 1;
        std::vector<double> sum(k_count, 0.0), cnt(k_count, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            sum[nuis.fold_of[i]] += psi_b[i];
            cnt[nuis.fold_of[i]] += 1.0;
        }
        theta = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) theta += sum[k] / cnt[k];
        theta /= static_cast<double>(k_count);
    }
    return detail::finish_estimate(ModelKind::irm, theta, std::move(psi_a), std::move(psi_b),
                                   level);
}

/// Out-of-fold RMSEs against observed targets, the model-specific
/// combined loss, and the predictive loss on Y.
inline NuisanceQuality nuisance_quality(const Dataset& data, const NuisancePredictions& nuis,
                                        double theta_hat) {
    NuisanceQuality q;
    q.rmse_m = rmse(nuis.m_hat, data.d);
    if (nuis.model_kind == ModelKind::plr) {
        q.rmse_ell = rmse(nuis.ell_hat, data.y);
        q.combined_loss = q.rmse_m * (q.rmse_m + q.rmse_ell);
        double loss = 0.0;
        for (std::size_t i = 0; i < data.n(); ++i) {
            const double r = data.y[i] - theta_hat * data.d[i] - nuis.ell_hat[i];
            loss += r * r;
        }
        q.predictive_loss_y = loss / static_cast<double>(data.n());
    } else {
        std::vector<double> g_obs(data.n());
        for (std::size_t i = 0; i < data.n(); ++i)
            g_obs[i] = data.d[i] == 1.0 ? nuis.g1_hat[i] : nuis.g0_hat[i];
        q.rmse_g = rmse(g_obs, data.y);
        q.combined_loss = q.rmse_m * q.rmse_g;
        q.predictive_loss_y = q.rmse_g * q.rmse_g;
    }
    return q;
}

inline double studentized_value(const CausalEstimate& est, double theta0) {
    if (!(est.std_error > 0.0)) throw std::invalid_argument("studentized_value: std_error <= 0");
    return (est.theta_hat - theta0) / est.std_error;
}

} // namespace dmllab

#endif
