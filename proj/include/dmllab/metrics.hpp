#ifndef DMLLAB_METRICS_HPP
#define DMLLAB_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dmllab/dml.hpp"

namespace dmllab {

/// One (dgp, model, learner, scheme) cell of one Monte Carlo repetition.
struct RepetitionResult {
    std::size_t rep_id = 0;
    std::string dgp;
    ModelKind model_kind = ModelKind::plr;
    std::string learner;
    std::string scheme;
    CausalEstimate estimate;
    NuisanceQuality quality;
    double theta0 = 0.0;
    CausalEstimate oracle;
};

struct MetricsRecord {
    double rrmse = 0.0;
    double rrmse_minus_1 = 0.0;
    double mean_bias = 0.0;
    double std_dev = 0.0;
    double coverage = 0.0;
    double mean_combined_loss = 0.0;
    double mean_predictive_loss = 0.0;
    std::size_t reps = 0;
};

/// Monte Carlo aggregation: rRMSE against the oracle, mean bias, the
/// (R-1)-denominator standard deviation, CI coverage, and mean losses.
inline MetricsRecord aggregate(const std::vector<RepetitionResult>& results) {
    if (results.empty()) throw std::invalid_argument("aggregate: no results");
    for (const auto& r : results)
        if (r.dgp != results[0].dgp || r.model_kind != results[0].model_kind ||
            r.learner != results[0].learner || r.scheme != results[0].scheme)
            throw std::invalid_argument("aggregate: mixed result groups");

    const double n = static_cast<double>(results.size());
    MetricsRecord out;
    out.reps = results.size();
    double mse = 0.0, mse_oracle = 0.0, sum_theta = 0.0;
    for (const auto& r : results) {
        const double err = r.estimate.theta_hat - r.theta0;
        const double err_oracle = r.oracle.theta_hat - r.theta0;
        mse += err * err;
        mse_oracle += err_oracle * err_oracle;
        sum_theta += r.estimate.theta_hat;
        out.mean_bias += err;
        if (r.theta0 >= r.estimate.ci_low && r.theta0 <= r.estimate.ci_high) out.coverage += 1.0;
        out.mean_combined_loss += r.quality.combined_loss;
        out.mean_predictive_loss += r.quality.predictive_loss_y;
    }
    mse /= n;
    mse_oracle /= n;
    if (mse_oracle <= 0.0)
        throw UndefinedMetricError("aggregate: oracle MSE is zero, rRMSE undefined");
    out.rrmse = std::sqrt(mse / mse_oracle);
    out.rrmse_minus_1 = out.rrmse - 1.0;
    out.mean_bias /= n;
    out.coverage /= n;
    out.mean_combined_loss /= n;
    out.mean_predictive_loss /= n;
    const double theta_bar = sum_theta / n;
    if (results.size() >= 2) {
        double ss = 0.0;
        for (const auto& r : results) {
            const double d = r.estimate.theta_hat - theta_bar;
            ss += d * d;
        }
        out.std_dev = std::sqrt(ss / (n - 1.0));
    } else {
        out.std_dev = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

/// Spearman rank correlation with tie-averaged ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length samples of size >= 2");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double ma = mean(ra), mb = mean(rb);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return num / std::sqrt(va * vb);
}

} // namespace dmllab

#endif
