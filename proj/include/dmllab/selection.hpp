#ifndef DMLLAB_SELECTION_HPP
#define DMLLAB_SELECTION_HPP

#include <string>
#include <vector>

#include "dmllab/metrics.hpp"

namespace dmllab {

namespace detail {

/// Canonical tie-break order for learner labels.
inline int learner_rank(const std::string& label) {
    static const char* order[] = {"lasso", "forest", "boosting", "stacking", "linear"};
    for (int i = 0; i < 5; ++i)
        if (label == order[i]) return i;
    return 5;
}

inline std::string argmin_by(const std::vector<RepetitionResult>& candidates,
                             double NuisanceQuality::*criterion) {
    if (candidates.empty()) throw std::invalid_argument("selection: no candidates");
    for (const auto& c : candidates)
        if (c.rep_id != candidates[0].rep_id || c.model_kind != candidates[0].model_kind)
            throw std::invalid_argument("selection: candidates span repetitions or models");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double cur = candidates[i].quality.*criterion;
        const double incumbent = candidates[best].quality.*criterion;
        if (cur < incumbent ||
            (cur == incumbent &&
             learner_rank(candidates[i].learner) < learner_rank(candidates[best].learner)))
            best = i;
    }
    return candidates[best].learner;
}

} // namespace detail

/// Pick the learner with the smallest combined out-of-sample nuisance
/// loss for one repetition; ties go to the canonical order (lasso,
/// forest, boosting, stacking, linear).
inline std::string select_learner_combined_loss(const std::vector<RepetitionResult>& candidates) {
    return detail::argmin_by(candidates, &NuisanceQuality::combined_loss);
}

/// Pick the learner with the best predictive performance for Y.
inline std::string select_learner_y_loss(const std::vector<RepetitionResult>& candidates) {
    return detail::argmin_by(candidates, &NuisanceQuality::predictive_loss_y);
}

/// Choose the causal model by the lower predictive loss on Y; ties keep
/// the more general IRM.
inline ModelKind select_causal_model(const NuisanceQuality& plr_quality,
                                     const NuisanceQuality& irm_quality) {
    return plr_quality.predictive_loss_y < irm_quality.predictive_loss_y ? ModelKind::plr
                                                                         : ModelKind::irm;
}

enum class SelectionScope { per_repetition, per_dgp };

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

/// Per-dgp selection: one label for the whole repetition set, chosen by
/// the median criterion across repetitions per learner. results may mix
/// repetitions but must share the dgp and model.
inline std::string select_learner_median(const std::vector<RepetitionResult>& results,
                                         double NuisanceQuality::*criterion) {
    if (results.empty()) throw std::invalid_argument("selection: no results");
    std::map<std::string, std::vector<double>> per_learner;
    for (const auto& r : results) {
        if (r.dgp != results[0].dgp || r.model_kind != results[0].model_kind)
            throw std::invalid_argument("selection: results span dgps or models");
        per_learner[r.learner].push_back(r.quality.*criterion);
    }
    std::string best;
    double best_median = 0.0;
    for (const auto& [label, values] : per_learner) {
        const double med = detail::median_of(values);
        if (best.empty() || med < best_median ||
            (med == best_median && detail::learner_rank(label) < detail::learner_rank(best))) {
            best = label;
            best_median = med;
        }
    }
    return best;
}

/// Scope-dispatching wrapper over the combined-loss criterion.
inline std::string select_learner(const std::vector<RepetitionResult>& results,
                                  SelectionScope scope) {
    if (scope == SelectionScope::per_repetition) return select_learner_combined_loss(results);
    return select_learner_median(results, &NuisanceQuality::combined_loss);
}

} // namespace dmllab

#endif
