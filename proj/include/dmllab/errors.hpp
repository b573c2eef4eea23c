#ifndef DMLLAB_ERRORS_HPP
#define DMLLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dmllab {

// std::invalid_argument is used for plain precondition violations;
// the types below mark conditions callers may want to branch on.

/// A treatment class has too few members to stratify into k folds.
struct StratificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The requested tuning scheme cannot run on a sample this small.
struct SchemeInfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A cross-fitting fold's training complement lacks a treatment class.
struct FoldDegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Treatment residual variance vanished (propensity fit reproduces D).
struct DegenerateDesignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Estimator applied to a model it does not identify (e.g. IRM on
/// continuous treatment).
struct InvalidModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A metric is undefined for the given inputs (e.g. zero oracle MSE).
struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dmllab

#endif
