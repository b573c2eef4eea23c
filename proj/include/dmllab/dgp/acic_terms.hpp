#ifndef DMLLAB_DGP_ACIC_TERMS_HPP
#define DMLLAB_DGP_ACIC_TERMS_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "dmllab/matrix.hpp"
#include "dmllab/rng.hpp"

namespace dmllab::acic {

// ---------------------------------------------------------------------
// Covariate marginals. Covariates are drawn through a Gaussian copula
// with equicorrelation 0.3 inside blocks of 10 consecutive indices.
// Index-specific marginals keep every transformation argument in its
// domain (positive under sqrt/log/reciprocals) and place indicator
// thresholds so they are hit with moderate probability.
// ---------------------------------------------------------------------

enum class MarginalKind { normal, lognormal, uniform, bernoulli };

struct Marginal {
    MarginalKind kind = MarginalKind::normal;
    double a = 0.0; // normal/lognormal: mean; uniform: lo; bernoulli: success prob
    double b = 1.0; // normal/lognormal: sd; uniform: hi
};

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double marginal_from_gaussian(const Marginal& m, double z) {
    switch (m.kind) {
        case MarginalKind::normal: return m.a + m.b * z;
        case MarginalKind::lognormal: return std::exp(m.a + m.b * z);
        case MarginalKind::uniform: return m.a + (m.b - m.a) * std_normal_cdf(z);
        case MarginalKind::bernoulli: return std_normal_cdf(z) < m.a ? 1.0 : 0.0;
    }
    return z;
}

/// Marginal of the 1-based covariate index.
inline Marginal marginal_for(int index) {
    switch (index) {
        case 1: return {MarginalKind::lognormal, 0.0, 0.5};   // sqrt argument
        case 5: return {MarginalKind::normal, 204.0, 4.0};    // threshold at 204
        case 7: return {MarginalKind::uniform, 1.0, 3.0};     // log(x+0.5) away from 0
        case 8: return {MarginalKind::lognormal, 0.5, 0.5};   // log argument
        case 10: return {MarginalKind::normal, 5.0, 2.0};     // threshold at 5
        case 16: return {MarginalKind::uniform, 0.5, 2.5};    // reciprocal argument
        case 17: return {MarginalKind::uniform, 0.25, 4.0};   // 1/sqrt argument
        case 25: return {MarginalKind::lognormal, 0.0, 0.5};  // sqrt argument
        case 52: return {MarginalKind::lognormal, 0.0, 0.5};  // log/exp argument
        case 67: return {MarginalKind::lognormal, 0.0, 0.5};  // sqrt argument
        case 68: return {MarginalKind::lognormal, 0.0, 0.5};  // sqrt argument
        case 89: return {MarginalKind::normal, 19.0, 4.0};    // threshold at 19
        case 95: return {MarginalKind::normal, 5.0, 2.0};     // threshold at 5
        case 96: return {MarginalKind::normal, 2.0, 1.0};     // threshold at 2
        case 101: return {MarginalKind::normal, 2.5, 1.0};    // threshold at 2.5
        case 157: return {MarginalKind::normal, 0.0, 1.0};    // |x| shape
        case 169: return {MarginalKind::uniform, 0.5, 2.5};   // reciprocal argument
        case 179: return {MarginalKind::normal, 0.0, 1.0};    // threshold at -0.5
        case 188: return {MarginalKind::normal, 0.0, 1.0};    // threshold at 0.4, cubes
        case 199: return {MarginalKind::normal, 1.0, 1.0};    // threshold at 1
        default: break;
    }
    switch (index % 10) {
        case 5: case 6: return {MarginalKind::uniform, 0.0, 1.0};
        case 7: case 8: return {MarginalKind::bernoulli, 0.5, 0.0};
        case 9: return {MarginalKind::lognormal, 0.0, 0.5};
        default: return {MarginalKind::normal, 0.0, 1.0};
    }
}

constexpr double kCopulaBlockCorr = 0.3;
constexpr std::size_t kCopulaBlockSize = 10;

/// Draw one covariate row into out[0..p-1] (out[j] is X_{j+1}).
inline void draw_covariate_row(std::size_t p, RngStream& rng, double* out) {
    const double w_common = std::sqrt(kCopulaBlockCorr);
    const double w_idio = std::sqrt(1.0 - kCopulaBlockCorr);
    for (std::size_t start = 0; start < p; start += kCopulaBlockSize) {
        const std::size_t end = std::min(p, start + kCopulaBlockSize);
        const double g = rng.normal();
        for (std::size_t j = start; j < end; ++j) {
            const double z = w_common * g + w_idio * rng.normal();
            out[j] = marginal_from_gaussian(marginal_for(static_cast<int>(j) + 1), z);
        }
    }
}

// ---------------------------------------------------------------------
// Structural terms: products of up to three unary factors of single
// covariates, covering every transformation the templates print.
// ---------------------------------------------------------------------

enum class FOp {
    lin,
    sq,
    cube,
    sqrt_,
    log_,
    log1p_,
    inv,
    invsqrt,
    exp_,
    expneg,
    abs_,
    cbrt_abs,
    thr_gt,        // 1[x > t]
    thr_gt_shift,  // 1[x > t] * (x - s)
    thr_lt_shift,  // 1[x < t] * (x + s)
    sq_thr,        // x^2 * 1[x > t]
    inv_log_half,  // 1 / log(x + 0.5)
    inv_log1p_half // 1 / (log(x + 1) + 0.5)
};

struct Factor {
    FOp op = FOp::lin;
    int i = 1; // 1-based covariate index
    double t = 0.0;
    double s = 0.0;

    double eval(const double* x) const {
        const double v = x[i - 1];
        switch (op) {
            case FOp::lin: return v;
            case FOp::sq: return v * v;
            case FOp::cube: return v * v * v;
            case FOp::sqrt_: return std::sqrt(std::max(v, 0.0));
            case FOp::log_: return std::log(std::max(v, 1e-12));
            case FOp::log1p_: return std::log(std::max(v + 1.0, 1e-12));
            case FOp::inv: return 1.0 / v;
            case FOp::invsqrt: return 1.0 / std::sqrt(std::max(v, 1e-12));
            case FOp::exp_: return std::exp(std::min(v, 30.0));
            case FOp::expneg: return std::exp(std::min(-v, 30.0));
            case FOp::abs_: return std::fabs(v);
            case FOp::cbrt_abs: return std::cbrt(std::fabs(v));
            case FOp::thr_gt: return v > t ? 1.0 : 0.0;
            case FOp::thr_gt_shift: return v > t ? v - s : 0.0;
            case FOp::thr_lt_shift: return v < t ? v + s : 0.0;
            case FOp::sq_thr: return v > t ? v * v : 0.0;
            case FOp::inv_log_half: return 1.0 / std::log(std::max(v + 0.5, 1.0 + 1e-9));
            case FOp::inv_log1p_half: return 1.0 / (std::log(std::max(v + 1.0, 1e-12)) + 0.5);
        }
        return v;
    }
};

struct Term {
    Factor f0, f1, f2;
    int nf = 1;

    double eval(const double* x) const {
        double v = f0.eval(x);
        if (nf > 1) v *= f1.eval(x);
        if (nf > 2) v *= f2.eval(x);
        return v;
    }
};

inline Term term(Factor a) { return Term{a, {}, {}, 1}; }
inline Term term(Factor a, Factor b) { return Term{a, b, {}, 2}; }
inline Term term(Factor a, Factor b, Factor c) { return Term{a, b, c, 3}; }

inline Factor lin(int i) { return {FOp::lin, i, 0, 0}; }
inline Factor sq(int i) { return {FOp::sq, i, 0, 0}; }
inline Factor cube(int i) { return {FOp::cube, i, 0, 0}; }
inline Factor sqrt_of(int i) { return {FOp::sqrt_, i, 0, 0}; }
inline Factor log_of(int i) { return {FOp::log_, i, 0, 0}; }
inline Factor log1p_of(int i) { return {FOp::log1p_, i, 0, 0}; }
inline Factor inv(int i) { return {FOp::inv, i, 0, 0}; }
inline Factor invsqrt(int i) { return {FOp::invsqrt, i, 0, 0}; }
inline Factor exp_of(int i) { return {FOp::exp_, i, 0, 0}; }
inline Factor expneg_of(int i) { return {FOp::expneg, i, 0, 0}; }
inline Factor abs_of(int i) { return {FOp::abs_, i, 0, 0}; }
inline Factor cbrt_abs_of(int i) { return {FOp::cbrt_abs, i, 0, 0}; }
inline Factor thr_gt(int i, double t) { return {FOp::thr_gt, i, t, 0}; }
inline Factor thr_gt_shift(int i, double t, double s) { return {FOp::thr_gt_shift, i, t, s}; }
inline Factor thr_lt_shift(int i, double t, double s) { return {FOp::thr_lt_shift, i, t, s}; }
inline Factor sq_thr(int i, double t) { return {FOp::sq_thr, i, t, 0}; }
inline Factor inv_log_half(int i) { return {FOp::inv_log_half, i, 0, 0}; }
inline Factor inv_log1p_half(int i) { return {FOp::inv_log1p_half, i, 0, 0}; }

/// Linear combination of terms, centered and scaled so drawn-weight
/// combinations have a controlled dispersion. Printed-constant combos
/// set weights directly with centers 0 and scale 1.
struct LinComb {
    std::vector<Term> terms;
    std::vector<double> weights;
    std::vector<double> centers;
    double offset = 0.0;
    double scale = 1.0;

    bool empty() const { return terms.empty(); }

    double eval(const double* x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < terms.size(); ++i)
            s += weights[i] * (terms[i].eval(x) - centers[i]);
        return offset + scale * s;
    }

    int max_index() const {
        int m = 0;
        for (const auto& t : terms) {
            m = std::max(m, t.f0.i);
            if (t.nf > 1) m = std::max(m, t.f1.i);
            if (t.nf > 2) m = std::max(m, t.f2.i);
        }
        return m;
    }
};

/// Normalize drawn weights against a pilot sample: each term is
/// centered and scaled to unit sd, then the whole combination is
/// rescaled to unit sd.
inline void normalize_against_pilot(LinComb& comb, const Matrix& pilot) {
    const std::size_t n = pilot.rows(), nt = comb.terms.size();
    comb.centers.assign(nt, 0.0);
    std::vector<double> sds(nt, 0.0);
    for (std::size_t t = 0; t < nt; ++t) {
        double m = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = comb.terms[t].eval(pilot.row_ptr(i));
            m += v;
            m2 += v * v;
        }
        m /= static_cast<double>(n);
        const double var = std::max(m2 / static_cast<double>(n) - m * m, 0.0);
        comb.centers[t] = m;
        sds[t] = std::sqrt(var);
    }
    for (std::size_t t = 0; t < nt; ++t)
        comb.weights[t] = sds[t] > 1e-12 ? comb.weights[t] / sds[t] : 0.0;
    double m = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t t = 0; t < nt; ++t)
            s += comb.weights[t] * (comb.terms[t].eval(pilot.row_ptr(i)) - comb.centers[t]);
        m += s;
        m2 += s * s;
    }
    m /= static_cast<double>(n);
    const double sd = std::sqrt(std::max(m2 / static_cast<double>(n) - m * m, 1e-12));
    for (double& w : comb.weights) w /= sd;
}

} // namespace dmllab::acic

#endif
