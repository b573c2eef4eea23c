#ifndef DMLLAB_DGP_HPP
#define DMLLAB_DGP_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmllab/dataset.hpp"
#include "dmllab/dgp/acic.hpp"
#include "dmllab/dgp/bch.hpp"
#include "dmllab/dml.hpp"
#include "dmllab/rng.hpp"

namespace dmllab {

enum class DgpKind { bch, acic_template };

/// Which synthetic process to draw from. coeff_seed freezes template
/// coefficients across repetitions; the repetition stream drives the
/// data draws. n = 0 / p = 0 fall back to the template defaults.
struct DgpSpec {
    DgpKind kind = DgpKind::bch;
    int template_id = 1;
    std::size_t n = 0;
    std::size_t p = 0;
    std::uint64_t coeff_seed = 1;
    double bch_rho = 0.5;
    double bch_r2_y = 0.5;
    double bch_r2_d = 0.5;
    double bch_theta = 0.5;

    std::string label() const {
        if (kind == DgpKind::bch) return "bch";
        return "acic" + std::to_string(template_id);
    }
};

struct GeneratedData {
    Dataset data;
    DgpTruth truth;
    DgpSpec spec;
};

/// Approximately sparse linear design with AR(1) Gaussian covariates
/// and continuous treatment; quadratic coefficient decay calibrated to
/// the requested population R^2 of each equation.
inline GeneratedData gen_bch(std::size_t n, std::size_t p, double rho, double r2_y, double r2_d,
                             double theta0, RngStream rng) {
    if (n < 2 || p < 1) throw std::invalid_argument("gen_bch: need n >= 2, p >= 1");
    const BchCoefficients coef = bch_coefficients(p, rho, r2_y, r2_d, theta0);
    const double idio = std::sqrt(1.0 - rho * rho);

    GeneratedData out;
    out.spec.kind = DgpKind::bch;
    out.spec.n = n;
    out.spec.p = p;
    out.spec.bch_rho = rho;
    out.spec.bch_r2_y = r2_y;
    out.spec.bch_r2_d = r2_d;
    out.spec.bch_theta = theta0;

    out.data.x = Matrix(n, p);
    out.data.y.resize(n);
    out.data.d.resize(n);
    out.data.treatment_kind = TreatmentKind::continuous;
    out.truth.theta0 = theta0;
    out.truth.ell0.resize(n);
    out.truth.m0.resize(n);
    out.truth.g0_0.resize(n);
    out.truth.g0_1.resize(n);
    out.truth.eps.resize(n);
    out.truth.v.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data.x.row_ptr(i);
        row[0] = rng.normal();
        for (std::size_t j = 1; j < p; ++j) row[j] = rho * row[j - 1] + idio * rng.normal();
        double xb = 0.0, xg = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            xb += coef.beta[j] * row[j];
            xg += coef.gamma[j] * row[j];
        }
        const double v = rng.normal();
        const double eps = rng.normal();
        const double d = xg + v;
        out.data.d[i] = d;
        out.data.y[i] = theta0 * d + xb + eps;
        out.truth.m0[i] = xg;
        out.truth.ell0[i] = theta0 * xg + xb;
        out.truth.g0_0[i] = xb;
        out.truth.g0_1[i] = theta0 + xb;
        out.truth.eps[i] = eps;
        out.truth.v[i] = v;
    }
    return out;
}

/// One repetition from an ACIC template instantiation. Template
/// coefficients come from coeff_seed (cached across calls); data draws
/// come from rng. Regenerates on the astronomically rare single-class
/// treatment draw.
inline GeneratedData gen_acic(int template_id, const DgpSpec& overrides,
                              std::uint64_t coeff_seed, RngStream rng) {
    const auto inst = acic::detail::get_instance(template_id, coeff_seed);
    const std::size_t n = overrides.n ? overrides.n : inst->spec.default_n;
    const std::size_t p = overrides.p ? overrides.p : 200;
    if (n < 2) throw std::invalid_argument("gen_acic: need n >= 2");
    if (p < 200)
        throw std::invalid_argument("gen_acic: templates address covariates up to x200; p >= 200");

    GeneratedData out;
    out.spec = overrides;
    out.spec.kind = DgpKind::acic_template;
    out.spec.template_id = template_id;
    out.spec.n = n;
    out.spec.p = p;
    out.spec.coeff_seed = coeff_seed;

    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        RngStream draw = rng.derive(hash_tag("acic-data"), attempt);
        out.data.x = Matrix(n, p);
        out.data.y.assign(n, 0.0);
        out.data.d.assign(n, 0.0);
        out.data.treatment_kind = TreatmentKind::binary;
        out.truth.theta0 = inst->theta0;
        out.truth.ell0.assign(n, 0.0);
        out.truth.m0.assign(n, 0.0);
        out.truth.g0_0.assign(n, 0.0);
        out.truth.g0_1.assign(n, 0.0);
        out.truth.eps.assign(n, 0.0);
        out.truth.v.assign(n, 0.0);

        bool any0 = false, any1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            double* row = out.data.x.row_ptr(i);
            acic::draw_covariate_row(p, draw, row);
            const double m0 = sigmoid(inst->prop_index(row));
            const double a = draw.bernoulli(m0) ? 1.0 : 0.0;
            const double eps = inst->spec.noise.draw(draw, a);
            const double g0 = inst->g_of(row, 0.0);
            const double g1 = inst->g_of(row, 1.0);
            out.data.d[i] = a;
            out.data.y[i] = inst->y_of(row, a, eps);
            out.truth.m0[i] = m0;
            out.truth.g0_0[i] = g0;
            out.truth.g0_1[i] = g1;
            out.truth.ell0[i] = m0 * g1 + (1.0 - m0) * g0;
            out.truth.eps[i] = eps;
            out.truth.v[i] = a - m0;
            (a == 1.0 ? any1 : any0) = true;
        }
        if (any0 && any1) return out;
    }
    throw std::runtime_error("gen_acic: could not draw both treatment classes");
}

inline GeneratedData generate(const DgpSpec& spec, RngStream rng) {
    if (spec.kind == DgpKind::bch) {
        const std::size_t n = spec.n ? spec.n : 100;
        const std::size_t p = spec.p ? spec.p : 200;
        GeneratedData out =
            gen_bch(n, p, spec.bch_rho, spec.bch_r2_y, spec.bch_r2_d, spec.bch_theta, rng);
        out.spec.coeff_seed = spec.coeff_seed;
        return out;
    }
    return gen_acic(spec.template_id, spec, spec.coeff_seed, rng);
}

/// DML score solved with the true nuisance functions plugged in (no ML,
/// no cross-fitting); the rRMSE denominator.
inline CausalEstimate oracle_estimate(const GeneratedData& gen, ModelKind kind,
                                      double clip = 0.01, double level = 0.95) {
    NuisancePredictions nuis;
    nuis.model_kind = kind;
    nuis.fold_of.assign(gen.data.n(), 0);
    if (kind == ModelKind::plr) {
        nuis.ell_hat = gen.truth.ell0;
        nuis.m_hat = gen.truth.m0;
        return plr_estimate(gen.data, nuis, level);
    }
    if (gen.data.treatment_kind != TreatmentKind::binary)
        throw InvalidModelError("oracle_estimate: IRM needs a binary treatment");
    nuis.g0_hat = gen.truth.g0_0;
    nuis.g1_hat = gen.truth.g0_1;
    nuis.m_hat.resize(gen.data.n());
    for (std::size_t i = 0; i < gen.data.n(); ++i)
        nuis.m_hat[i] = std::min(1.0 - clip, std::max(clip, gen.truth.m0[i]));
    return irm_ate_estimate(gen.data, nuis, level);
}

/// Mean over repetitions of Var(Y)/Var(eps) from the generated data.
inline double empirical_snr(const DgpSpec& spec, std::size_t reps, RngStream rng) {
    if (reps < 1) throw std::invalid_argument("empirical_snr: need reps >= 1");
    double total = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        const GeneratedData gen = generate(spec, rng.derive(hash_tag("snr"), r));
        total += variance(gen.data.y) / variance(gen.truth.eps);
    }
    return total / static_cast<double>(reps);
}

} // namespace dmllab

#endif
