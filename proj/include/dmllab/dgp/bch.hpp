#ifndef DMLLAB_DGP_BCH_HPP
#define DMLLAB_DGP_BCH_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dmllab/dataset.hpp"
#include "dmllab/rng.hpp"

namespace dmllab {

namespace detail {

/// u' Sigma u for the AR(1) Toeplitz covariance Sigma_jk = rho^|j-k|.
inline double toeplitz_quadform(const std::vector<double>& u, const std::vector<double>& v,
                                double rho) {
    const std::size_t p = u.size();
    std::vector<double> rho_pow(p);
    rho_pow[0] = 1.0;
    for (std::size_t k = 1; k < p; ++k) rho_pow[k] = rho_pow[k - 1] * rho;
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k)
            s += u[j] * v[k] * rho_pow[j > k ? j - k : k - j];
    return s;
}

} // namespace detail

struct BchCoefficients {
    std::vector<double> beta;  // outcome equation
    std::vector<double> gamma; // treatment equation
    double theta = 0.5;
};

/// Quadratic-decay coefficient vectors c*(1/j)^2, with each constant
/// calibrated so the population R^2 of its x-part against the unit
/// noise is the requested value: Var(X'b) / (Var(X'b) + 1) = r2. The
/// outcome equation's R^2 refers to the partialled equation
/// Y - theta*D = X'beta + noise, so any theta is admissible.
inline BchCoefficients bch_coefficients(std::size_t p, double rho, double r2_y, double r2_d,
                                        double theta) {
    if (!(r2_y > 0.0 && r2_y < 1.0) || !(r2_d > 0.0 && r2_d < 1.0))
        throw std::invalid_argument("bch: r2 values must lie in (0,1)");
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("bch: rho must lie in (-1,1)");
    std::vector<double> decay(p);
    for (std::size_t j = 0; j < p; ++j)
        decay[j] = 1.0 / ((static_cast<double>(j) + 1.0) * (static_cast<double>(j) + 1.0));
    const double quad = detail::toeplitz_quadform(decay, decay, rho);

    const double c_d = std::sqrt(r2_d / (1.0 - r2_d) / quad);
    const double c_y = std::sqrt(r2_y / (1.0 - r2_y) / quad);

    BchCoefficients out;
    out.theta = theta;
    out.beta.resize(p);
    out.gamma.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        out.beta[j] = c_y * decay[j];
        out.gamma[j] = c_d * decay[j];
    }
    return out;
}

} // namespace dmllab

#endif
