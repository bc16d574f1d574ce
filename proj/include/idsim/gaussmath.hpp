#pragma once

#include <optional>
#include <span>
#include <vector>

#include "idsim/rng.hpp"

namespace idsim {

// Symmetric positive-semidefinite matrix, row-major.
struct CovMatrix {
    int dim = 0;
    std::vector<double> a;

    CovMatrix() = default;
    explicit CovMatrix(int k) : dim(k), a(static_cast<std::size_t>(k) * k, 0.0) {}

    static CovMatrix identity(int k);

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * dim + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * dim + j]; }
};

// Standard normal CDF. Absolute error well below 1e-12; throws on non-finite input.
double std_normal_cdf(double x);

// Standard normal density.
double std_normal_pdf(double x);

// Inverse standard normal CDF. p=0 and p=1 map to -inf/+inf; throws outside [0,1].
// Rational approximation refined by one Newton step; |cdf(quantile(p)) - p| <= 1e-9
// across p in [1e-10, 1-1e-10].
double std_normal_quantile(double p);

// Binary information divergence D(lambda||mu) in bits, with 0*log 0 = 0.
// Throws when mu is 0 or 1.
double binary_kl_bits(double lambda, double mu);

// Same divergence in nats, kept as a cross-check output.
double binary_kl_nats(double lambda, double mu);

// Upper-tail quantile of the chi-square distribution (Wilson-Hilferty,
// exact for 1 degree of freedom). Accurate to ~0.1% for the dof used here.
double chi2_critical(double p, int dof);

// Lower-triangular A with A*A^T = sigma, row-major. Accepts semidefinite
// input: zero pivots produce zero columns. Throws on asymmetric or
// indefinite matrices.
std::vector<double> cholesky_lower(const CovMatrix& sigma);

// One standard normal variate via the inverse-CDF transform, so a single
// uniform is consumed per draw and the output is monotone in it.
double sample_std_normal(RngStream& rng);

// mu + A*z with z i.i.d. standard normal and A = cholesky_lower(sigma).
std::vector<double> sample_mvn(std::span<const double> mu, const CovMatrix& sigma, RngStream& rng);

// Preconditioned variant for hot loops: chol is cholesky_lower(sigma), out
// has size mu.size(), scratch z reused between calls.
void sample_mvn_chol(std::span<const double> mu, std::span<const double> chol,
                     RngStream& rng, std::span<double> out, std::span<double> z);

} // namespace idsim
