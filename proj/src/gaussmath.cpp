#include "idsim/gaussmath.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace idsim {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Acklam's rational approximation to the inverse normal CDF,
// relative accuracy ~1.15e-9 before refinement.
double acklam_quantile(double p) {
    static const double a1 = -39.69683028665376, a2 = 220.9460984245205, a3 = -275.9285104469687,
                        a4 = 138.3577518672690, a5 = -30.66479806614716, a6 = 2.506628277459239;
    static const double b1 = -54.47609879822406, b2 = 161.5858368580409, b3 = -155.6989798598866,
                        b4 = 66.80131188771972, b5 = -13.28068155288572;
    static const double c1 = -7.784894002430293e-03, c2 = -3.223964580411365e-01,
                        c3 = -2.400758277161838, c4 = -2.549732539343734, c5 = 4.374664141464968,
                        c6 = 2.938163982698783;
    static const double d1 = 7.784695709041462e-03, d2 = 3.224671290700398e-01,
                        d3 = 2.445134137142996, d4 = 3.754408661907416;
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               (((((d1 * q + d2) * q + d3) * q + d4) * q) + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               (((((d1 * q + d2) * q + d3) * q + d4) * q) + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a1 * r + a2) * r + a3) * r + a4) * r + a5) * r + a6) * q /
           (((((b1 * r + b2) * r + b3) * r + b4) * r + b5) * r + 1);
}

} // namespace

CovMatrix CovMatrix::identity(int k) {
    CovMatrix m(k);
    for (int i = 0; i < k; ++i) m(i, i) = 1.0;
    return m;
}

double std_normal_cdf(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("std_normal_cdf: non-finite input");
    return 0.5 * std::erfc(-x / kSqrt2);
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("std_normal_quantile: p outside [0,1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    double x = acklam_quantile(p);
    // One Newton step against the erfc-based CDF.
    const double err = 0.5 * std::erfc(-x / kSqrt2) - p;
    x -= err / std_normal_pdf(x);
    return x;
}

double binary_kl_bits(double lambda, double mu) {
    if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("binary_kl: mu must lie in (0,1)");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("binary_kl: lambda outside [0,1]");
    double d = 0.0;
    if (lambda > 0.0) d += lambda * std::log2(lambda / mu);
    if (lambda < 1.0) d += (1.0 - lambda) * std::log2((1.0 - lambda) / (1.0 - mu));
    return d;
}

double binary_kl_nats(double lambda, double mu) {
    return binary_kl_bits(lambda, mu) * 0.6931471805599453;
}

double chi2_critical(double p, int dof) {
    if (dof < 1) throw std::invalid_argument("chi2_critical: dof must be positive");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_critical: p outside (0,1)");
    const double z = std_normal_quantile(p);
    if (dof == 1) {
        const double q = std_normal_quantile(0.5 + 0.5 * p);
        return q * q;
    }
    const double c = 2.0 / (9.0 * dof);
    const double t = 1.0 - c + z * std::sqrt(c);
    return dof * t * t * t;
}

std::vector<double> cholesky_lower(const CovMatrix& sigma) {
    const int n = sigma.dim;
    if (n <= 0) throw std::invalid_argument("cholesky_lower: empty matrix");
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale += std::abs(sigma(i, i));
    if (scale == 0.0) scale = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-12 * scale)
                throw std::invalid_argument("cholesky_lower: matrix not symmetric");

    const double pivot_floor = -1e-12 * scale;
    std::vector<double> lo(static_cast<std::size_t>(n) * n, 0.0);
    auto L = [&](int i, int j) -> double& { return lo[static_cast<std::size_t>(i) * n + j]; };
    for (int j = 0; j < n; ++j) {
        double d = sigma(j, j);
        for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (d < pivot_floor) throw std::invalid_argument("cholesky_lower: matrix not semidefinite");
        if (d <= 0.0) {
            // Degenerate direction: the column stays zero and the off-diagonal
            // entries must already be explained by earlier columns.
            for (int i = j + 1; i < n; ++i) {
                double r = sigma(i, j);
                for (int k = 0; k < j; ++k) r -= L(i, k) * L(j, k);
                if (std::abs(r) > 1e-9 * scale)
                    throw std::invalid_argument("cholesky_lower: matrix not semidefinite");
            }
            continue;
        }
        const double piv = std::sqrt(d);
        L(j, j) = piv;
        for (int i = j + 1; i < n; ++i) {
            double r = sigma(i, j);
            for (int k = 0; k < j; ++k) r -= L(i, k) * L(j, k);
            L(i, j) = r / piv;
        }
    }
    return lo;
}

double sample_std_normal(RngStream& rng) { return std_normal_quantile(rng.next_unit()); }

std::vector<double> sample_mvn(std::span<const double> mu, const CovMatrix& sigma, RngStream& rng) {
    if (static_cast<int>(mu.size()) != sigma.dim)
        throw std::invalid_argument("sample_mvn: dimension mismatch");
    const std::vector<double> chol = cholesky_lower(sigma);
    std::vector<double> out(mu.size());
    std::vector<double> z(mu.size());
    sample_mvn_chol(mu, chol, rng, out, z);
    return out;
}

void sample_mvn_chol(std::span<const double> mu, std::span<const double> chol, RngStream& rng,
                     std::span<double> out, std::span<double> z) {
    const int n = static_cast<int>(mu.size());
    for (int i = 0; i < n; ++i) z[i] = sample_std_normal(rng);
    for (int i = 0; i < n; ++i) {
        double acc = mu[i];
        const double* row = chol.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j <= i; ++j) acc += row[j] * z[j];
        out[i] = acc;
    }
}

} // namespace idsim
