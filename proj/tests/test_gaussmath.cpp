#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "idsim/gaussmath.hpp"
#include "idsim/rng.hpp"
#include "oracles.hpp"

using namespace idsim;

TEST_CASE("std_normal_cdf matches the integration oracle") {
    CHECK(std_normal_cdf(0.0) == 0.5);
    CHECK(std_normal_cdf(1.0) == doctest::Approx(0.841345).epsilon(1e-5));
    for (double x : {-6.0, -3.0, -1.0, -0.2, 0.3, 1.0, 2.5, 4.0, 6.0})
        CHECK(std::abs(std_normal_cdf(x) - oracle::normal_cdf(x)) <= 1e-12);
    // Symmetry identity.
    CHECK(std_normal_cdf(-1.0) == doctest::Approx(1.0 - std_normal_cdf(1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(std_normal_cdf(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(std_normal_cdf(INFINITY), std::invalid_argument);
}

TEST_CASE("std_normal_cdf is strictly increasing on a dense grid") {
    // Within +-7 the CDF increments stay far above one ulp of the result.
    double prev = std_normal_cdf(-7.0);
    for (int i = 1; i <= 2800; ++i) {
        const double x = -7.0 + i * 0.005;
        const double cur = std_normal_cdf(x);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("std_normal_quantile hits the spec points and boundaries") {
    CHECK(std_normal_quantile(0.5) == 0.0);
    const double q25 = oracle::normal_quantile_bisect(0.25, [](double x) { return std_normal_cdf(x); });
    CHECK(std_normal_quantile(0.25) == doctest::Approx(q25).epsilon(1e-10));
    CHECK(std_normal_quantile(0.25) == doctest::Approx(-0.674490).epsilon(1e-5));
    CHECK(std::isinf(std_normal_quantile(0.0)));
    CHECK(std_normal_quantile(0.0) < 0.0);
    CHECK(std::isinf(std_normal_quantile(1.0)));
    CHECK(std_normal_quantile(1.0) > 0.0);
    CHECK_THROWS_AS(std_normal_quantile(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(std_normal_quantile(1.1), std::invalid_argument);
}

TEST_CASE("quantile round trips within 1e-9 in probability") {
    // Log-spaced grid over [1e-10, 1-1e-10].
    for (int i = 0; i <= 1000; ++i) {
        const double lg = -10.0 + i * (10.0 + std::log10(0.5)) / 1000.0;
        const double p = std::pow(10.0, lg);
        for (double q : {p, 1.0 - p}) {
            const double x = std_normal_quantile(q);
            CHECK(std::abs(std_normal_cdf(x) - q) <= 1e-9);
        }
    }
    // And back through x.
    for (double x = -6.0; x <= 6.0; x += 0.01)
        CHECK(std::abs(std_normal_quantile(std_normal_cdf(x)) - x) <= 1e-8);
}

TEST_CASE("binary_kl closed-form values") {
    CHECK(binary_kl_bits(0.3, 0.3) == 0.0);
    CHECK(binary_kl_bits(0.5, 0.25) == doctest::Approx(0.2075187496394219).epsilon(1e-12));
    CHECK(binary_kl_bits(0.25, 1.0 / 256) == doctest::Approx(1.1929568).epsilon(1e-6));
    CHECK(binary_kl_bits(0.0, 0.5) == doctest::Approx(1.0));
    CHECK(binary_kl_bits(1.0, 0.5) == doctest::Approx(1.0));
    CHECK(binary_kl_nats(0.5, 0.25) == doctest::Approx(0.2075187496394219 * std::log(2.0)));
    CHECK_THROWS_AS(binary_kl_bits(0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(binary_kl_bits(0.5, 1.0), std::invalid_argument);
}

TEST_CASE("binary_kl nonnegativity and the corollary dominance") {
    for (double lambda = 0.02; lambda < 1.0; lambda += 0.02)
        for (double mu : {0.01, 0.1, 0.25, 0.5, 0.9}) {
            const double d = binary_kl_bits(lambda, mu);
            if (std::abs(lambda - mu) < 1e-12)
                CHECK(d == doctest::Approx(0.0).epsilon(1e-12));
            else
                CHECK(d > 0.0);
        }
    // D(lambda || 1/M) >= lambda*log2(M) - 1 is what makes the weaker bound valid.
    for (int M : {2, 4, 16, 256})
        for (double lambda = 0.05; lambda < 1.0; lambda += 0.05)
            CHECK(binary_kl_bits(lambda, 1.0 / M) >= lambda * std::log2(double(M)) - 1.0 - 1e-12);
}

TEST_CASE("cholesky factorizations") {
    CHECK(cholesky_lower(CovMatrix::identity(2)) == std::vector<double>{1, 0, 0, 1});

    CovMatrix diag(2);
    diag(0, 0) = 4.0;
    diag(1, 1) = 9.0;
    CHECK(cholesky_lower(diag) == std::vector<double>{2, 0, 0, 3});

    CovMatrix corr(2);
    corr(0, 0) = corr(1, 1) = 1.0;
    corr(0, 1) = corr(1, 0) = 0.5;
    const auto lo = cholesky_lower(corr);
    double frob = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double v = 0.0;
            for (int k = 0; k < 2; ++k) v += lo[i * 2 + k] * lo[j * 2 + k];
            frob += (v - corr(i, j)) * (v - corr(i, j));
        }
    CHECK(std::sqrt(frob) <= 1e-10);

    CovMatrix asym(2);
    asym(0, 0) = asym(1, 1) = 1.0;
    asym(0, 1) = 0.5;
    asym(1, 0) = 0.4;
    CHECK_THROWS_AS(cholesky_lower(asym), std::invalid_argument);

    CovMatrix indef(2);
    indef(0, 0) = 1.0;
    indef(1, 1) = -1.0;
    CHECK_THROWS_AS(cholesky_lower(indef), std::invalid_argument);

    // Semidefinite: a zero row/column factors with a zero column.
    CovMatrix semi(2);
    semi(0, 0) = 1.0;
    const auto lo2 = cholesky_lower(semi);
    CHECK(lo2 == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("sample_std_normal determinism and moments") {
    RngStream a(7, 3), b(7, 3);
    CHECK(sample_std_normal(a) == sample_std_normal(b));

    RngStream rng(123, 0);
    const long long n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (long long i = 0; i < n; ++i) {
        const double x = sample_std_normal(rng);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) <= 0.004);
    CHECK(std::abs(var - 1.0) <= 0.006);
}

TEST_CASE("sample_std_normal empirical CDF passes Kolmogorov-Smirnov at 1%") {
    RngStream rng(5, 9);
    const long long n = 100000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample_std_normal(rng);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (long long i = 0; i < n; ++i) {
        const double f = std_normal_cdf(xs[i]);
        d = std::max(d, std::abs(f - double(i + 1) / n));
        d = std::max(d, std::abs(f - double(i) / n));
    }
    CHECK(d < oracle::ks_critical_1pct(n));
}

TEST_CASE("sample_mvn moments and degenerate directions") {
    CovMatrix sigma(2);
    sigma(0, 0) = sigma(1, 1) = 1.0;
    sigma(0, 1) = sigma(1, 0) = 0.5;
    const std::vector<double> mu = {1.0, -1.0};

    RngStream rng(2024, 1);
    const long long n = 100000;
    double m0 = 0, m1 = 0, c00 = 0, c01 = 0, c11 = 0;
    for (long long i = 0; i < n; ++i) {
        const auto v = sample_mvn(mu, sigma, rng);
        m0 += v[0];
        m1 += v[1];
        c00 += (v[0] - 1.0) * (v[0] - 1.0);
        c01 += (v[0] - 1.0) * (v[1] + 1.0);
        c11 += (v[1] + 1.0) * (v[1] + 1.0);
    }
    const double se_mean = 3.0 / std::sqrt(double(n));
    CHECK(std::abs(m0 / n - 1.0) <= se_mean);
    CHECK(std::abs(m1 / n + 1.0) <= se_mean);
    // var of a covariance estimate entry is (s_ii s_jj + s_ij^2)/n.
    CHECK(std::abs(c00 / n - 1.0) <= 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(c11 / n - 1.0) <= 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(c01 / n - 0.5) <= 3.0 * std::sqrt(1.25 / n));

    CHECK_THROWS_AS(sample_mvn(std::vector<double>{0.0}, sigma, rng), std::invalid_argument);

    // Zero row/column: that component is deterministic at its mean.
    CovMatrix semi(2);
    semi(0, 0) = 2.0;
    for (int i = 0; i < 100; ++i) {
        const auto v = sample_mvn(mu, semi, rng);
        CHECK(v[1] == -1.0);
    }

    // Identity covariance: independent standard normals (spot-check correlation).
    RngStream rng2(99, 0);
    double corr = 0.0;
    for (long long i = 0; i < 100000; ++i) {
        const auto v = sample_mvn(std::vector<double>{0.0, 0.0}, CovMatrix::identity(2), rng2);
        corr += v[0] * v[1];
    }
    CHECK(std::abs(corr / 100000) <= 3.0 / std::sqrt(100000.0));
}

TEST_CASE("chi2_critical against table values") {
    CHECK(chi2_critical(0.99, 1) == doctest::Approx(oracle::chi2_crit_99(1)).epsilon(1e-6));
    CHECK(chi2_critical(0.99, 15) == doctest::Approx(oracle::chi2_crit_99(15)).epsilon(2e-3));
    CHECK(chi2_critical(0.99, 63) == doctest::Approx(oracle::chi2_crit_99(63)).epsilon(1e-3));
}

TEST_CASE("rng streams are reproducible and distinct") {
    RngStream a(11, 0), b(11, 0), c(11, 1);
    bool all_equal = true, any_equal = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
        all_equal = all_equal && va == vb;
        any_equal = any_equal || va == vc;
    }
    CHECK(all_equal);
    CHECK_FALSE(any_equal);

    // derive() is independent of consumption position.
    RngStream base(3, 4);
    const RngStream d1 = base.derive(5, 6);
    base.next_u64();
    RngStream d2 = base.derive(5, 6);
    RngStream d1c = d1;
    CHECK(d1c.next_u64() == d2.next_u64());
}
