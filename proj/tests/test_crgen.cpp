#include <doctest.h>

#include <cmath>

#include "idsim/crgen.hpp"
#include "idsim/gaussmath.hpp"
#include "oracles.hpp"

using namespace idsim;

TEST_CASE("derive_output_stats") {
    CHECK(derive_output_stats({1, 1.0}, {}) == std::pair<double, double>{0.0, 1.0});

    StateParams s1;
    s1.mu = {1.0, -1.0};
    s1.sigma = CovMatrix::identity(2);
    const auto [m1, sd1] = derive_output_stats({2, 1.0}, s1);
    CHECK(m1 == 0.0);
    CHECK(sd1 == doctest::Approx(std::sqrt(3.0)));

    StateParams s2;
    s2.mu = {1.0, 1.0};
    s2.sigma = CovMatrix(2);
    s2.sigma(0, 0) = s2.sigma(1, 1) = 1.0;
    s2.sigma(0, 1) = s2.sigma(1, 0) = 0.5;
    const auto [m2, sd2] = derive_output_stats({2, 2.0}, s2);
    CHECK(m2 == 2.0);
    CHECK(sd2 == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("bin boundaries: median split, quartiles, location-scale shift") {
    const auto b2 = bin_boundaries({2, 0.0, 1.0});
    REQUIRE(b2.size() == 3);
    CHECK(std::isinf(b2[0]));
    CHECK(b2[1] == 0.0);
    CHECK(std::isinf(b2[2]));

    const auto b4 = bin_boundaries({4, 0.0, 1.0});
    REQUIRE(b4.size() == 5);
    const double q25 = oracle::normal_quantile_bisect(0.25, [](double x) { return std_normal_cdf(x); });
    CHECK(b4[1] == doctest::Approx(q25).epsilon(1e-9));
    CHECK(b4[1] == doctest::Approx(-0.674490).epsilon(1e-5));
    CHECK(b4[2] == 0.0);
    CHECK(b4[3] == doctest::Approx(-q25).epsilon(1e-9));

    const auto shifted = bin_boundaries({4, 5.0, 2.0});
    for (int l = 1; l < 4; ++l) CHECK(shifted[l] == doctest::Approx(5.0 + 2.0 * b4[l]).epsilon(1e-12));

    CHECK_THROWS_AS(bin_boundaries({1, 0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(bin_boundaries({4, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("boundaries stay strictly increasing even for large L") {
    const auto b = bin_boundaries({1 << 20, 0.0, 1.0});
    bool strict = true;
    for (std::size_t l = 1; l < b.size(); ++l) strict = strict && b[l] > b[l - 1];
    CHECK(strict);
}

TEST_CASE("quantize: sign split, boundary tie, monotonicity, scale invariance") {
    const Quantizer q({2, 0.0, 1.0});
    CHECK(q(-0.3) == 1);
    CHECK(q(0.3) == 2);
    CHECK(q(0.0) == 1);  // boundary tie goes to the lower bin
    CHECK_THROWS_AS(q(std::nan("")), std::invalid_argument);

    const Quantizer q8({8, 0.0, 1.0});
    std::int64_t prev = 1;
    for (double y = -5.0; y <= 5.0; y += 0.01) {
        const std::int64_t cur = q8(y);
        CHECK(cur >= prev);
        prev = cur;
    }

    const Quantizer scaled({8, 3.0, 2.5});
    for (double y = -4.0; y <= 4.0; y += 0.37)
        CHECK(scaled(3.0 + 2.5 * y) == q8(y));
}

TEST_CASE("quantized output is uniform: binomial bands and chi-square") {
    const long long trials = 1000000;
    for (std::int64_t L : {2L, 16L, 64L, 1024L}) {
        const Quantizer q({L, 1.5, 2.0});
        RngStream rng(100 + L, 0);
        std::vector<long long> counts(L, 0);
        for (long long t = 0; t < trials; ++t)
            counts[q(1.5 + 2.0 * sample_std_normal(rng)) - 1]++;

        const double p = 1.0 / static_cast<double>(L);
        // Per-bin binomial band, Bonferroni-adjusted so the family-wise level
        // across all L bins stays at 0.1%.
        const double z = std_normal_quantile(1.0 - 0.0005 / static_cast<double>(L));
        const double band = z * std::sqrt(p * (1 - p) / trials);
        const double expected = trials * p;
        double chi2 = 0.0;
        for (long long c : counts) {
            CHECK(std::abs(c / double(trials) - p) <= band);
            chi2 += (c - expected) * (c - expected) / expected;
        }
        CHECK(chi2 < chi2_critical(0.99, static_cast<int>(L - 1)));
    }
}

TEST_CASE("encoders and decoder quantize the same sample identically") {
    const Quantizer enc_side({64, 0.0, 2.0});
    const Quantizer dec_side({64, 0.0, 2.0});
    RngStream rng(7, 7);
    for (int i = 0; i < 10000; ++i) {
        const double y = 2.0 * sample_std_normal(rng);
        CHECK(enc_side(y) == dec_side(y));
    }
}
