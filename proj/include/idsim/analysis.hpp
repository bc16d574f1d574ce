#pragma once

#include <cstdint>
#include <string>

#include "idsim/rng.hpp"

namespace idsim {

// Growth laws relating identity count to block length.
enum class ScalingKind {
    exponential,        // N = 2^(nR)
    super_exponential,  // N = n^(nR)
    doubly_exponential, // N = 2^(2^(nR))
};

ScalingKind scaling_from_string(const std::string& name);
std::string to_string(ScalingKind kind);

// log2 of the Chernoff bound 2^(-L * D(lambda||mu)) on the collision tail.
// Requires mu <= lambda with mu in (0,1).
double chernoff_log2_bound(std::int64_t L, double lambda, double mu);

struct BoundReport {
    double log2_bound = 0.0;
    bool vacuous = false;  // lambda*log2(M) <= 1, exponent not negative
};

// log2 of the weaker closed-form bound 2^(-L*(lambda*log2(M) - 1)).
BoundReport corollary_log2_bound(std::int64_t L, double lambda, int M);

struct MaxIdentities {
    double log2_n = 0.0;
    bool feasible = false;
};

// log2 of the largest identity count the union bound supports:
// log2(N) = L * (lambda*log2(M) - 1).
MaxIdentities max_identities_log2(std::int64_t L, double lambda, int M);

struct SurvivalBound {
    double log2_bound = 0.0;  // -inf when the bound is not positive
    bool positive = false;
};

// log2 of the lower bound 1 - (N-1)*2^(-L*(lambda*log2(M)-1)) on the
// probability that every competing identity stays below lambda, computed in
// the log domain.
SurvivalBound survival_log2_probability(double log2_n, std::int64_t L, double lambda, int M);

// Rate of log2_n identities at block length n under the given scaling.
double rate_under_scaling(double log2_n, int n, ScalingKind kind);

// Doubly-exponential rate composed with the maximum identity count, carried
// in the log domain so astronomically large L stays representable:
// rate = (log2(L) + log2(lambda*log2(M) - 1)) / n.
double phi3_rate_from_log2_L(double log2_L, double lambda, int M, int n);

// Exact tail Pr[Bin(n, p) > threshold] by direct summation.
double binomial_tail_gt(std::int64_t n, double p, double threshold);

struct PsiTailResult {
    long long exceed = 0;
    long long trials = 0;
    double frequency = 0.0;
    double chernoff_bound = 0.0;   // 2^chernoff_log2_bound
    double corollary_bound = 0.0;  // 2^corollary_log2_bound (may exceed 1 when vacuous)
};

// Draws pair_trials collision experiments (sums of L Bernoulli(1/M)) and
// reports how often the sum exceeds L*lambda, next to both closed-form bounds.
PsiTailResult empirical_psi_tail(std::int64_t L, double lambda, int M, long long pair_trials,
                                 RngStream rng, int workers = 1);

} // namespace idsim
