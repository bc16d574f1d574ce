#include "idsim/analysis.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "idsim/gaussmath.hpp"
#include "idsim/parallel.hpp"

namespace idsim {

ScalingKind scaling_from_string(const std::string& name) {
    if (name == "exponential" || name == "phi1") return ScalingKind::exponential;
    if (name == "super-exponential" || name == "phi2") return ScalingKind::super_exponential;
    if (name == "doubly-exponential" || name == "phi3") return ScalingKind::doubly_exponential;
    throw std::invalid_argument("unknown scaling kind: " + name);
}

std::string to_string(ScalingKind kind) {
    switch (kind) {
        case ScalingKind::exponential: return "exponential";
        case ScalingKind::super_exponential: return "super-exponential";
        case ScalingKind::doubly_exponential: return "doubly-exponential";
    }
    return "?";
}

double chernoff_log2_bound(std::int64_t L, double lambda, double mu) {
    if (L < 1) throw std::invalid_argument("chernoff_log2_bound: L must be positive");
    if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("chernoff_log2_bound: mu outside (0,1)");
    if (!(lambda >= mu && lambda <= 1.0))
        throw std::invalid_argument("chernoff_log2_bound: need mu <= lambda <= 1");
    return -static_cast<double>(L) * binary_kl_bits(lambda, mu);
}

BoundReport corollary_log2_bound(std::int64_t L, double lambda, int M) {
    if (L < 1) throw std::invalid_argument("corollary_log2_bound: L must be positive");
    if (M < 2) throw std::invalid_argument("corollary_log2_bound: M must be at least 2");
    if (!(lambda >= 1.0 / M)) throw std::invalid_argument("corollary_log2_bound: need 1/M <= lambda");
    BoundReport report;
    const double exponent = lambda * std::log2(static_cast<double>(M)) - 1.0;
    report.log2_bound = -static_cast<double>(L) * exponent;
    report.vacuous = exponent <= 0.0;
    return report;
}

MaxIdentities max_identities_log2(std::int64_t L, double lambda, int M) {
    if (L < 1) throw std::invalid_argument("max_identities_log2: L must be positive");
    if (M < 2) throw std::invalid_argument("max_identities_log2: M must be at least 2");
    MaxIdentities out;
    const double exponent = lambda * std::log2(static_cast<double>(M)) - 1.0;
    out.feasible = exponent > 0.0;
    out.log2_n = out.feasible ? static_cast<double>(L) * exponent : 0.0;
    return out;
}

SurvivalBound survival_log2_probability(double log2_n, std::int64_t L, double lambda, int M) {
    constexpr double kLn2 = 0.6931471805599453;
    SurvivalBound out;
    if (log2_n <= 0.0) {
        // A single identity survives with certainty.
        out.positive = true;
        out.log2_bound = 0.0;
        return out;
    }
    const double exponent = static_cast<double>(L) * (lambda * std::log2(static_cast<double>(M)) - 1.0);
    // log2((N-1) * 2^-exponent), with the -1 folded in via log1p so the
    // boundary case log2_n == exponent keeps its tiny negative margin.
    const double log2_term = (log2_n - exponent) + std::log1p(-std::exp2(-log2_n)) / kLn2;
    if (!(log2_term < 0.0)) {
        out.positive = false;
        out.log2_bound = -std::numeric_limits<double>::infinity();
        return out;
    }
    // log2(1 - 2^log2_term) without cancellation on either side of 1/2.
    const double t = log2_term * kLn2;
    out.log2_bound = t > -kLn2 ? std::log(-std::expm1(t)) / kLn2 : std::log1p(-std::exp(t)) / kLn2;
    out.positive = true;
    return out;
}

double rate_under_scaling(double log2_n, int n, ScalingKind kind) {
    if (!(log2_n > 0.0)) throw std::invalid_argument("rate_under_scaling: log2_n must be positive");
    if (n < 1) throw std::invalid_argument("rate_under_scaling: n must be positive");
    switch (kind) {
        case ScalingKind::exponential:
            return log2_n / n;
        case ScalingKind::super_exponential:
            if (n < 2)
                throw std::invalid_argument("rate_under_scaling: super-exponential needs n >= 2");
            return log2_n / (n * std::log2(static_cast<double>(n)));
        case ScalingKind::doubly_exponential:
            if (!(log2_n > 1.0))
                throw std::invalid_argument("rate_under_scaling: doubly-exponential needs log2_n > 1");
            return std::log2(log2_n) / n;
    }
    throw std::invalid_argument("rate_under_scaling: unknown kind");
}

double phi3_rate_from_log2_L(double log2_L, double lambda, int M, int n) {
    if (n < 1) throw std::invalid_argument("phi3_rate_from_log2_L: n must be positive");
    const double exponent = lambda * std::log2(static_cast<double>(M)) - 1.0;
    if (!(exponent > 0.0))
        throw std::invalid_argument("phi3_rate_from_log2_L: lambda*log2(M) must exceed 1");
    return (log2_L + std::log2(exponent)) / n;
}

double binomial_tail_gt(std::int64_t n, double p, double threshold) {
    if (n < 1) throw std::invalid_argument("binomial_tail_gt: n must be positive");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("binomial_tail_gt: p outside (0,1)");
    const std::int64_t first = static_cast<std::int64_t>(std::floor(threshold)) + 1;
    if (first > n) return 0.0;
    if (first <= 0) return 1.0;
    // Accumulate pmf terms upward from k = first via the term ratio.
    const double lp = std::log(p), lq = std::log1p(-p);
    double log_pmf = std::lgamma(n + 1.0) - std::lgamma(first + 1.0) - std::lgamma(n - first + 1.0) +
                     first * lp + (n - first) * lq;
    double pmf = std::exp(log_pmf);
    double sum = 0.0;
    const double ratio_base = p / (1.0 - p);
    for (std::int64_t k = first; k <= n; ++k) {
        sum += pmf;
        pmf *= ratio_base * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    return std::min(sum, 1.0);
}

PsiTailResult empirical_psi_tail(std::int64_t L, double lambda, int M, long long pair_trials,
                                 RngStream rng, int workers) {
    if (pair_trials < 1000) throw std::invalid_argument("empirical_psi_tail: need at least 1e3 trials");
    if (L < 1 || M < 2) throw std::invalid_argument("empirical_psi_tail: bad L or M");
    PsiTailResult result;
    result.trials = pair_trials;
    const double mu = 1.0 / M;
    const double cutoff = static_cast<double>(L) * lambda;

    std::vector<long long> exceed_by_worker(static_cast<std::size_t>(std::max(workers, 1)), 0);
    parallel_ranges(pair_trials, workers, [&](int worker, long long begin, long long end) {
        long long exceed = 0;
        for (long long t = begin; t < end; ++t) {
            RngStream tr = rng.derive(0x7531, static_cast<std::uint64_t>(t));
            std::int64_t sum = 0;
            for (std::int64_t l = 0; l < L; ++l) sum += tr.next_unit() < mu;
            exceed += static_cast<double>(sum) > cutoff;
        }
        exceed_by_worker[worker] = exceed;
    });
    result.exceed = std::accumulate(exceed_by_worker.begin(), exceed_by_worker.end(), 0LL);
    result.frequency = static_cast<double>(result.exceed) / static_cast<double>(pair_trials);
    result.chernoff_bound =
        lambda >= mu ? std::exp2(chernoff_log2_bound(L, lambda, mu)) : 1.0;
    result.corollary_bound =
        lambda >= mu ? std::exp2(corollary_log2_bound(L, lambda, M).log2_bound) : 1.0;
    return result;
}

} // namespace idsim
