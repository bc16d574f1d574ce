#include "idsim/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace idsim {

namespace {

std::pair<double, double> wilson_bounds(long long successes, long long trials, double z) {
    if (trials <= 0) throw std::invalid_argument("wilson: trials must be positive");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double rad = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // Rounding at p in {0,1} can land the interval just inside the point
    // estimate; the interval must always contain it.
    return {std::min(std::max(0.0, center - rad), p), std::max(std::min(1.0, center + rad), p)};
}

} // namespace

ErrorEstimate wilson_estimate(long long successes, long long trials, double z) {
    ErrorEstimate e;
    e.trials = trials;
    e.p_hat = static_cast<double>(successes) / static_cast<double>(trials);
    auto [lo, hi] = wilson_bounds(successes, trials, z);
    e.ci_low = lo;
    e.ci_high = hi;
    return e;
}

double wilson_upper(long long successes, long long trials, double z) {
    return wilson_bounds(successes, trials, z).second;
}

double wilson_upper(const ErrorEstimate& e, double z) {
    const long long successes = std::llround(e.p_hat * static_cast<double>(e.trials));
    return wilson_bounds(successes, e.trials, z).second;
}

} // namespace idsim
