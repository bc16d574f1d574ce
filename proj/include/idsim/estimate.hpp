#pragma once

#include <cstdint>

namespace idsim {

// z values for the intervals used throughout.
constexpr double kZTwoSided95 = 1.959963984540054;
constexpr double kZOneSided95 = 1.6448536269514722;

// Monte Carlo probability estimate with a Wilson 95% two-sided interval.
struct ErrorEstimate {
    double p_hat = 0.0;
    long long trials = 0;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

ErrorEstimate wilson_estimate(long long successes, long long trials, double z = kZTwoSided95);

// One-sided upper confidence limit (95% by default).
double wilson_upper(long long successes, long long trials, double z = kZOneSided95);
double wilson_upper(const ErrorEstimate& e, double z = kZOneSided95);

} // namespace idsim
