#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "idsim/channel.hpp"

namespace idsim {

struct QuantizerConfig {
    std::int64_t L = 2;     // bin count
    double mu_y = 0.0;      // mean of the feedback sample being quantized
    double sigma_y = 1.0;   // its standard deviation
};

// Mean and standard deviation of the first channel output when every sender
// transmits 0: pure noise, or state-plus-noise in the state-dependent case.
std::pair<double, double> derive_output_stats(const ChannelParams& params,
                                              const std::optional<StateParams>& state);

// L+1 strictly increasing endpoints mu_y + sigma_y * Phi^{-1}(l/L), with
// boundary_0 = -inf and boundary_L = +inf.
std::vector<double> bin_boundaries(const QuantizerConfig& config);

// Maps a Gaussian sample to a symbol in {1..L} that is exactly uniform when
// the input matches (mu_y, sigma_y). Bin l covers (b_{l-1}, b_l]; a sample on
// a boundary goes to the lower bin. Boundaries are precomputed once; lookups
// are a binary search.
class Quantizer {
  public:
    explicit Quantizer(QuantizerConfig config);

    std::int64_t operator()(double y) const;

    const QuantizerConfig& config() const { return config_; }
    std::span<const double> boundaries() const { return boundaries_; }

  private:
    QuantizerConfig config_;
    std::vector<double> boundaries_;
};

// CSV with columns l,boundary for audit.
void write_boundaries_csv(std::ostream& os, const Quantizer& q);

} // namespace idsim
