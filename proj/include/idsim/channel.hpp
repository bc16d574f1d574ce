#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idsim/gaussmath.hpp"
#include "idsim/rng.hpp"

namespace idsim {

struct ChannelParams {
    int K = 1;            // number of senders
    double sigma2 = 1.0;  // noise variance
};

struct StateParams {
    std::vector<double> mu;  // per-sender state means, length K
    CovMatrix sigma;         // state covariance, dim K
};

struct PowerConstraint {
    double p_total = 1.0;                // average power budget per sender
    std::optional<double> p_peak = {};   // optional peak amplitude bound
};

// Record of one feedback session: per-sender inputs, optional states, outputs.
// x and s are K x m row-major (sender-major), y has length m.
struct Transcript {
    int senders = 0;
    int length = 0;
    bool has_state = false;
    std::vector<double> x;
    std::vector<double> s;
    std::vector<double> y;

    double input(int sender, int t) const { return x[static_cast<std::size_t>(sender) * length + t]; }
    double state(int sender, int t) const { return s[static_cast<std::size_t>(sender) * length + t]; }
};

// Strictly causal encoder callback: symbol for time t (1-based) given the
// feedback prefix y_1..y_{t-1}.
using Encoder = std::function<double(int t, std::span<const double> feedback)>;

class SessionAbort : public std::runtime_error {
  public:
    SessionAbort(int sender, int t)
        : std::runtime_error("session abort: sender " + std::to_string(sender) +
                             " emitted a non-finite symbol at t=" + std::to_string(t)),
          sender_(sender), time_(t) {}
    int sender() const { return sender_; }
    int time() const { return time_; }

  private:
    int sender_;
    int time_;
};

// Sum of all inputs plus the noise realization.
double gmac_step(std::span<const double> inputs, double noise);

// Sum of inputs, states and noise.
double sd_gmac_step(std::span<const double> inputs, std::span<const double> state, double noise);

// Drives m channel uses. At each t every encoder sees the identical feedback
// prefix y_1..y_{t-1}; states (when present) are drawn i.i.d. per use before
// the noise draw. Reproducible per rng.
Transcript run_feedback_session(std::span<const Encoder> encoders, int m, const ChannelParams& params,
                                const std::optional<StateParams>& state, RngStream& rng);

struct PowerReport {
    bool pass = true;
    bool average_ok = true;
    bool peak_ok = true;
    double sum_sq = 0.0;
    double peak_amplitude = 0.0;
    int violating_index = -1;  // 0-based position of the first peak violation
};

// Average constraint sum_t x_t^2 <= m * p_total carries 1e-9 absolute slack so
// an exactly budgeted codeword never fails on rounding; the peak check is exact.
PowerReport check_power(std::span<const double> codeword, const PowerConstraint& constraint);

// CSV with columns t,y,x_1..x_K[,s_1..s_K].
void write_transcript_csv(std::ostream& os, const Transcript& tr);

} // namespace idsim
