#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "idsim/channel.hpp"
#include "idsim/estimate.hpp"
#include "idsim/rng.hpp"

namespace idsim {

// TDMA transmission code: sender k owns a slot of reps_k uses and repeats one
// M_k-ary amplitude symbol there, silent elsewhere. p_use is the per-use
// transmit power inside the slot; sigma2_eff is the noise variance the
// decoder effectively faces (channel noise plus state variance when states
// are treated as noise).
struct InnerCodeConfig {
    int K = 1;
    std::vector<int> M;
    std::vector<int> reps;
    double p_use = 1.0;
    double sigma2_eff = 1.0;
};

struct SlotRange {
    int begin = 0;  // 0-based, half-open
    int end = 0;
};

struct InnerCodebook {
    InnerCodeConfig cfg;
    int n_inner = 0;
    std::vector<SlotRange> slots;            // per sender
    std::vector<std::vector<double>> levels; // per sender, M_k uniform amplitudes
};

struct DecodedTuple {
    std::vector<int> w_hat;  // per sender, 1-based message index
};

// Uniform symmetric M_k-point amplitude grid scaled to mean power p_use.
std::vector<double> pam_levels(int m, double p_use);

// Worst-case to mean power ratio across the senders' PAM grids,
// max_k 3(M_k-1)/(M_k+1). Scaling the constellation mean power to the raw
// per-use allowance would let edge messages overrun the average power
// constraint, so derived power rules divide by this factor.
double worst_case_power_ratio(std::span<const int> M);

InnerCodebook build_codebook(const InnerCodeConfig& config);

// Codeword of length n_inner: zero outside the sender's slot, the w-th
// constellation level repeated inside it.
std::vector<double> encode_inner(int w, int sender, const InnerCodebook& codebook);

// Per slot, averages the repetitions (after subtracting mean_offset per use)
// and picks the nearest level; ties go to the smaller index.
DecodedTuple decode_inner(std::span<const double> y, const InnerCodebook& codebook,
                          double mean_offset = 0.0);

// Per-sender Monte Carlo symbol error rates with Wilson 95% intervals. With a
// state present, state vectors are drawn i.i.d. per use and the decoder
// compensates the deterministic mean, treating the rest as noise. Slots are
// disjoint, so each sender is simulated on its own slot; trial t of sender k
// uses substream rng.derive(k, t).
std::vector<ErrorEstimate> estimate_inner_error(const InnerCodebook& codebook,
                                                const ChannelParams& params, long long trials,
                                                RngStream rng,
                                                const std::optional<StateParams>& state = {},
                                                int workers = 1);

struct CalibrationRequest {
    ChannelParams channel;
    std::optional<StateParams> state;
    std::vector<int> M;
    std::vector<double> epsilon_target;   // per sender, each in (0, 0.5)
    long long trials = 100000;
    int max_reps = 4096;
    // Exactly one of the two power rules applies: a fixed per-use power, or
    // p_use = m * p_total / n_inner derived per candidate with m = n_inner + 1
    // (the leading common-randomness 0 relaxes the per-use budget).
    std::optional<double> fixed_p_use;
    std::optional<double> p_total;
};

struct CalibrationResult {
    bool success = false;
    InnerCodeConfig config;
    InnerCodebook codebook;
    std::vector<ErrorEstimate> error;        // at the returned reps
    std::vector<double> epsilon_upper;       // one-sided 95% limits per sender
};

// Smallest repetition counts whose upper 95% confidence limits meet the
// per-sender targets. The probe for (sender, reps) always runs on substream
// rng.derive(sender, reps), so a binary search lands on exactly the reps an
// exhaustive sweep with the same trials would pick. On failure the result
// carries the best configuration reached at max_reps.
CalibrationResult calibrate(const CalibrationRequest& request, RngStream rng, int workers = 1);

// The estimate calibrate() consults for one sender at a given reps count;
// exposed so a sweep over reps can reproduce calibration decisions.
ErrorEstimate calibration_probe(const CalibrationRequest& request, int sender, int reps,
                                double p_use, RngStream rng, int workers = 1);

// CSV with columns sender,slot_begin,slot_end,level_index,amplitude.
void write_codebook_csv(std::ostream& os, const InnerCodebook& codebook);

} // namespace idsim
