#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "idsim/channel.hpp"
#include "idsim/crgen.hpp"
#include "idsim/estimate.hpp"
#include "idsim/funcfam.hpp"
#include "idsim/innercode.hpp"

namespace idsim {

// Everything needed to assemble an identification-with-feedback code.
struct IdfAssembly {
    ChannelParams channel;
    std::optional<StateParams> state;
    PowerConstraint power;
    std::int64_t L = 256;
    std::vector<int> M;
    double lambda = 0.1;
    std::uint64_t master_seed = 0;
    double epsilon_target = 0.025;
    long long calib_trials = 100000;
    int max_reps = 4096;
    // When set, calibration is skipped and these repetition counts are used.
    std::optional<std::vector<int>> fixed_reps;
};

// Assembled code: quantizer + virtual function families + inner codebook,
// with the calibration evidence and feasibility flags.
struct IdfCode {
    ChannelParams channel;
    std::optional<StateParams> state;
    PowerConstraint power;
    FamilyConfig family;
    double lambda = 0.1;
    std::uint64_t master_seed = 0;

    InnerCodebook codebook;
    Quantizer quantizer;
    double mean_offset = 0.0;  // sum of state means, subtracted by the decoder

    bool calibrated = false;
    std::vector<ErrorEstimate> inner_error;
    std::vector<double> epsilon_upper;     // one-sided 95% limit per sender
    std::vector<bool> alphabet_feasible;   // 1/M_k <= lambda/2
    std::vector<bool> epsilon_feasible;    // epsilon_upper <= lambda/2

    int m() const { return codebook.n_inner + 1; }
};

IdfCode assemble_idf_code(const IdfAssembly& assembly, RngStream rng, int workers = 1);

// Full m-use codeword for one sender given the feedback sample from the
// common-randomness round: a leading 0 followed by the inner codeword for
// F_{sender,identity}(u(y1)). Throws logic_error if the result ever failed
// the power check (unreachable for an assembled code).
std::vector<double> idf_encode(int sender, Identity128 identity, double y1, const IdfCode& code);

// Per-sender decision: claim j_k is accepted iff F_{k,j_k}(u(y_1)) matches
// the inner decoding of y_2..y_m.
std::vector<bool> idf_decode(std::span<const double> y, std::span<const Identity128> claimed,
                             const IdfCode& code);

// Encoder callbacks realizing idf_encode incrementally over the feedback
// link, for driving run_feedback_session.
std::vector<Encoder> idf_make_encoders(const IdfCode& code, std::vector<Identity128> ids);

// One session on the lean path (same draw order as run_feedback_session).
struct SessionOutcome {
    std::int64_t u = 0;
    std::vector<int> w;
    std::vector<int> w_hat;
    bool power_ok = true;
};
void run_one_session(const IdfCode& code, std::span<const Identity128> ids, RngStream& rng,
                     SessionOutcome& out);

struct IdentityResult {
    std::vector<Identity128> ids;
    ErrorEstimate reject;  // probability that some sender's true claim is rejected
};

struct Type1Report {
    std::vector<IdentityResult> identities;
    ErrorEstimate aggregate;                // pooled over identities and trials
    std::vector<ErrorEstimate> per_sender;  // pooled per-sender rejection rates
    int worst_index = 0;                    // identity with the largest estimate
    long long power_violations = 0;
};

// Samples identity tuples from the virtual index space and measures how often
// the true claims are rejected. Trial (a, t) runs on its own substream, so
// results are independent of the worker partition.
Type1Report estimate_type1(const IdfCode& code, int identity_samples, long long trials_each,
                           RngStream rng, int workers = 1);

struct PairResult {
    int pair_index = 0;
    int sender = 1;
    Identity128 true_id;
    Identity128 claimed_id;
    std::int64_t collisions = 0;
    double ceiling = 0.0;  // collisions/L + epsilon_upper of the sender
    ErrorEstimate accept;
};

struct Type2Report {
    std::vector<PairResult> pairs;
    double lambda = 0.0;
    ErrorEstimate pooled;  // all pairs and trials pooled
    double max_p_hat = 0.0;
    int max_index = 0;
    long long over_lambda_point = 0;    // pairs with p_hat > lambda
    long long over_lambda_band = 0;     // pairs whose Wilson lower bound clears lambda
    long long over_ceiling_point = 0;
    long long over_ceiling_band = 0;
    long long power_violations = 0;
};

// For each sampled pair (identity tuple, replacement claim for one sender),
// measures the false-acceptance probability and compares it to the predicted
// ceiling collisions/L + epsilon_upper. Without a distinguished sender the
// pairs rotate over senders.
Type2Report estimate_type2(const IdfCode& code, int pair_samples, long long trials_each,
                           RngStream rng, std::optional<int> distinguished_sender = {},
                           int workers = 1);

struct SimulationReport {
    Type1Report type1;
    Type2Report type2;
};

SimulationReport simulate_idf(const IdfCode& code, int identity_samples, long long type1_trials,
                              int pair_samples, long long type2_trials, RngStream rng,
                              int workers = 1);

// State-dependent pipeline: identical flow with the state-aware quantizer and
// mean-compensating decoder. Requires an assembled code with a state.
SimulationReport run_sd_pipeline(const IdfCode& code, int identity_samples, long long type1_trials,
                                 int pair_samples, long long type2_trials, RngStream rng,
                                 int workers = 1);

std::string identity_hex(const Identity128& id);

void write_type1_csv(std::ostream& os, const Type1Report& report);
void write_type2_csv(std::ostream& os, const Type2Report& report);

} // namespace idsim
