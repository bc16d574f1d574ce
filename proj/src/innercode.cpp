#include "idsim/innercode.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "idsim/csv.hpp"
#include "idsim/gaussmath.hpp"
#include "idsim/parallel.hpp"

namespace idsim {

double worst_case_power_ratio(std::span<const int> M) {
    double ratio = 1.0;
    for (int m : M) ratio = std::max(ratio, 3.0 * (m - 1.0) / (m + 1.0));
    return ratio;
}

std::vector<double> pam_levels(int m, double p_use) {
    if (m < 2) throw std::invalid_argument("pam_levels: alphabet size must be at least 2");
    if (!(p_use > 0.0)) throw std::invalid_argument("pam_levels: power must be positive");
    // Mean power of {±a, ±3a, ...} is a^2 (m^2 - 1) / 3.
    const double a = std::sqrt(3.0 * p_use / (static_cast<double>(m) * m - 1.0));
    std::vector<double> levels(m);
    for (int j = 0; j < m; ++j) levels[j] = a * (2.0 * (j + 1) - 1.0 - m);
    return levels;
}

InnerCodebook build_codebook(const InnerCodeConfig& config) {
    if (config.K < 1) throw std::invalid_argument("build_codebook: K must be positive");
    if (static_cast<int>(config.M.size()) != config.K ||
        static_cast<int>(config.reps.size()) != config.K)
        throw std::invalid_argument("build_codebook: M/reps must have K entries");
    if (!(config.p_use > 0.0)) throw std::invalid_argument("build_codebook: infeasible power");
    for (int r : config.reps)
        if (r < 1) throw std::invalid_argument("build_codebook: reps must be positive");

    InnerCodebook cb;
    cb.cfg = config;
    int cursor = 0;
    for (int k = 0; k < config.K; ++k) {
        cb.slots.push_back({cursor, cursor + config.reps[k]});
        cursor += config.reps[k];
        cb.levels.push_back(pam_levels(config.M[k], config.p_use));
    }
    cb.n_inner = cursor;
    return cb;
}

std::vector<double> encode_inner(int w, int sender, const InnerCodebook& codebook) {
    if (sender < 1 || sender > codebook.cfg.K)
        throw std::invalid_argument("encode_inner: sender out of range");
    const int k = sender - 1;
    if (w < 1 || w > codebook.cfg.M[k]) throw std::invalid_argument("encode_inner: message out of range");
    std::vector<double> cw(codebook.n_inner, 0.0);
    const double level = codebook.levels[k][w - 1];
    for (int t = codebook.slots[k].begin; t < codebook.slots[k].end; ++t) cw[t] = level;
    return cw;
}

namespace {

// Nearest level by linear scan; strict improvement keeps the smaller index on ties.
inline int nearest_level(double x, const std::vector<double>& levels) {
    int best = 0;
    double best_d = std::abs(x - levels[0]);
    for (int j = 1; j < static_cast<int>(levels.size()); ++j) {
        const double d = std::abs(x - levels[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best + 1;
}

} // namespace

DecodedTuple decode_inner(std::span<const double> y, const InnerCodebook& codebook,
                          double mean_offset) {
    if (static_cast<int>(y.size()) != codebook.n_inner)
        throw std::invalid_argument("decode_inner: length mismatch");
    DecodedTuple out;
    out.w_hat.resize(codebook.cfg.K);
    for (int k = 0; k < codebook.cfg.K; ++k) {
        const auto [begin, end] = codebook.slots[k];
        double acc = 0.0;
        for (int t = begin; t < end; ++t) acc += y[t];
        const double mean = acc / static_cast<double>(end - begin) - mean_offset;
        out.w_hat[k] = nearest_level(mean, codebook.levels[k]);
    }
    return out;
}

namespace {

struct Disturbance {
    double mean = 0.0;   // sum of state means
    double sigma = 1.0;  // std of (state sum + noise) per use
};

// Only the sum of the state components enters the output, so the per-use
// disturbance collapses to one Gaussian draw.
Disturbance make_disturbance(const ChannelParams& params, const std::optional<StateParams>& state) {
    Disturbance d;
    double var = params.sigma2;
    if (state) {
        for (double m : state->mu) d.mean += m;
        for (int i = 0; i < state->sigma.dim; ++i)
            for (int j = 0; j < state->sigma.dim; ++j) var += state->sigma(i, j);
    }
    d.sigma = std::sqrt(var);
    return d;
}

} // namespace

std::vector<ErrorEstimate> estimate_inner_error(const InnerCodebook& codebook,
                                                const ChannelParams& params, long long trials,
                                                RngStream rng,
                                                const std::optional<StateParams>& state,
                                                int workers) {
    if (trials < 1000) throw std::invalid_argument("estimate_inner_error: need at least 1e3 trials");
    const Disturbance dist = make_disturbance(params, state);
    const int K = codebook.cfg.K;
    std::vector<ErrorEstimate> result(K);

    for (int k = 0; k < K; ++k) {
        const int m = codebook.cfg.M[k];
        const int reps = codebook.cfg.reps[k];
        const auto& levels = codebook.levels[k];
        std::vector<long long> errs_by_worker(static_cast<std::size_t>(std::max(workers, 1)), 0);
        parallel_ranges(trials, workers, [&](int worker, long long begin, long long end) {
            long long errs = 0;
            for (long long t = begin; t < end; ++t) {
                RngStream tr = rng.derive(static_cast<std::uint64_t>(k + 1),
                                          static_cast<std::uint64_t>(t));
                const int w = 1 + static_cast<int>(tr.next_unit() * m);
                double acc = 0.0;
                for (int r = 0; r < reps; ++r)
                    acc += dist.mean + dist.sigma * sample_std_normal(tr);
                const double mean = levels[w - 1] + acc / reps - dist.mean;
                errs += nearest_level(mean, levels) != w;
            }
            errs_by_worker[worker] = errs;
        });
        const long long errs = std::accumulate(errs_by_worker.begin(), errs_by_worker.end(), 0LL);
        result[k] = wilson_estimate(errs, trials);
    }
    return result;
}

namespace {

double derived_p_use(double p_total, int n_inner, std::span<const int> M) {
    // m = n_inner + 1 uses share the budget; the silent first use frees a
    // little per-use power for the rest. Derated so the worst message of the
    // largest constellation still fits the average power constraint.
    return (static_cast<double>(n_inner) + 1.0) * p_total /
           (static_cast<double>(n_inner) * worst_case_power_ratio(M));
}

} // namespace

ErrorEstimate calibration_probe(const CalibrationRequest& request, int sender, int reps,
                                double p_use, RngStream rng, int workers) {
    InnerCodeConfig cfg;
    cfg.K = 1;
    cfg.M = {request.M[sender - 1]};
    cfg.reps = {reps};
    cfg.p_use = p_use;
    cfg.sigma2_eff = request.channel.sigma2;
    const InnerCodebook cb = build_codebook(cfg);
    return estimate_inner_error(cb, request.channel, request.trials,
                                rng.derive(static_cast<std::uint64_t>(sender),
                                           static_cast<std::uint64_t>(reps)),
                                request.state, workers)[0];
}

CalibrationResult calibrate(const CalibrationRequest& request, RngStream rng, int workers) {
    const int K = static_cast<int>(request.M.size());
    if (K < 1 || static_cast<int>(request.epsilon_target.size()) != K)
        throw std::invalid_argument("calibrate: M and epsilon_target must agree");
    for (double e : request.epsilon_target)
        if (!(e > 0.0 && e < 0.5))
            throw std::invalid_argument("calibrate: epsilon targets must lie in (0, 0.5)");
    if (request.fixed_p_use.has_value() == request.p_total.has_value())
        throw std::invalid_argument("calibrate: set exactly one of fixed_p_use / p_total");

    std::vector<int> reps(K, 1);
    bool feasible = true;

    auto p_use_for = [&](const std::vector<int>& r) {
        if (request.fixed_p_use) return *request.fixed_p_use;
        return derived_p_use(*request.p_total, std::accumulate(r.begin(), r.end(), 0), request.M);
    };

    // Growing any reps_k lowers the derived per-use power, which only pushes
    // repetition counts up, so this fixed-point loop terminates.
    for (int pass = 0; pass < 64; ++pass) {
        const double p_use = p_use_for(reps);
        std::vector<int> next(K);
        for (int k = 1; k <= K; ++k) {
            auto ok = [&](int r) {
                const ErrorEstimate e = calibration_probe(request, k, r, p_use, rng, workers);
                return wilson_upper(e) <= request.epsilon_target[k - 1];
            };
            int lo = 0, hi = std::max(reps[k - 1], 1);
            while (!ok(hi)) {
                lo = hi;
                if (hi >= request.max_reps) break;
                hi = std::min(request.max_reps, hi * 2);
            }
            if (lo >= request.max_reps) {
                feasible = false;
                next[k - 1] = request.max_reps;
                continue;
            }
            while (hi - lo > 1) {
                const int mid = lo + (hi - lo) / 2;
                (ok(mid) ? hi : lo) = mid;
            }
            next[k - 1] = hi;
        }
        if (next == reps) break;
        reps = next;
        if (!feasible) break;
    }

    CalibrationResult result;
    result.config.K = K;
    result.config.M = request.M;
    result.config.reps = reps;
    result.config.p_use = p_use_for(reps);
    double var_eff = request.channel.sigma2;
    if (request.state)
        for (int i = 0; i < request.state->sigma.dim; ++i)
            for (int j = 0; j < request.state->sigma.dim; ++j) var_eff += request.state->sigma(i, j);
    result.config.sigma2_eff = var_eff;
    result.codebook = build_codebook(result.config);
    result.error.resize(K);
    result.epsilon_upper.resize(K);
    bool all_ok = feasible;
    for (int k = 1; k <= K; ++k) {
        result.error[k - 1] =
            calibration_probe(request, k, reps[k - 1], result.config.p_use, rng, workers);
        result.epsilon_upper[k - 1] = wilson_upper(result.error[k - 1]);
        all_ok = all_ok && result.epsilon_upper[k - 1] <= request.epsilon_target[k - 1];
    }
    result.success = all_ok;
    return result;
}

void write_codebook_csv(std::ostream& os, const InnerCodebook& codebook) {
    os << "sender,slot_begin,slot_end,level_index,amplitude\n";
    for (int k = 0; k < codebook.cfg.K; ++k)
        for (int j = 0; j < static_cast<int>(codebook.levels[k].size()); ++j)
            os << (k + 1) << ',' << codebook.slots[k].begin << ',' << codebook.slots[k].end << ','
               << (j + 1) << ',' << csv_num(codebook.levels[k][j]) << "\n";
}

} // namespace idsim
