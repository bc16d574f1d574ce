#include "idsim/idf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "idsim/csv.hpp"
#include "idsim/gaussmath.hpp"
#include "idsim/parallel.hpp"

namespace idsim {

namespace {

// Substream tags for the estimators.
constexpr std::uint64_t kTagType1Ids = 0x1D31;
constexpr std::uint64_t kTagType1Trial = 0x1D32;
constexpr std::uint64_t kTagType2Ids = 0x1D33;
constexpr std::uint64_t kTagType2Trial = 0x1D34;

} // namespace

IdfCode assemble_idf_code(const IdfAssembly& assembly, RngStream rng, int workers) {
    if (!(assembly.lambda > 0.0 && assembly.lambda < 0.5))
        throw std::invalid_argument("assemble_idf_code: lambda must lie in (0, 1/2)");
    if (assembly.channel.K != static_cast<int>(assembly.M.size()))
        throw std::invalid_argument("assemble_idf_code: M must have one entry per sender");
    if (assembly.L < 2) throw std::invalid_argument("assemble_idf_code: L must be at least 2");

    CalibrationRequest creq;
    creq.channel = assembly.channel;
    creq.state = assembly.state;
    creq.M = assembly.M;
    creq.epsilon_target.assign(assembly.M.size(), assembly.epsilon_target);
    creq.trials = assembly.calib_trials;
    creq.max_reps = assembly.max_reps;
    creq.p_total = assembly.power.p_total;

    CalibrationResult calib;
    if (assembly.fixed_reps) {
        const int n_inner = std::accumulate(assembly.fixed_reps->begin(), assembly.fixed_reps->end(), 0);
        InnerCodeConfig cfg;
        cfg.K = assembly.channel.K;
        cfg.M = assembly.M;
        cfg.reps = *assembly.fixed_reps;
        cfg.p_use = (n_inner + 1.0) * assembly.power.p_total /
                    (n_inner * worst_case_power_ratio(assembly.M));
        cfg.sigma2_eff = assembly.channel.sigma2;
        if (assembly.state)
            for (int i = 0; i < assembly.state->sigma.dim; ++i)
                for (int j = 0; j < assembly.state->sigma.dim; ++j)
                    cfg.sigma2_eff += assembly.state->sigma(i, j);
        calib.config = cfg;
        calib.codebook = build_codebook(cfg);
        calib.error = estimate_inner_error(calib.codebook, assembly.channel, assembly.calib_trials,
                                           rng.derive(0xF17E), assembly.state, workers);
        calib.epsilon_upper.clear();
        for (const auto& e : calib.error) calib.epsilon_upper.push_back(wilson_upper(e));
        calib.success = true;
        for (std::size_t k = 0; k < calib.epsilon_upper.size(); ++k)
            calib.success = calib.success && calib.epsilon_upper[k] <= assembly.epsilon_target;
    } else {
        calib = calibrate(creq, rng, workers);
        // On failure the code still assembles with the best configuration
        // reached, flagged uncalibrated; callers decide how to proceed.
    }

    const auto [mu_y, sigma_y] = derive_output_stats(assembly.channel, assembly.state);

    IdfCode code{
        .channel = assembly.channel,
        .state = assembly.state,
        .power = assembly.power,
        .family = FamilyConfig{assembly.L, assembly.M},
        .lambda = assembly.lambda,
        .master_seed = assembly.master_seed,
        .codebook = calib.codebook,
        .quantizer = Quantizer({assembly.L, mu_y, sigma_y}),
        .mean_offset = 0.0,
        .calibrated = calib.success,
        .inner_error = calib.error,
        .epsilon_upper = calib.epsilon_upper,
        .alphabet_feasible = {},
        .epsilon_feasible = {},
    };
    if (assembly.state)
        for (double m : assembly.state->mu) code.mean_offset += m;
    for (std::size_t k = 0; k < assembly.M.size(); ++k) {
        code.alphabet_feasible.push_back(1.0 / assembly.M[k] <= assembly.lambda / 2.0);
        code.epsilon_feasible.push_back(code.epsilon_upper[k] <= assembly.lambda / 2.0);
    }

    // Peak constraint, when present, must admit every constellation point.
    if (assembly.power.p_peak) {
        for (const auto& levels : code.codebook.levels)
            for (double v : levels)
                if (std::abs(v) > *assembly.power.p_peak)
                    throw std::invalid_argument(
                        "assemble_idf_code: constellation exceeds the peak power bound");
    }
    return code;
}

std::vector<double> idf_encode(int sender, Identity128 identity, double y1, const IdfCode& code) {
    const std::int64_t u = code.quantizer(y1);
    const FamilyKey key{code.master_seed, sender, identity};
    const int w = eval_family(key, u, code.family);
    const std::vector<double> inner = encode_inner(w, sender, code.codebook);
    std::vector<double> cw(inner.size() + 1, 0.0);
    std::copy(inner.begin(), inner.end(), cw.begin() + 1);
    if (!check_power(cw, code.power).pass)
        throw std::logic_error("idf_encode: assembled code emitted a power-violating codeword");
    return cw;
}

std::vector<bool> idf_decode(std::span<const double> y, std::span<const Identity128> claimed,
                             const IdfCode& code) {
    if (static_cast<int>(y.size()) != code.m())
        throw std::invalid_argument("idf_decode: length mismatch");
    if (static_cast<int>(claimed.size()) != code.channel.K)
        throw std::invalid_argument("idf_decode: need one claim per sender");
    const std::int64_t u = code.quantizer(y[0]);
    const DecodedTuple decoded = decode_inner(y.subspan(1), code.codebook, code.mean_offset);
    std::vector<bool> accept(claimed.size());
    for (std::size_t k = 0; k < claimed.size(); ++k) {
        const FamilyKey key{code.master_seed, static_cast<int>(k + 1), claimed[k]};
        accept[k] = eval_family(key, u, code.family) == decoded.w_hat[k];
    }
    return accept;
}

std::vector<Encoder> idf_make_encoders(const IdfCode& code, std::vector<Identity128> ids) {
    if (static_cast<int>(ids.size()) != code.channel.K)
        throw std::invalid_argument("idf_make_encoders: need one identity per sender");
    std::vector<Encoder> encoders;
    for (int k = 1; k <= code.channel.K; ++k) {
        auto cached = std::make_shared<std::vector<double>>();
        const Identity128 id = ids[k - 1];
        encoders.push_back([&code, k, id, cached](int t, std::span<const double> fb) -> double {
            if (t == 1) return 0.0;
            if (cached->empty()) {
                const std::int64_t u = code.quantizer(fb[0]);
                const FamilyKey key{code.master_seed, k, id};
                *cached = encode_inner(eval_family(key, u, code.family), k, code.codebook);
            }
            return (*cached)[t - 2];
        });
    }
    return encoders;
}

namespace {

// Lean session runner sharing run_feedback_session's draw order: per use,
// state components first (when present), then the noise.
class SessionEngine {
  public:
    explicit SessionEngine(const IdfCode& code)
        : code_(&code), sigma_(std::sqrt(code.channel.sigma2)), K_(code.channel.K) {
        if (code.state) chol_ = cholesky_lower(code.state->sigma);
        svec_.resize(K_);
        z_.resize(K_);
        slot_owner_.assign(code.codebook.n_inner, 0);
        for (int k = 0; k < K_; ++k)
            for (int t = code.codebook.slots[k].begin; t < code.codebook.slots[k].end; ++t)
                slot_owner_[t] = k;
        slot_sum_.resize(K_);
    }

    void run(std::span<const Identity128> ids, RngStream& rng, SessionOutcome& out) {
        const IdfCode& code = *code_;
        const int n_inner = code.codebook.n_inner;
        out.w.resize(K_);
        out.w_hat.resize(K_);

        const double y1 = draw_output(rng, 0.0);
        out.u = code.quantizer(y1);
        for (int k = 0; k < K_; ++k) {
            const FamilyKey key{code.master_seed, k + 1, ids[k]};
            out.w[k] = eval_family(key, out.u, code.family);
        }

        std::fill(slot_sum_.begin(), slot_sum_.end(), 0.0);
        for (int t = 0; t < n_inner; ++t) {
            const int owner = slot_owner_[t];
            const double x = code.codebook.levels[owner][out.w[owner] - 1];
            slot_sum_[owner] += draw_output(rng, x);
        }
        for (int k = 0; k < K_; ++k) {
            const auto [begin, end] = code.codebook.slots[k];
            const double mean = slot_sum_[k] / (end - begin) - code.mean_offset;
            out.w_hat[k] = nearest(mean, code.codebook.levels[k]);
        }

        out.power_ok = true;
        const double budget = code.m() * code.power.p_total + 1e-9;
        for (int k = 0; k < K_; ++k) {
            const double level = code.codebook.levels[k][out.w[k] - 1];
            const auto [begin, end] = code.codebook.slots[k];
            const bool avg_ok = level * level * (end - begin) <= budget;
            const bool peak_ok = !code.power.p_peak || std::abs(level) <= *code.power.p_peak;
            out.power_ok = out.power_ok && avg_ok && peak_ok;
        }
    }

  private:
    double draw_output(RngStream& rng, double x_sum) {
        double y = x_sum;
        if (code_->state) {
            sample_mvn_chol(code_->state->mu, chol_, rng, svec_, z_);
            for (double s : svec_) y += s;
        }
        return y + sigma_ * sample_std_normal(rng);
    }

    static int nearest(double x, const std::vector<double>& levels) {
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

    const IdfCode* code_;
    double sigma_;
    int K_;
    std::vector<double> chol_, svec_, z_, slot_sum_;
    std::vector<int> slot_owner_;
};

} // namespace

void run_one_session(const IdfCode& code, std::span<const Identity128> ids, RngStream& rng,
                     SessionOutcome& out) {
    SessionEngine engine(code);
    engine.run(ids, rng, out);
}

Type1Report estimate_type1(const IdfCode& code, int identity_samples, long long trials_each,
                           RngStream rng, int workers) {
    if (identity_samples < 1 || trials_each < 1)
        throw std::invalid_argument("estimate_type1: sample counts must be positive");
    const int K = code.channel.K;

    Type1Report report;
    report.identities.resize(identity_samples);
    for (int a = 0; a < identity_samples; ++a) {
        RngStream ids_rng = rng.derive(kTagType1Ids, static_cast<std::uint64_t>(a));
        report.identities[a].ids.resize(K);
        for (int k = 0; k < K; ++k) report.identities[a].ids[k] = sample_identity(ids_rng);
    }

    struct Counts {
        long long rejects = 0;
        std::vector<long long> per_sender;
        long long power_violations = 0;
    };
    std::vector<Counts> by_identity(identity_samples);
    for (auto& c : by_identity) c.per_sender.assign(K, 0);

    parallel_ranges(identity_samples, workers, [&](int, long long begin, long long end) {
        SessionEngine engine(code);
        SessionOutcome out;
        for (long long a = begin; a < end; ++a) {
            Counts& c = by_identity[a];
            const auto& ids = report.identities[a].ids;
            for (long long t = 0; t < trials_each; ++t) {
                RngStream trial = rng.derive(kTagType1Trial,
                                             hash_fold(static_cast<std::uint64_t>(a),
                                                       static_cast<std::uint64_t>(t)));
                engine.run(ids, trial, out);
                bool any = false;
                for (int k = 0; k < K; ++k) {
                    const bool rejected = out.w_hat[k] != out.w[k];
                    c.per_sender[k] += rejected;
                    any = any || rejected;
                }
                c.rejects += any;
                c.power_violations += !out.power_ok;
            }
        }
    });

    long long total_rejects = 0;
    std::vector<long long> sender_rejects(K, 0);
    double worst = -1.0;
    for (int a = 0; a < identity_samples; ++a) {
        report.identities[a].reject = wilson_estimate(by_identity[a].rejects, trials_each);
        total_rejects += by_identity[a].rejects;
        report.power_violations += by_identity[a].power_violations;
        for (int k = 0; k < K; ++k) sender_rejects[k] += by_identity[a].per_sender[k];
        if (report.identities[a].reject.p_hat > worst) {
            worst = report.identities[a].reject.p_hat;
            report.worst_index = a;
        }
    }
    const long long total = static_cast<long long>(identity_samples) * trials_each;
    report.aggregate = wilson_estimate(total_rejects, total);
    for (int k = 0; k < K; ++k) report.per_sender.push_back(wilson_estimate(sender_rejects[k], total));
    return report;
}

Type2Report estimate_type2(const IdfCode& code, int pair_samples, long long trials_each,
                           RngStream rng, std::optional<int> distinguished_sender, int workers) {
    if (pair_samples < 1 || trials_each < 1)
        throw std::invalid_argument("estimate_type2: sample counts must be positive");
    const int K = code.channel.K;
    if (distinguished_sender && (*distinguished_sender < 1 || *distinguished_sender > K))
        throw std::invalid_argument("estimate_type2: distinguished sender out of range");

    Type2Report report;
    report.lambda = code.lambda;
    report.pairs.resize(pair_samples);

    struct PairSetup {
        std::vector<Identity128> ids;
        int sender = 1;
        Identity128 claim;
    };
    std::vector<PairSetup> setup(pair_samples);
    for (int p = 0; p < pair_samples; ++p) {
        RngStream ids_rng = rng.derive(kTagType2Ids, static_cast<std::uint64_t>(p));
        PairSetup& s = setup[p];
        s.ids.resize(K);
        for (int k = 0; k < K; ++k) s.ids[k] = sample_identity(ids_rng);
        s.sender = distinguished_sender.value_or(1 + p % K);
        do {
            s.claim = sample_identity(ids_rng);
        } while (s.claim == s.ids[s.sender - 1]);
    }

    std::vector<long long> accepts(pair_samples, 0);
    std::vector<long long> violations(pair_samples, 0);
    parallel_ranges(pair_samples, workers, [&](int, long long begin, long long end) {
        SessionEngine engine(code);
        SessionOutcome out;
        for (long long p = begin; p < end; ++p) {
            const PairSetup& s = setup[p];
            const FamilyKey claim_key{code.master_seed, s.sender, s.claim};
            long long acc = 0, viol = 0;
            for (long long t = 0; t < trials_each; ++t) {
                RngStream trial = rng.derive(kTagType2Trial,
                                             hash_fold(static_cast<std::uint64_t>(p),
                                                       static_cast<std::uint64_t>(t)));
                engine.run(s.ids, trial, out);
                acc += eval_family(claim_key, out.u, code.family) == out.w_hat[s.sender - 1];
                viol += !out.power_ok;
            }
            accepts[p] = acc;
            violations[p] = viol;
        }
    });

    long long total_accepts = 0;
    for (int p = 0; p < pair_samples; ++p) {
        const PairSetup& s = setup[p];
        PairResult& r = report.pairs[p];
        r.pair_index = p;
        r.sender = s.sender;
        r.true_id = s.ids[s.sender - 1];
        r.claimed_id = s.claim;
        const FamilyKey a{code.master_seed, s.sender, r.true_id};
        const FamilyKey b{code.master_seed, s.sender, r.claimed_id};
        r.collisions = collision_count(a, b, code.family);
        r.ceiling = static_cast<double>(r.collisions) / static_cast<double>(code.family.L) +
                    code.epsilon_upper[s.sender - 1];
        r.accept = wilson_estimate(accepts[p], trials_each);

        total_accepts += accepts[p];
        report.power_violations += violations[p];
        if (r.accept.p_hat > report.max_p_hat) {
            report.max_p_hat = r.accept.p_hat;
            report.max_index = p;
        }
        report.over_lambda_point += r.accept.p_hat > code.lambda;
        report.over_lambda_band += r.accept.ci_low > code.lambda;
        report.over_ceiling_point += r.accept.p_hat > r.ceiling;
        report.over_ceiling_band += r.accept.ci_low > r.ceiling;
    }
    report.pooled = wilson_estimate(total_accepts, static_cast<long long>(pair_samples) * trials_each);
    return report;
}

SimulationReport simulate_idf(const IdfCode& code, int identity_samples, long long type1_trials,
                              int pair_samples, long long type2_trials, RngStream rng, int workers) {
    SimulationReport report;
    report.type1 = estimate_type1(code, identity_samples, type1_trials, rng, workers);
    report.type2 = estimate_type2(code, pair_samples, type2_trials, rng, {}, workers);
    return report;
}

SimulationReport run_sd_pipeline(const IdfCode& code, int identity_samples, long long type1_trials,
                                 int pair_samples, long long type2_trials, RngStream rng,
                                 int workers) {
    if (!code.state) throw std::invalid_argument("run_sd_pipeline: code has no channel state");
    return simulate_idf(code, identity_samples, type1_trials, pair_samples, type2_trials, rng,
                        workers);
}

std::string identity_hex(const Identity128& id) {
    static const char* digits = "0123456789abcdef";
    std::string s(32, '0');
    for (int i = 0; i < 16; ++i) {
        s[15 - i] = digits[(id.hi >> (4 * i)) & 0xF];
        s[31 - i] = digits[(id.lo >> (4 * i)) & 0xF];
    }
    return s;
}

void write_type1_csv(std::ostream& os, const Type1Report& report) {
    os << "identity_index,ids,estimate,ci_low,ci_high\n";
    for (std::size_t a = 0; a < report.identities.size(); ++a) {
        const auto& r = report.identities[a];
        os << a << ',';
        for (std::size_t k = 0; k < r.ids.size(); ++k)
            os << (k ? ";" : "") << identity_hex(r.ids[k]);
        os << ',' << csv_num(r.reject.p_hat) << ',' << csv_num(r.reject.ci_low) << ','
           << csv_num(r.reject.ci_high) << "\n";
    }
}

void write_type2_csv(std::ostream& os, const Type2Report& report) {
    os << "pair_index,sender,true_id,claimed_id,estimate,ci_low,ci_high,collision_count,"
          "predicted_ceiling,over_lambda,ceiling_ok_band\n";
    for (const auto& r : report.pairs) {
        os << r.pair_index << ',' << r.sender << ',' << identity_hex(r.true_id) << ','
           << identity_hex(r.claimed_id) << ',' << csv_num(r.accept.p_hat) << ','
           << csv_num(r.accept.ci_low) << ',' << csv_num(r.accept.ci_high) << ',' << r.collisions
           << ',' << csv_num(r.ceiling) << ',' << (r.accept.p_hat > report.lambda ? 1 : 0) << ','
           << (r.accept.ci_low <= r.ceiling ? 1 : 0) << "\n";
    }
}

} // namespace idsim
