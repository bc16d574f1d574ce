#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "idsim/idf.hpp"

using namespace idsim;

namespace {

IdfAssembly quiet_assembly(std::int64_t L, std::vector<int> M, std::vector<int> reps) {
    IdfAssembly a;
    a.channel = {static_cast<int>(M.size()), 1e-18};
    a.power = {10.0, {}};
    a.L = L;
    a.M = std::move(M);
    a.lambda = 0.2;
    a.master_seed = 99;
    a.calib_trials = 1000;
    a.fixed_reps = std::move(reps);
    return a;
}

IdfAssembly noisy_assembly() {
    IdfAssembly a;
    a.channel = {2, 1.0};
    a.power = {10.0, {}};
    a.L = 64;
    a.M = {4, 4};
    a.lambda = 0.2;
    a.master_seed = 7;
    a.calib_trials = 20000;
    a.epsilon_target = 0.05;
    return a;
}

// Smallest identity whose family value at u matches (differs from) a target.
Identity128 find_identity(const IdfCode& code, int sender, std::int64_t u, int want,
                          Identity128 avoid) {
    for (std::uint64_t lo = 0;; ++lo) {
        const Identity128 id{0xABCD, lo};
        if (id == avoid) continue;
        if (eval_family({code.master_seed, sender, id}, u, code.family) == want) return id;
    }
}

} // namespace

TEST_CASE("assembled code derates the per-use power so every codeword complies") {
    const IdfCode code = assemble_idf_code(quiet_assembly(16, {4, 4}, {2, 2}), RngStream(1, 0));
    CHECK(code.m() == 5);
    // Worst-case codeword: edge level repeated through the slot, plus the
    // leading zero, must sit inside the m-use budget.
    const double edge = code.codebook.levels[0].back();
    CHECK(edge * edge * 2.0 <= code.m() * code.power.p_total + 1e-9);
    CHECK(worst_case_power_ratio(std::vector<int>{4, 4}) == doctest::Approx(27.0 / 15.0));
    CHECK(code.codebook.cfg.p_use ==
          doctest::Approx(5.0 * 10.0 / 4.0 / (27.0 / 15.0)).epsilon(1e-12));

    for (int k = 1; k <= 2; ++k)
        for (std::uint64_t lo = 0; lo < 8; ++lo) {
            const auto cw = idf_encode(k, {0, lo}, 0.3, code);
            CHECK(cw[0] == 0.0);
            CHECK(check_power(cw, code.power).pass);
        }
}

TEST_CASE("idf_encode is deterministic and collision pairs produce equal codewords") {
    const IdfCode code = assemble_idf_code(quiet_assembly(16, {4}, {1}), RngStream(1, 0));
    const double y1 = -0.7;
    const std::int64_t u = code.quantizer(y1);

    const Identity128 a{1, 2};
    const int wa = eval_family({code.master_seed, 1, a}, u, code.family);
    CHECK(idf_encode(1, a, y1, code) == idf_encode(1, a, y1, code));

    const Identity128 b = find_identity(code, 1, u, wa, a);
    CHECK(idf_encode(1, b, y1, code) == idf_encode(1, a, y1, code));

    const Identity128 c = find_identity(code, 1, u, wa == 1 ? 2 : 1, a);
    CHECK(idf_encode(1, c, y1, code) != idf_encode(1, a, y1, code));
}

TEST_CASE("idf_decode: noiseless acceptance, rejection, collision mechanism") {
    const IdfCode code = assemble_idf_code(quiet_assembly(16, {4, 4}, {1, 1}), RngStream(1, 0));
    const std::vector<Identity128> ids = {{5, 0}, {6, 0}};
    RngStream rng(3, 3);
    const auto encoders = idf_make_encoders(code, ids);
    const Transcript tr = run_feedback_session(encoders, code.m(), code.channel, code.state, rng);
    const std::int64_t u = code.quantizer(tr.y[0]);

    CHECK(idf_decode(tr.y, ids, code) == std::vector<bool>{true, true});

    const int w1 = eval_family({code.master_seed, 1, ids[0]}, u, code.family);
    const Identity128 misses = find_identity(code, 1, u, w1 == 1 ? 2 : 1, ids[0]);
    const Identity128 collides = find_identity(code, 1, u, w1, ids[0]);
    CHECK(idf_decode(tr.y, std::vector<Identity128>{misses, ids[1]}, code) ==
          std::vector<bool>{false, true});
    // A colliding non-transmitted identity is wrongly accepted: the type-II path.
    CHECK(idf_decode(tr.y, std::vector<Identity128>{collides, ids[1]}, code) ==
          std::vector<bool>{true, true});

    CHECK_THROWS_AS(idf_decode(std::vector<double>{0.0}, ids, code), std::invalid_argument);
}

TEST_CASE("lean session runner matches the generic feedback engine") {
    for (bool with_state : {false, true}) {
        IdfAssembly a = quiet_assembly(16, {4, 4}, {2, 3});
        a.channel.sigma2 = 1.0;
        if (with_state) {
            StateParams s;
            s.mu = {1.0, -1.0};
            s.sigma = CovMatrix(2);
            s.sigma(0, 0) = s.sigma(1, 1) = 1.0;
            s.sigma(0, 1) = s.sigma(1, 0) = 0.5;
            a.state = s;
        }
        const IdfCode code = assemble_idf_code(a, RngStream(1, 0));
        const std::vector<Identity128> ids = {{11, 0}, {12, 0}};

        RngStream generic(21, 5);
        const auto encoders = idf_make_encoders(code, ids);
        const Transcript tr =
            run_feedback_session(encoders, code.m(), code.channel, code.state, generic);

        RngStream lean(21, 5);
        SessionOutcome out;
        run_one_session(code, ids, lean, out);

        CHECK(out.u == code.quantizer(tr.y[0]));
        const DecodedTuple dec = decode_inner(std::span(tr.y).subspan(1), code.codebook,
                                              code.mean_offset);
        CHECK(out.w_hat == dec.w_hat);
        for (int k = 0; k < 2; ++k)
            CHECK(out.w[k] == eval_family({code.master_seed, k + 1, ids[k]}, out.u, code.family));
        // Both paths consumed the identical draw sequence.
        CHECK(generic.next_u64() == lean.next_u64());

        // Rejection of the true identity coincides with an inner decoding error.
        const auto accept = idf_decode(tr.y, ids, code);
        for (int k = 0; k < 2; ++k) CHECK(accept[k] == (dec.w_hat[k] == out.w[k]));
    }
}

TEST_CASE("estimate_type1: zero noise is exact, rates track the inner code") {
    const IdfCode quiet = assemble_idf_code(quiet_assembly(16, {4, 4}, {1, 1}), RngStream(1, 0));
    const Type1Report clean = estimate_type1(quiet, 8, 50, RngStream(2, 0));
    CHECK(clean.aggregate.p_hat == 0.0);
    CHECK(clean.power_violations == 0);

    IdfAssembly a = noisy_assembly();
    a.fixed_reps = {{1, 1}};
    const IdfCode code = assemble_idf_code(a, RngStream(4, 0), 2);
    const Type1Report t1 = estimate_type1(code, 16, 2000, RngStream(5, 0), 2);
    // Per-sender rejection rates agree with the calibration estimates.
    for (int k = 0; k < 2; ++k) {
        const double gap = std::abs(t1.per_sender[k].p_hat - code.inner_error[k].p_hat);
        const double band = 3.0 * std::sqrt(code.inner_error[k].p_hat *
                                            (1 - code.inner_error[k].p_hat) *
                                            (1.0 / t1.per_sender[k].trials +
                                             1.0 / code.inner_error[k].trials));
        CHECK(gap <= band);
    }
    CHECK(t1.power_violations == 0);
    CHECK(t1.identities.size() == 16);
    CHECK(t1.aggregate.trials == 16 * 2000);

    // K = 1 reduction runs the same pipeline.
    IdfAssembly single = quiet_assembly(16, {4}, {1});
    const IdfCode code1 = assemble_idf_code(single, RngStream(1, 0));
    CHECK(estimate_type1(code1, 4, 50, RngStream(6, 0)).aggregate.p_hat == 0.0);
}

TEST_CASE("estimate_type2: collisions drive false acceptance") {
    // Noiseless: conditional on the drawn symbol u, acceptance is exactly the
    // collision indicator, so each pair's rate is a binomial around its
    // collision fraction and the ceiling holds band-checked.
    const IdfCode quiet = assemble_idf_code(quiet_assembly(16, {4, 4}, {1, 1}), RngStream(1, 0));
    const Type2Report t2 = estimate_type2(quiet, 32, 400, RngStream(8, 0), {}, 2);
    for (const auto& pair : t2.pairs) {
        const double frac = pair.collisions / 16.0;
        CHECK(std::abs(pair.accept.p_hat - frac) <=
              4.0 * std::sqrt(std::max(frac * (1 - frac), 0.05) / 400.0));
        CHECK(pair.accept.ci_low <= pair.ceiling);
        if (pair.collisions == 0) CHECK(pair.accept.p_hat == 0.0);
    }
    CHECK(t2.over_ceiling_band == 0);
    CHECK(t2.power_violations == 0);

    // Noisy: pooled mean approaches 1/M and ceilings hold within bands.
    IdfAssembly a = noisy_assembly();
    a.L = 256;
    a.fixed_reps = {{2, 2}};
    const IdfCode code = assemble_idf_code(a, RngStream(4, 1), 2);
    const Type2Report noisy = estimate_type2(code, 64, 1500, RngStream(9, 0), {}, 2);
    const double mu = 0.25;
    const double se = std::sqrt(mu * (1 - mu) / (64.0 * 256.0)) + 0.01;
    CHECK(std::abs(noisy.pooled.p_hat - mu) <= 3.0 * se);
    CHECK(noisy.over_ceiling_band == 0);
    // Distinguished sender fixes the tested coordinate.
    const Type2Report pinned = estimate_type2(code, 8, 200, RngStream(10, 0), 2);
    for (const auto& pair : pinned.pairs) CHECK(pair.sender == 2);
}

TEST_CASE("larger L concentrates the collision fraction") {
    // With noiseless decoding the pair rate equals the collision fraction, so
    // the spread over pairs shrinks as L grows.
    const IdfCode small = assemble_idf_code(quiet_assembly(16, {4, 4}, {1, 1}), RngStream(1, 0));
    const IdfCode big = assemble_idf_code(quiet_assembly(1024, {4, 4}, {1, 1}), RngStream(1, 0));
    const Type2Report rs = estimate_type2(small, 64, 200, RngStream(11, 0), {}, 2);
    const Type2Report rb = estimate_type2(big, 64, 200, RngStream(11, 0), {}, 2);
    double spread_small = 0.0, spread_big = 0.0;
    for (const auto& p : rs.pairs) spread_small = std::max(spread_small, std::abs(p.collisions / 16.0 - 0.25));
    for (const auto& p : rb.pairs) spread_big = std::max(spread_big, std::abs(p.collisions / 1024.0 - 0.25));
    CHECK(spread_big < spread_small);
    CHECK(rb.max_p_hat <= rs.max_p_hat + 0.05);
}

TEST_CASE("estimates are independent of the worker count") {
    IdfAssembly a = noisy_assembly();
    a.fixed_reps = {{1, 1}};
    const IdfCode code = assemble_idf_code(a, RngStream(4, 0), 2);

    const Type1Report t1a = estimate_type1(code, 6, 300, RngStream(12, 0), 1);
    const Type1Report t1b = estimate_type1(code, 6, 300, RngStream(12, 0), 2);
    CHECK(t1a.aggregate.p_hat == t1b.aggregate.p_hat);
    for (int i = 0; i < 6; ++i)
        CHECK(t1a.identities[i].reject.p_hat == t1b.identities[i].reject.p_hat);

    const Type2Report t2a = estimate_type2(code, 6, 300, RngStream(13, 0), {}, 1);
    const Type2Report t2b = estimate_type2(code, 6, 300, RngStream(13, 0), {}, 2);
    for (int i = 0; i < 6; ++i) {
        CHECK(t2a.pairs[i].accept.p_hat == t2b.pairs[i].accept.p_hat);
        CHECK(t2a.pairs[i].collisions == t2b.pairs[i].collisions);
    }
}

TEST_CASE("state-dependent pipeline") {
    // A (nearly) deterministic state reduces to the mean-shifted channel.
    IdfAssembly sd = noisy_assembly();
    sd.fixed_reps = {{1, 1}};
    StateParams s;
    s.mu = {2.0, -0.5};
    s.sigma = CovMatrix(2);  // zero covariance: deterministic state
    sd.state = s;
    const IdfCode sd_code = assemble_idf_code(sd, RngStream(4, 2), 2);
    CHECK(sd_code.mean_offset == doctest::Approx(1.5));

    IdfAssembly plain = noisy_assembly();
    plain.fixed_reps = {{1, 1}};
    const IdfCode plain_code = assemble_idf_code(plain, RngStream(4, 3), 2);

    // Same estimation stream on both sides so the sampled identity tuples
    // coincide; what remains is independent trial noise.
    const SimulationReport sd_rep = run_sd_pipeline(sd_code, 8, 1500, 16, 800, RngStream(14, 0), 2);
    const SimulationReport plain_rep =
        simulate_idf(plain_code, 8, 1500, 16, 800, RngStream(14, 0), 2);
    const double p = plain_rep.type1.aggregate.p_hat;
    CHECK(std::abs(sd_rep.type1.aggregate.p_hat - p) <=
          3.0 * std::sqrt(2.0 * p * (1 - p) / (8.0 * 1500.0)) + 1e-9);
    CHECK(sd_rep.type1.power_violations == 0);
    CHECK(sd_rep.type2.power_violations == 0);

    CHECK_THROWS_AS(run_sd_pipeline(plain_code, 2, 10, 2, 10, RngStream(1, 0)),
                    std::invalid_argument);
}

TEST_CASE("feasibility flags and validation") {
    IdfAssembly a = quiet_assembly(16, {4, 16}, {1, 1});
    a.lambda = 0.2;
    const IdfCode code = assemble_idf_code(a, RngStream(1, 0));
    CHECK(code.alphabet_feasible == std::vector<bool>{false, true});  // 1/4 > 0.1, 1/16 <= 0.1
    CHECK(code.epsilon_feasible == std::vector<bool>{true, true});

    IdfAssembly bad = a;
    bad.lambda = 0.5;
    CHECK_THROWS_AS(assemble_idf_code(bad, RngStream(1, 0)), std::invalid_argument);
    bad = a;
    bad.M = {4};
    CHECK_THROWS_AS(assemble_idf_code(bad, RngStream(1, 0)), std::invalid_argument);
    bad = a;
    bad.power.p_peak = 0.01;  // constellation cannot fit under this peak
    CHECK_THROWS_AS(assemble_idf_code(bad, RngStream(1, 0)), std::invalid_argument);
}

TEST_CASE("identity_hex formatting") {
    CHECK(identity_hex({0, 0}) == "00000000000000000000000000000000");
    CHECK(identity_hex({0xDEADBEEF, 0x1}) == "00000000deadbeef0000000000000001");
}
