#include "idsim/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "idsim/analysis.hpp"
#include "idsim/channel.hpp"
#include "idsim/crgen.hpp"
#include "idsim/csv.hpp"
#include "idsim/estimate.hpp"
#include "idsim/funcfam.hpp"
#include "idsim/gaussmath.hpp"
#include "idsim/idf.hpp"
#include "idsim/innercode.hpp"
#include "idsim/parallel.hpp"

namespace idsim {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct RunConfig {
    std::uint64_t seed = 42;
    int workers = 1;
    std::string out = "results";

    ChannelParams channel{2, 1.0};
    std::optional<StateParams> state;
    PowerConstraint power{10.0, {}};

    std::int64_t L = 256;
    std::vector<int> M = {16, 16};
    double lambda = 0.1;
    std::uint64_t master_seed = 42;

    double epsilon_target = 0.025;
    long long calib_trials = 100000;
    int max_reps = 4096;
    std::optional<std::vector<int>> fixed_reps;

    int type1_identities = 64;
    long long type1_trials = 1000;
    int type2_pairs = 1000;
    long long type2_trials = 1000;

    std::vector<std::int64_t> cr_L = {2, 16, 64, 1024};
    long long cr_trials = 1000000;
    std::optional<double> cr_sigma_override;

    std::int64_t coll_L = 4096;
    int coll_M = 16;
    long long coll_pairs = 10000;
    double coll_lambda = 0.25;

    std::vector<std::int64_t> bounds_L = {16, 64, 128};
    std::vector<double> bounds_lambda = {0.2, 0.25, 0.35};
    std::vector<int> bounds_M = {4, 16, 256};

    std::vector<double> rates_log2_L = {8, 12, 16, 20};
    double rates_lambda = 0.25;
    int rates_M = 256;
    int rates_n = 16;
};

json default_config_json() {
    json j;
    j["seed"] = 42;
    j["workers"] = 1;
    j["out"] = "results";
    j["channel"] = {{"K", 2}, {"sigma2", 1.0}};
    j["state"] = {{"mu", {1.0, -1.0}}, {"sigma", {{1.0, 0.5}, {0.5, 1.0}}}};
    j["power"] = {{"p_total", 10.0}, {"p_peak", nullptr}};
    j["idf"] = {{"L", 256}, {"M", {16, 16}}, {"lambda", 0.1}, {"master_seed", 42}};
    j["inner"] = {{"epsilon_target", 0.025},
                  {"calib_trials", 100000},
                  {"max_reps", 4096},
                  {"reps", nullptr}};
    j["trials"] = {{"type1_identities", 64},
                   {"type1_trials", 1000},
                   {"type2_pairs", 1000},
                   {"type2_trials", 1000}};
    j["cr"] = {{"L_list", {2, 16, 64, 1024}}, {"trials", 1000000}, {"sigma_override", nullptr}};
    j["collisions"] = {{"L", 4096}, {"M", 16}, {"pairs", 10000}, {"lambda", 0.25}};
    j["bounds"] = {{"L", {16, 64, 128}}, {"lambda", {0.2, 0.25, 0.35}}, {"M", {4, 16, 256}}};
    j["rates"] = {{"log2_L", {8, 12, 16, 20}}, {"lambda", 0.25}, {"M", 256}, {"n", 16}};
    return j;
}

void merge_json(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (const auto& [key, value] : patch.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object())
            merge_json(base[key], value);
        else
            base[key] = value;
    }
}

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.workers = j.at("workers").get<int>();
        c.out = j.at("out").get<std::string>();

        c.channel.K = j.at("channel").at("K").get<int>();
        c.channel.sigma2 = j.at("channel").at("sigma2").get<double>();
        if (c.channel.K < 1) throw ConfigError("channel.K must be at least 1");
        if (!(c.channel.sigma2 > 0.0)) throw ConfigError("channel.sigma2 must be positive");

        if (!j.at("state").is_null()) {
            StateParams s;
            s.mu = j.at("state").at("mu").get<std::vector<double>>();
            const auto rows = j.at("state").at("sigma").get<std::vector<std::vector<double>>>();
            s.sigma = CovMatrix(static_cast<int>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].size() != rows.size()) throw ConfigError("state.sigma must be square");
                for (std::size_t k = 0; k < rows.size(); ++k) s.sigma(static_cast<int>(i), static_cast<int>(k)) = rows[i][k];
            }
            if (static_cast<int>(s.mu.size()) != c.channel.K || s.sigma.dim != c.channel.K)
                throw ConfigError("state dimensions must match channel.K");
            cholesky_lower(s.sigma);  // validates symmetry/semidefiniteness
            c.state = std::move(s);
        }

        c.power.p_total = j.at("power").at("p_total").get<double>();
        if (!(c.power.p_total > 0.0)) throw ConfigError("power.p_total must be positive");
        if (!j.at("power").at("p_peak").is_null()) {
            c.power.p_peak = j.at("power").at("p_peak").get<double>();
            if (!(*c.power.p_peak > 0.0)) throw ConfigError("power.p_peak must be positive");
        }

        c.L = j.at("idf").at("L").get<std::int64_t>();
        c.M = j.at("idf").at("M").get<std::vector<int>>();
        c.lambda = j.at("idf").at("lambda").get<double>();
        c.master_seed = j.at("idf").at("master_seed").get<std::uint64_t>();
        if (c.L < 2) throw ConfigError("idf.L must be at least 2");
        if (static_cast<int>(c.M.size()) != c.channel.K)
            throw ConfigError("idf.M must have channel.K entries");
        for (int m : c.M)
            if (m < 2) throw ConfigError("idf.M entries must be at least 2");
        if (!(c.lambda > 0.0 && c.lambda < 0.5)) throw ConfigError("idf.lambda must lie in (0, 1/2)");

        c.epsilon_target = j.at("inner").at("epsilon_target").get<double>();
        c.calib_trials = j.at("inner").at("calib_trials").get<long long>();
        c.max_reps = j.at("inner").at("max_reps").get<int>();
        if (!(c.epsilon_target > 0.0 && c.epsilon_target < 0.5))
            throw ConfigError("inner.epsilon_target must lie in (0, 0.5)");
        if (c.calib_trials < 1000) throw ConfigError("inner.calib_trials must be at least 1000");
        if (!j.at("inner").at("reps").is_null()) {
            c.fixed_reps = j.at("inner").at("reps").get<std::vector<int>>();
            if (static_cast<int>(c.fixed_reps->size()) != c.channel.K)
                throw ConfigError("inner.reps must have channel.K entries");
        }

        c.type1_identities = j.at("trials").at("type1_identities").get<int>();
        c.type1_trials = j.at("trials").at("type1_trials").get<long long>();
        c.type2_pairs = j.at("trials").at("type2_pairs").get<int>();
        c.type2_trials = j.at("trials").at("type2_trials").get<long long>();
        if (c.type1_identities < 1 || c.type1_trials < 1 || c.type2_pairs < 1 || c.type2_trials < 1)
            throw ConfigError("trials counts must be positive");

        c.cr_L = j.at("cr").at("L_list").get<std::vector<std::int64_t>>();
        c.cr_trials = j.at("cr").at("trials").get<long long>();
        for (std::int64_t l : c.cr_L)
            if (l < 2) throw ConfigError("cr.L_list entries must be at least 2");
        if (c.cr_trials < 1000) throw ConfigError("cr.trials must be at least 1000");
        if (!j.at("cr").at("sigma_override").is_null())
            c.cr_sigma_override = j.at("cr").at("sigma_override").get<double>();

        c.coll_L = j.at("collisions").at("L").get<std::int64_t>();
        c.coll_M = j.at("collisions").at("M").get<int>();
        c.coll_pairs = j.at("collisions").at("pairs").get<long long>();
        c.coll_lambda = j.at("collisions").at("lambda").get<double>();

        c.bounds_L = j.at("bounds").at("L").get<std::vector<std::int64_t>>();
        c.bounds_lambda = j.at("bounds").at("lambda").get<std::vector<double>>();
        c.bounds_M = j.at("bounds").at("M").get<std::vector<int>>();

        c.rates_log2_L = j.at("rates").at("log2_L").get<std::vector<double>>();
        c.rates_lambda = j.at("rates").at("lambda").get<double>();
        c.rates_M = j.at("rates").at("M").get<int>();
        c.rates_n = j.at("rates").at("n").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

// Canonical config echo. Execution knobs (workers, out) are omitted: results
// are independent of them, and an embedded config must reproduce its run
// bit-exactly wherever it is replayed.
json config_to_json(const RunConfig& c) {
    json j = default_config_json();
    j.erase("workers");
    j.erase("out");
    j["seed"] = c.seed;
    j["channel"]["K"] = c.channel.K;
    j["channel"]["sigma2"] = c.channel.sigma2;
    if (c.state) {
        json rows = json::array();
        for (int i = 0; i < c.state->sigma.dim; ++i) {
            json row = json::array();
            for (int k = 0; k < c.state->sigma.dim; ++k) row.push_back(c.state->sigma(i, k));
            rows.push_back(row);
        }
        j["state"] = {{"mu", c.state->mu}, {"sigma", rows}};
    } else {
        j["state"] = nullptr;
    }
    j["power"]["p_total"] = c.power.p_total;
    j["power"]["p_peak"] = c.power.p_peak ? json(*c.power.p_peak) : json(nullptr);
    j["idf"] = {{"L", c.L}, {"M", c.M}, {"lambda", c.lambda}, {"master_seed", c.master_seed}};
    j["inner"]["epsilon_target"] = c.epsilon_target;
    j["inner"]["calib_trials"] = c.calib_trials;
    j["inner"]["max_reps"] = c.max_reps;
    j["inner"]["reps"] = c.fixed_reps ? json(*c.fixed_reps) : json(nullptr);
    j["trials"] = {{"type1_identities", c.type1_identities},
                   {"type1_trials", c.type1_trials},
                   {"type2_pairs", c.type2_pairs},
                   {"type2_trials", c.type2_trials}};
    j["cr"]["L_list"] = c.cr_L;
    j["cr"]["trials"] = c.cr_trials;
    j["cr"]["sigma_override"] = c.cr_sigma_override ? json(*c.cr_sigma_override) : json(nullptr);
    j["collisions"] = {{"L", c.coll_L}, {"M", c.coll_M}, {"pairs", c.coll_pairs}, {"lambda", c.coll_lambda}};
    j["bounds"] = {{"L", c.bounds_L}, {"lambda", c.bounds_lambda}, {"M", c.bounds_M}};
    j["rates"] = {{"log2_L", c.rates_log2_L}, {"lambda", c.rates_lambda}, {"M", c.rates_M}, {"n", c.rates_n}};
    return j;
}

json estimate_to_json(const ErrorEstimate& e) {
    return {{"p_hat", e.p_hat}, {"trials", e.trials}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}};
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << contents;
}

void write_results(const fs::path& out_dir, const json& results) {
    write_file(out_dir / "results.json", results.dump(2) + "\n");
}

struct CrCaseResult {
    std::string label;
    std::int64_t L;
    double chi2;
    double critical;
    bool pass;
};

// Chi-square uniformity of the quantized first channel output, sampled with
// real zero-input feedback sessions.
CrCaseResult run_cr_case(const std::string& label, std::int64_t L, long long trials,
                         const ChannelParams& channel, const std::optional<StateParams>& state,
                         std::optional<double> sigma_override, RngStream rng) {
    auto [mu_y, sigma_y] = derive_output_stats(channel, state);
    if (sigma_override) sigma_y = *sigma_override;
    const Quantizer quantizer({L, mu_y, sigma_y});
    std::vector<Encoder> encoders(channel.K, [](int, std::span<const double>) { return 0.0; });

    std::vector<long long> counts(static_cast<std::size_t>(L), 0);
    for (long long t = 0; t < trials; ++t) {
        RngStream tr = rng.derive(0xCC01, static_cast<std::uint64_t>(t));
        const Transcript transcript = run_feedback_session(encoders, 1, channel, state, tr);
        counts[static_cast<std::size_t>(quantizer(transcript.y[0]) - 1)]++;
    }
    const double expected = static_cast<double>(trials) / static_cast<double>(L);
    double chi2 = 0.0;
    for (long long c : counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    CrCaseResult r;
    r.label = label;
    r.L = L;
    r.chi2 = chi2;
    r.critical = chi2_critical(0.99, static_cast<int>(L - 1));
    r.pass = chi2 < r.critical;
    return r;
}

int cmd_cr_check(const RunConfig& cfg, const fs::path& out_dir) {
    RngStream rng(cfg.seed);
    std::vector<CrCaseResult> rows;
    for (std::size_t i = 0; i < cfg.cr_L.size(); ++i)
        rows.push_back(run_cr_case("gmac", cfg.cr_L[i], cfg.cr_trials, cfg.channel, {},
                                   cfg.cr_sigma_override, rng.derive(1, i)));
    if (cfg.state)
        for (std::size_t i = 0; i < cfg.cr_L.size(); ++i)
            rows.push_back(run_cr_case("sd-gmac", cfg.cr_L[i], cfg.cr_trials, cfg.channel, cfg.state,
                                       cfg.cr_sigma_override, rng.derive(2, i)));

    std::ostringstream csv;
    csv << "case,L,chi2,dof,critical_99,pass\n";
    bool all_pass = true;
    json jrows = json::array();
    for (const auto& r : rows) {
        csv << r.label << ',' << r.L << ',' << csv_num(r.chi2) << ',' << (r.L - 1) << ','
            << csv_num(r.critical) << ',' << (r.pass ? 1 : 0) << "\n";
        jrows.push_back({{"case", r.label},
                         {"L", r.L},
                         {"chi2", r.chi2},
                         {"dof", r.L - 1},
                         {"critical_99", r.critical},
                         {"pass", r.pass}});
        all_pass = all_pass && r.pass;
    }
    write_file(out_dir / "cr_check.csv", csv.str());

    json results;
    results["command"] = "cr-check";
    results["config"] = config_to_json(cfg);
    results["cases"] = jrows;
    results["all_pass"] = all_pass;
    write_results(out_dir, results);
    std::cout << (all_pass ? "cr-check: all cases pass" : "cr-check: FAILURE") << "\n";
    return all_pass ? 0 : 4;
}

json calibration_to_json(const IdfCode& code, double epsilon_target) {
    json j;
    j["success"] = code.calibrated;
    j["epsilon_target"] = epsilon_target;
    j["reps"] = code.codebook.cfg.reps;
    j["n_inner"] = code.codebook.n_inner;
    j["m"] = code.m();
    j["p_use"] = code.codebook.cfg.p_use;
    j["sigma2_eff"] = code.codebook.cfg.sigma2_eff;
    json senders = json::array();
    for (std::size_t k = 0; k < code.inner_error.size(); ++k) {
        json s = estimate_to_json(code.inner_error[k]);
        s["epsilon_upper95"] = code.epsilon_upper[k];
        senders.push_back(s);
    }
    j["per_sender"] = senders;
    return j;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir, bool with_state) {
    if (with_state && !cfg.state) {
        std::cerr << "sd-simulate: config has no state block\n";
        return 2;
    }
    IdfAssembly assembly;
    assembly.channel = cfg.channel;
    assembly.state = with_state ? cfg.state : std::optional<StateParams>{};
    assembly.power = cfg.power;
    assembly.L = cfg.L;
    assembly.M = cfg.M;
    assembly.lambda = cfg.lambda;
    assembly.master_seed = cfg.master_seed;
    // The union-bound budget needs the inner error under lambda/2.
    assembly.epsilon_target = std::min(cfg.epsilon_target, cfg.lambda / 2.0);
    assembly.calib_trials = cfg.calib_trials;
    assembly.max_reps = cfg.max_reps;
    assembly.fixed_reps = cfg.fixed_reps;

    RngStream rng(cfg.seed);
    const IdfCode code = assemble_idf_code(assembly, rng.derive(0xA55E), cfg.workers);

    json results;
    results["command"] = with_state ? "sd-simulate" : "simulate";
    results["config"] = config_to_json(cfg);
    results["calibration"] = calibration_to_json(code, cfg.epsilon_target);

    if (!code.calibrated) {
        write_results(out_dir, results);
        std::cerr << "calibration failed; best epsilon upper limits:";
        for (double e : code.epsilon_upper) std::cerr << ' ' << e;
        std::cerr << "\n";
        return 3;
    }

    const SimulationReport report = simulate_idf(code, cfg.type1_identities, cfg.type1_trials,
                                                 cfg.type2_pairs, cfg.type2_trials,
                                                 rng.derive(0x51E0), cfg.workers);

    {
        std::ostringstream os;
        write_type1_csv(os, report.type1);
        write_file(out_dir / "type1_identities.csv", os.str());
    }
    {
        std::ostringstream os;
        write_type2_csv(os, report.type2);
        write_file(out_dir / "type2_pairs.csv", os.str());
    }
    {
        std::ostringstream os;
        write_codebook_csv(os, code.codebook);
        write_file(out_dir / "codebook.csv", os.str());
    }
    {
        std::ostringstream os;
        write_boundaries_csv(os, code.quantizer);
        write_file(out_dir / "boundaries.csv", os.str());
    }

    json feasibility;
    feasibility["alphabet"] = code.alphabet_feasible;
    feasibility["epsilon"] = code.epsilon_feasible;
    results["feasibility"] = feasibility;

    json t1;
    t1["aggregate"] = estimate_to_json(report.type1.aggregate);
    json t1s = json::array();
    for (const auto& e : report.type1.per_sender) t1s.push_back(estimate_to_json(e));
    t1["per_sender"] = t1s;
    t1["worst_index"] = report.type1.worst_index;
    t1["worst"] = estimate_to_json(report.type1.identities[report.type1.worst_index].reject);
    t1["power_violations"] = report.type1.power_violations;
    results["type1"] = t1;

    json t2;
    t2["pairs"] = static_cast<int>(report.type2.pairs.size());
    t2["trials_per_pair"] = cfg.type2_trials;
    t2["pooled"] = estimate_to_json(report.type2.pooled);
    t2["max_p_hat"] = report.type2.max_p_hat;
    t2["max_index"] = report.type2.max_index;
    t2["over_lambda_point"] = report.type2.over_lambda_point;
    t2["over_lambda_band"] = report.type2.over_lambda_band;
    t2["over_ceiling_point"] = report.type2.over_ceiling_point;
    t2["over_ceiling_band"] = report.type2.over_ceiling_band;
    t2["power_violations"] = report.type2.power_violations;
    results["type2"] = t2;

    // Gate on the aggregate estimates; per-pair spread is reported above.
    const bool pass = report.type1.aggregate.ci_high <= cfg.lambda &&
                      report.type2.pooled.ci_high <= cfg.lambda;
    results["gate"] = {{"lambda", cfg.lambda},
                       {"type1_upper", report.type1.aggregate.ci_high},
                       {"type2_pooled_upper", report.type2.pooled.ci_high},
                       {"pass", pass}};
    write_results(out_dir, results);

    std::cout << "type1 aggregate p_hat=" << report.type1.aggregate.p_hat
              << " upper=" << report.type1.aggregate.ci_high << "\n"
              << "type2 pooled p_hat=" << report.type2.pooled.p_hat
              << " upper=" << report.type2.pooled.ci_high
              << " over_lambda_point=" << report.type2.over_lambda_point << "/"
              << report.type2.pairs.size() << "\n"
              << (pass ? "gate: pass" : "gate: FAILURE") << "\n";
    return pass ? 0 : 4;
}

int cmd_calibrate(const RunConfig& cfg, const fs::path& out_dir, bool with_state) {
    IdfAssembly assembly;
    assembly.channel = cfg.channel;
    assembly.state = with_state ? cfg.state : std::optional<StateParams>{};
    assembly.power = cfg.power;
    assembly.L = cfg.L;
    assembly.M = cfg.M;
    assembly.lambda = cfg.lambda;
    assembly.master_seed = cfg.master_seed;
    // The union-bound budget needs the inner error under lambda/2.
    assembly.epsilon_target = std::min(cfg.epsilon_target, cfg.lambda / 2.0);
    assembly.calib_trials = cfg.calib_trials;
    assembly.max_reps = cfg.max_reps;
    assembly.fixed_reps = cfg.fixed_reps;

    RngStream rng(cfg.seed);
    const IdfCode code = assemble_idf_code(assembly, rng.derive(0xA55E), cfg.workers);

    json results;
    results["command"] = "calibrate";
    results["config"] = config_to_json(cfg);
    results["calibration"] = calibration_to_json(code, cfg.epsilon_target);
    write_results(out_dir, results);
    {
        std::ostringstream os;
        write_codebook_csv(os, code.codebook);
        write_file(out_dir / "codebook.csv", os.str());
    }
    std::cout << "calibrated reps:";
    for (int r : code.codebook.cfg.reps) std::cout << ' ' << r;
    std::cout << (code.calibrated ? " (success)" : " (FAILED)") << "\n";
    return code.calibrated ? 0 : 3;
}

int cmd_bounds(const RunConfig& cfg, const fs::path& out_dir) {
    std::ostringstream csv;
    csv << "L,lambda,M,log2_chernoff,log2_corollary,exact_tail,ordering_ok,vacuous\n";
    bool all_ordered = true;
    long long rows = 0;
    for (std::int64_t L : cfg.bounds_L)
        for (int M : cfg.bounds_M)
            for (double lambda : cfg.bounds_lambda) {
                if (lambda < 1.0 / M) continue;
                const double chern = chernoff_log2_bound(L, lambda, 1.0 / M);
                const BoundReport corol = corollary_log2_bound(L, lambda, M);
                const double tail = binomial_tail_gt(L, 1.0 / M, static_cast<double>(L) * lambda);
                const bool ordered =
                    tail <= std::exp2(chern) && chern <= corol.log2_bound;
                all_ordered = all_ordered && ordered;
                ++rows;
                csv << L << ',' << csv_num(lambda) << ',' << M << ',' << csv_num(chern) << ','
                    << csv_num(corol.log2_bound) << ',' << csv_num(tail) << ',' << (ordered ? 1 : 0)
                    << ',' << (corol.vacuous ? 1 : 0) << "\n";
            }
    write_file(out_dir / "bounds.csv", csv.str());

    json results;
    results["command"] = "bounds";
    results["config"] = config_to_json(cfg);
    results["rows"] = rows;
    results["all_ordered"] = all_ordered;
    write_results(out_dir, results);
    std::cout << "bounds: " << rows << " rows, ordering " << (all_ordered ? "ok" : "VIOLATED")
              << "\n";
    return all_ordered ? 0 : 4;
}

int cmd_rates(const RunConfig& cfg, const fs::path& out_dir) {
    std::ostringstream csv;
    csv << "log2_L,log2_N,phi1_rate,phi2_rate,phi3_rate\n";
    for (double log2_L : cfg.rates_log2_L) {
        const double exponent = cfg.rates_lambda * std::log2(static_cast<double>(cfg.rates_M)) - 1.0;
        const double log2_n = std::exp2(log2_L) * exponent;  // may overflow to inf
        const double phi3 = phi3_rate_from_log2_L(log2_L, cfg.rates_lambda, cfg.rates_M, cfg.rates_n);
        const double phi1 = std::isfinite(log2_n)
                                ? rate_under_scaling(log2_n, cfg.rates_n, ScalingKind::exponential)
                                : std::numeric_limits<double>::infinity();
        const double phi2 =
            std::isfinite(log2_n)
                ? rate_under_scaling(log2_n, cfg.rates_n, ScalingKind::super_exponential)
                : std::numeric_limits<double>::infinity();
        csv << csv_num(log2_L) << ',' << csv_num(log2_n) << ',' << csv_num(phi1) << ','
            << csv_num(phi2) << ',' << csv_num(phi3) << "\n";
    }
    write_file(out_dir / "rates.csv", csv.str());

    json results;
    results["command"] = "rates";
    results["config"] = config_to_json(cfg);
    results["rows"] = cfg.rates_log2_L.size();
    write_results(out_dir, results);
    std::cout << "rates: " << cfg.rates_log2_L.size() << " rows\n";
    return 0;
}

int cmd_collisions(const RunConfig& cfg, const fs::path& out_dir) {
    FamilyConfig family{cfg.coll_L, {cfg.coll_M}};
    RngStream rng(cfg.seed);
    std::ostringstream csv;
    csv << "pair_index,collisions,fraction,exceeds_lambda\n";
    long long total = 0, exceed = 0;
    for (long long p = 0; p < cfg.coll_pairs; ++p) {
        RngStream pr = rng.derive(0xC011, static_cast<std::uint64_t>(p));
        const FamilyKey a{cfg.master_seed, 1, sample_identity(pr)};
        FamilyKey b{cfg.master_seed, 1, sample_identity(pr)};
        while (b.identity == a.identity) b.identity = sample_identity(pr);
        const std::int64_t c = collision_count(a, b, family);
        const double fraction = static_cast<double>(c) / static_cast<double>(cfg.coll_L);
        const bool over = fraction > cfg.coll_lambda;
        total += c;
        exceed += over;
        csv << p << ',' << c << ',' << csv_num(fraction) << ',' << (over ? 1 : 0) << "\n";
    }
    write_file(out_dir / "collisions.csv", csv.str());

    const double mean_fraction =
        static_cast<double>(total) / (static_cast<double>(cfg.coll_pairs) * cfg.coll_L);
    const double mu = 1.0 / cfg.coll_M;
    const double band =
        3.0 * std::sqrt(mu * (1.0 - mu) / (static_cast<double>(cfg.coll_L) * cfg.coll_pairs));
    const bool mean_ok = std::abs(mean_fraction - mu) <= band;

    json results;
    results["command"] = "collisions";
    results["config"] = config_to_json(cfg);
    results["mean_fraction"] = mean_fraction;
    results["expected_fraction"] = mu;
    results["band_3se"] = band;
    results["mean_ok"] = mean_ok;
    results["exceed_lambda"] = exceed;
    write_results(out_dir, results);
    std::cout << "collisions: mean fraction " << mean_fraction << " (expected " << mu << "), "
              << exceed << " pairs over lambda\n";
    return mean_ok ? 0 : 4;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Identification-with-feedback simulator for Gaussian multiple-access channels"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> workers_flag;
    std::optional<std::string> out_flag;
    std::optional<long long> trials_flag;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--seed", seed_flag, "override the master seed");
    app.add_option("--workers", workers_flag, "worker threads (results are worker-independent)");
    app.add_option("--out", out_flag, "output directory");
    app.add_option("--trials", trials_flag, "override every per-estimate trial count");
    app.add_option("--set", overrides, "dotted-path config override, e.g. --set idf.lambda=0.2");

    auto* cr = app.add_subcommand("cr-check", "common-randomness uniformity checks");
    auto* sim = app.add_subcommand("simulate", "full identification pipeline on the plain channel");
    auto* sd = app.add_subcommand("sd-simulate", "full pipeline on the state-dependent channel");
    auto* bounds = app.add_subcommand("bounds", "closed-form bound tables with the exact-tail ordering");
    auto* rates = app.add_subcommand("rates", "rate tables under the three scaling laws");
    auto* collisions = app.add_subcommand("collisions", "function-family collision statistics");
    auto* calibrate_cmd = app.add_subcommand("calibrate", "inner-code calibration only");

    std::vector<std::string> rargs(args.rbegin(), args.rend());  // CLI11 wants reversed args
    try {
        app.parse(rargs);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        json doc = default_config_json();
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) {
                std::cerr << "config: cannot open " << config_path << "\n";
                return 2;
            }
            merge_json(doc, json::parse(is));
        }
        for (const std::string& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects path=value: " + kv);
            const std::string path = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            json* node = &doc;
            std::size_t start = 0;
            while (true) {
                const auto dot = path.find('.', start);
                const std::string key = path.substr(start, dot - start);
                if (key.empty()) throw ConfigError("--set: empty key in " + kv);
                if (dot == std::string::npos) {
                    json parsed;
                    try {
                        parsed = json::parse(value);
                    } catch (const json::exception&) {
                        parsed = value;  // bare strings stay strings
                    }
                    (*node)[key] = parsed;
                    break;
                }
                node = &(*node)[key];
                start = dot + 1;
            }
        }
        if (seed_flag) doc["seed"] = *seed_flag;
        if (workers_flag) doc["workers"] = *workers_flag;
        if (out_flag) doc["out"] = *out_flag;
        if (trials_flag) {
            doc["cr"]["trials"] = *trials_flag;
            doc["inner"]["calib_trials"] = *trials_flag;
            doc["trials"]["type1_trials"] = *trials_flag;
            doc["trials"]["type2_trials"] = *trials_flag;
        }

        const RunConfig cfg = config_from_json(doc);
        const fs::path out_dir(cfg.out);
        fs::create_directories(out_dir);

        const auto t_start = std::chrono::steady_clock::now();
        int rc = 2;
        if (cr->parsed()) rc = cmd_cr_check(cfg, out_dir);
        else if (sim->parsed()) rc = cmd_simulate(cfg, out_dir, false);
        else if (sd->parsed()) rc = cmd_simulate(cfg, out_dir, true);
        else if (bounds->parsed()) rc = cmd_bounds(cfg, out_dir);
        else if (rates->parsed()) rc = cmd_rates(cfg, out_dir);
        else if (collisions->parsed()) rc = cmd_collisions(cfg, out_dir);
        else if (calibrate_cmd->parsed()) rc = cmd_calibrate(cfg, out_dir, cfg.state.has_value());
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        // Wall time stays out of results.json so identical runs stay byte-identical.
        write_file(out_dir / "timing.log", "wall_seconds " + csv_num(secs) + "\n");
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace idsim
