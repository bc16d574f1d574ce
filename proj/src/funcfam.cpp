#include "idsim/funcfam.hpp"

#include <stdexcept>

namespace idsim {

void validate_family_config(const FamilyConfig& config) {
    if (config.L < 2) throw std::invalid_argument("FamilyConfig: L must be at least 2");
    if (config.M.empty()) throw std::invalid_argument("FamilyConfig: M must not be empty");
    for (int m : config.M)
        if (m < 2) throw std::invalid_argument("FamilyConfig: every M_k must be at least 2");
}

namespace {

inline std::uint64_t family_hash(const FamilyKey& key, std::int64_t l) {
    std::uint64_t h = mix64(key.master_seed + kGolden64);
    h = hash_fold(h, static_cast<std::uint64_t>(key.sender));
    h = hash_fold(h, key.identity.hi);
    h = hash_fold(h, key.identity.lo);
    return hash_fold(h, static_cast<std::uint64_t>(l));
}

} // namespace

int eval_family(const FamilyKey& key, std::int64_t l, const FamilyConfig& config) {
    if (l < 1 || l > config.L) throw std::invalid_argument("eval_family: l out of range");
    if (key.sender < 1 || key.sender > static_cast<int>(config.M.size()))
        throw std::invalid_argument("eval_family: sender out of range");
    const int m = config.M[key.sender - 1];
    // Modulo bias is ~M/2^64, far below anything the statistical tests resolve.
    return 1 + static_cast<int>(family_hash(key, l) % static_cast<std::uint64_t>(m));
}

std::int64_t collision_count(const FamilyKey& a, const FamilyKey& b, const FamilyConfig& config) {
    validate_family_config(config);
    if (a.sender != b.sender) throw std::invalid_argument("collision_count: senders differ");
    if (a.master_seed != b.master_seed)
        throw std::invalid_argument("collision_count: master seeds differ");
    if (a.identity == b.identity)
        throw std::invalid_argument("collision_count: identities must differ");
    std::int64_t count = 0;
    for (std::int64_t l = 1; l <= config.L; ++l)
        count += eval_family(a, l, config) == eval_family(b, l, config);
    return count;
}

FourSetCounts partition_four_sets(std::span<const FamilyKey> keys_a, std::span<const FamilyKey> keys_b,
                                  const FamilyConfig& config, int distinguished_sender) {
    validate_family_config(config);
    const int K = static_cast<int>(config.M.size());
    if (static_cast<int>(keys_a.size()) != K || static_cast<int>(keys_b.size()) != K)
        throw std::invalid_argument("partition_four_sets: key tuples must cover all senders");
    if (distinguished_sender < 1 || distinguished_sender > K)
        throw std::invalid_argument("partition_four_sets: distinguished sender out of range");

    FourSetCounts counts;
    for (std::int64_t l = 1; l <= config.L; ++l) {
        const int kd = distinguished_sender - 1;
        const bool dist_match =
            eval_family(keys_a[kd], l, config) == eval_family(keys_b[kd], l, config);
        bool rest_match = true;  // vacuously true for K = 1
        for (int k = 0; k < K; ++k) {
            if (k == kd) continue;
            if (eval_family(keys_a[k], l, config) != eval_family(keys_b[k], l, config)) {
                rest_match = false;
                break;
            }
        }
        counts.match_distinguished += dist_match;
        counts.match_rest += rest_match;
    }
    counts.differ_distinguished = config.L - counts.match_distinguished;
    counts.differ_rest = config.L - counts.match_rest;
    return counts;
}

Identity128 sample_identity(RngStream& rng) {
    Identity128 id;
    id.hi = rng.next_u64();
    id.lo = rng.next_u64();
    return id;
}

} // namespace idsim
