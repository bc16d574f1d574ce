#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "idsim/rng.hpp"

namespace idsim {

// Identity index. The identity sets are doubly exponential and never
// materialized; 128 bits make sampling collisions negligible.
struct Identity128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    friend bool operator==(const Identity128&, const Identity128&) = default;
};

// Addresses one virtual function F_{sender,identity}: {1..L} -> {1..M_sender}.
struct FamilyKey {
    std::uint64_t master_seed = 0;
    int sender = 1;  // 1-based
    Identity128 identity;
};

struct FamilyConfig {
    std::int64_t L = 2;       // common-randomness alphabet size
    std::vector<int> M;       // per-sender output alphabet sizes, each >= 2
};

void validate_family_config(const FamilyConfig& config);

// Deterministic keyed evaluation, marginally uniform on {1..M_sender} and
// independent across distinct (key, l) cells to PRF quality.
int eval_family(const FamilyKey& key, std::int64_t l, const FamilyConfig& config);

// |{l : F_a(l) == F_b(l)}| over the full domain. Requires the same sender and
// master seed and distinct identities.
std::int64_t collision_count(const FamilyKey& a, const FamilyKey& b, const FamilyConfig& config);

struct FourSetCounts {
    std::int64_t match_distinguished = 0;   // |F_{i_k} ∩ F_{i'_k}|
    std::int64_t match_rest = 0;            // remaining (K-1)-tuples agree pointwise
    std::int64_t differ_distinguished = 0;
    std::int64_t differ_rest = 0;
};

// Partitions {1..L} by agreement of the distinguished sender's functions and
// by pointwise agreement of everyone else's tuples. The matching and
// differing counts sum to L on each axis.
FourSetCounts partition_four_sets(std::span<const FamilyKey> keys_a, std::span<const FamilyKey> keys_b,
                                  const FamilyConfig& config, int distinguished_sender);

// Uniform draw from the 128-bit identity space.
Identity128 sample_identity(RngStream& rng);

} // namespace idsim
