#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace agentloop {

// 64-bit FNV-1a, used to fold strings into seed material.
uint64_t fnv1a64(std::string_view s);

// SplitMix64 step; also the mixing primitive for derived seeds.
uint64_t splitmix64(uint64_t& state);

// Folds a list of values into one seed. Order matters.
uint64_t mix_seed(std::initializer_list<uint64_t> parts);

// Deterministic uniform double in [0, 1) from a single hashed value.
double hash_u01(uint64_t value);

// Thin mt19937_64 wrapper with fully specified helper draws, so results do
// not depend on the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n);

    // 53-bit uniform in [0, 1).
    double uniform01();

    bool bernoulli(double p) { return uniform01() < p; }

    // Fisher-Yates shuffle of indices [0, n).
    std::vector<size_t> permutation(size_t n);

    // k distinct indices drawn uniformly from [0, n), in draw order.
    std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  private:
    std::mt19937_64 gen_;
};

}  // namespace agentloop
