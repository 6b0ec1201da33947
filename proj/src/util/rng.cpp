#include "util/rng.hpp"

namespace agentloop {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    // Each part is avalanched before folding; plain xor-folding lets
    // adjacent small integers collide through the carry chain.
    uint64_t h = 0x6a09e667f3bcc908ull;
    for (uint64_t p : parts) {
        uint64_t s = p;
        h ^= splitmix64(s) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    uint64_t s = h;
    return splitmix64(s);
}

double hash_u01(uint64_t value) {
    uint64_t state = value;
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

uint64_t Rng::below(uint64_t n) {
    // Rejection sampling over the top multiple of n.
    const uint64_t limit = n * ((~uint64_t{0}) / n);
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::vector<size_t> Rng::permutation(size_t n) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t drawn = 0; drawn < k && drawn < n; ++drawn) {
        size_t j = drawn + static_cast<size_t>(below(n - drawn));
        std::swap(idx[drawn], idx[j]);
        out.push_back(idx[drawn]);
    }
    return out;
}

}  // namespace agentloop
