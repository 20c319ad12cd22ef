#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

// Deterministic randomness helpers. Everything downstream (dataset
// generation, shot sampling, mock draws) must be byte-stable across
// platforms and standard-library versions, so we avoid
// std::uniform_int_distribution / std::shuffle and derive all values
// from splitmix64 directly.

namespace explcal {

inline uint64_t splitmix64_step(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64_step(state_); }

    // Uniform in [0, n). Modulo bias is negligible for our pool sizes
    // (n << 2^64) and irrelevant to the determinism contract.
    uint64_t bounded(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double rate) { return next_double() < rate; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices out of [0, n), in draw order.
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        std::vector<size_t> out;
        out.reserve(k);
        for (size_t i = 0; i < k && i < n; ++i) {
            size_t j = i + static_cast<size_t>(bounded(n - i));
            std::swap(idx[i], idx[j]);
            out.push_back(idx[i]);
        }
        return out;
    }

private:
    uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Order-sensitive combiner for building stream seeds out of
// (seed, id hash, stream tag, ...) tuples.
inline uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    return splitmix64_step(s);
}

} // namespace explcal
