#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dcc {

// 64-bit FNV-1a. Used for per-request seed derivation; must be stable across
// platforms and releases (std::hash gives no such guarantee).
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((b >> (8 * i)) & 0xff);
    return fnv1a64(std::string_view(buf, 8), a ^ 0x9e3779b97f4a7c15ull);
}

// Seed for one backend request: a pure function of the run seed and the
// request coordinates, so reruns of a sampling loop are reproducible on
// backends that honor request seeds.
inline uint64_t derive_request_seed(uint64_t run_seed, std::string_view instance_id,
                                    uint32_t attempt, uint32_t step = 0) {
    uint64_t h = fnv1a64(instance_id, run_seed ^ 0x51ed2701a39b24a1ull);
    h = mix_seed(h, attempt);
    h = mix_seed(h, step);
    return h;
}

// Deterministic RNG with fully specified bounded draws. The standard
// distributions are implementation-defined, which would break golden-file
// tests across compilers, so bounded draws use explicit rejection sampling
// on top of mt19937_64.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
        uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // Uniform in [lo, hi] inclusive.
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
    }

    bool coin() { return (engine_() & 1u) != 0; }

private:
    std::mt19937_64 engine_;
};

}  // namespace dcc
