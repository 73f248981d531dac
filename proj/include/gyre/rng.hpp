#pragma once
#include <cstdint>
#include <string_view>

namespace gyre {

// splitmix64: the mixing function used for all seeding and counter streams.
// Chosen over std::mt19937 + std distributions because the standard leaves
// distribution algorithms unspecified; this generator is bit-stable everywhere.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t x) {
    uint64_t s = x;
    return splitmix64(s);
}

// Derive a sub-seed from a root seed and a short role tag.
// All toolkit randomness flows from one root seed through named streams.
inline uint64_t derive_seed(uint64_t root, std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    uint64_t s = root ^ h;
    // two mixing rounds so adjacent roots with similar tags decorrelate
    splitmix64(s);
    return splitmix64(s);
}

// Counter stream: value i of the stream identified by (seed, i).
// Independent of how many draws other streams have consumed.
inline uint64_t stream_at(uint64_t seed, uint64_t counter) {
    uint64_t s = seed ^ (counter * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    splitmix64(s);
    return splitmix64(s);
}

// Sequential generator over splitmix64.
class Rng {
public:
    Rng() : state_(0x853c49e6748fea9bULL) {}
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1): 53 mantissa bits, bit-stable
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); n > 0. Debiased by rejection.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

}  // namespace gyre
