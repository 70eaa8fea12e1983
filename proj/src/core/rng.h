#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pa {

// Deterministic random stream. The distributions are implemented by hand on
// top of mt19937_64 because the standard library's distribution objects are
// not bit-stable across implementations, and golden hashes in the tests (and
// run-to-run reproducibility of training) depend on exact draws.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return (double)(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n);

    // Standard normal via Box-Muller. Draws two uniforms per sample and
    // discards the spare so the stream position is input independent.
    double normal();

    void fill_normal(float* dst, int64_t n);
    void fill_uniform(float* dst, int64_t n, float lo, float hi);

    // Categorical draw from non-negative weights summing to ~1.
    size_t categorical(const std::vector<double>& probs);

    // Independent substream derived from (this stream's seed, tag). Children
    // with distinct tags never collide, and deriving a child does not advance
    // the parent.
    Rng child(const std::string& tag) const;
    Rng child(uint64_t tag) const;

private:
    std::mt19937_64 engine_;
    uint64_t seed_;
};

// FNV-1a, used for seed derivation and content hashing.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 14695981039346656037ull);
uint64_t fnv1a64(const std::string& s);

}  // namespace pa
