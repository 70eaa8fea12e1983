#include "core/rng.h"

#include <cmath>

#include "core/error.h"

namespace pa {

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const unsigned char* p = (const unsigned char*)data;
    uint64_t h = seed;
    for (size_t i = 0; i < len; i++) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

uint64_t Rng::uniform_index(uint64_t n) {
    PA_CHECK(n > 0, "uniform_index: n must be positive");
    // Rejection sampling to avoid modulo bias.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    // u1 in (0,1] so log() is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void Rng::fill_normal(float* dst, int64_t n) {
    for (int64_t i = 0; i < n; i++) dst[i] = (float)normal();
}

void Rng::fill_uniform(float* dst, int64_t n, float lo, float hi) {
    for (int64_t i = 0; i < n; i++) dst[i] = (float)uniform(lo, hi);
}

size_t Rng::categorical(const std::vector<double>& probs) {
    double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); i++) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

Rng Rng::child(const std::string& tag) const {
    uint64_t h = fnv1a64(tag);
    h = fnv1a64(&seed_, sizeof(seed_), h);
    return Rng(h);
}

Rng Rng::child(uint64_t tag) const {
    uint64_t h = fnv1a64(&tag, sizeof(tag));
    h = fnv1a64(&seed_, sizeof(seed_), h);
    return Rng(h);
}

}  // namespace pa
