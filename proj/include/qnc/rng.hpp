#pragma once

#include <cstdint>

namespace qnc {

// splitmix64: tiny counter-based generator. Every stochastic routine takes an
// explicit 64-bit seed, so Monte Carlo cells are bit-reproducible and streams
// can be split without coordination.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform on (0,1), never exactly 0 or 1
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Stateless draw: uniform in (0,1) determined by (seed, index). Used so that
// simulation output at a given absolute time index does not depend on how far
// the extended horizon reaches.
inline double uniform_at(std::uint64_t seed, std::int64_t index) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 0x10000000LL));
    std::uint64_t z = splitmix64(s);
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

// Derive an independent stream seed from (master, a, b); used for
// per-replication and per-bootstrap streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s = h ^ (a + 0x9e3779b97f4a7c15ULL);
    h = splitmix64(s);
    s = h ^ (b + 0xbf58476d1ce4e5b9ULL);
    return splitmix64(s);
}

} // namespace qnc
