#pragma once

// Seeded random streams with deterministic sub-stream derivation.
//
// Replicate i of any Monte Carlo loop draws from derive(i) of the loop's
// root stream, so results are bit-identical regardless of worker count or
// scheduling. Uniform doubles are produced by an explicit 53-bit mapping
// rather than std::uniform_real_distribution, whose output is not pinned
// by the standard.

#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace bvr {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

    // Independent child stream; mixing uses the seed, not engine state.
    [[nodiscard]] Rng derive(std::uint64_t index) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(index + 0x51BD1E8FA3C9ull)));
    }
    [[nodiscard]] Rng derive(std::uint64_t a, std::uint64_t b) const { return derive(a).derive(b); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1): top 53 bits of one engine output.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// Runs fn(i) for i in [0, total) on up to `workers` threads with a blocked
// schedule. fn must only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t total, unsigned workers, Fn&& fn) {
    if (workers <= 1 || total < 2) {
        for (std::size_t i = 0; i < total; ++i) fn(i);
        return;
    }
    unsigned nthreads = workers;
    if (static_cast<std::size_t>(nthreads) > total) nthreads = static_cast<unsigned>(total);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    const std::size_t chunk = (total + nthreads - 1) / nthreads;
    for (unsigned t = 0; t < nthreads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(total, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace bvr
