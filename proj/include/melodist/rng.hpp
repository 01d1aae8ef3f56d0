#pragma once

#include <cmath>
#include <cstdint>

#include "melodist/common.hpp"

namespace melodist {

// Counter-based generator: each draw is a pure function of (seed, counter),
// so the full state serializes to two u64 and the stream does not depend on
// platform RNG internals. The mix is splitmix64 over seed + k*golden.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : seed_(seed), counter_(0) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (++counter_);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in (0, 1]
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    // standard normal via Box-Muller; two counter increments per draw
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) fail("Rng::uniform_int: n must be positive");
        return next_u64() % n;
    }

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }
    void restore(uint64_t seed, uint64_t counter) {
        seed_ = seed;
        counter_ = counter;
    }

private:
    uint64_t seed_;
    uint64_t counter_;
};

}  // namespace melodist
