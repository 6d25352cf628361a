#pragma once

#include <cmath>
#include <cstdint>

namespace oorp {

// Small counter-based PRNG (splitmix64). We roll our own so that a run is
// reproducible from its seed regardless of standard-library version.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Knuth's product method; fine for the small rates used here.
    int next_poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_double();
        } while (p > limit);
        return k - 1;
    }

    // Derives an independent stream for a sub-entity (node, commodity, ...).
    static uint64_t mix(uint64_t seed, uint64_t a, uint64_t b = 0) {
        Rng r(seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xda942042e4dd58b5ULL));
        return r.next_u64();
    }

private:
    uint64_t state_;
};

} // namespace oorp
