// Seedable RNG with implementation-independent double generation.
#pragma once

#include <cstdint>
#include <random>

#include "hamlens/types.hpp"

namespace hamlens {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1); 53-bit mantissa taken directly from the engine so the
    // stream does not depend on the standard library's distribution internals.
    double unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * unit(); }

    Vec uniform_vec(int n, double a, double b) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = uniform(a, b);
        return v;
    }

    // Nonzero covector sample with entries in [-1,1] and norm bounded below.
    Vec covector(int n) {
        while (true) {
            Vec v = uniform_vec(n, -1.0, 1.0);
            if (v.norm() > 0.3) return v;
        }
    }

    std::uint64_t next_raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace hamlens
