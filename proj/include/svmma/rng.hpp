#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace svmma {

// Deterministic random source. mt19937_64 output is pinned by the standard,
// but the standard distribution adaptors are not, so the variate transforms
// live here: fixed-seed runs reproduce bit for bit on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0,1): 53-bit mantissa, never returns 0.
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1p-53;
    }

    // Uniform integer in [0, bound) by rejection on the low bits.
    std::uint64_t uniform_int(std::uint64_t bound) {
        if (bound == 0) return 0;
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        while (true) {
            const std::uint64_t v = engine_() & mask;
            if (v < bound) return v;
        }
    }

    // Standard normal via Box-Muller; generates pairs, caches the second.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Student t with integer dof: Z / sqrt(chi2_nu / nu).
    double student_t(int dof) {
        double chi2 = 0.0;
        for (int k = 0; k < dof; ++k) {
            const double z = normal();
            chi2 += z * z;
        }
        return normal() / std::sqrt(chi2 / dof);
    }

private:
    static constexpr double pi = 3.141592653589793238462643383279502884;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}
