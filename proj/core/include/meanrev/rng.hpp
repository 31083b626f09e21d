#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace meanrev {

// Seeded random source with a pinned normal transform. std::mt19937_64 is
// specified bit-for-bit by the standard, but std::normal_distribution is
// not, so panels generated through this class are reproducible across
// standard library versions, which the backtest determinism guarantees rely
// on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; draws two uniforms per pair and caches
    // the second deviate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace meanrev
