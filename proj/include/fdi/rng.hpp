#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fdi {

/// Deterministic RNG: draws come straight off the mt19937_64 stream
/// (uniform by bit-shift, gaussian by Box-Muller) so sequences do not
/// depend on standard-library distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return spare_ * sigma;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2) * sigma;
    }

    std::uint64_t raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace fdi
