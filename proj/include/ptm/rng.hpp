#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ptm {

/// Seedable 64-bit generator with portable derived draws.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not, so uniform and categorical draws are derived here
/// directly from the raw 64-bit words.
class rng {
  public:
    explicit rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint32_t below(std::uint32_t n) {
        // Lemire's multiply-shift with rejection; unbiased.
        std::uint64_t x = engine_() >> 32;
        std::uint64_t m = x * n;
        auto low = static_cast<std::uint32_t>(m);
        if (low < n) {
            const std::uint32_t threshold = static_cast<std::uint32_t>(-n) % n;
            while (low < threshold) {
                x = engine_() >> 32;
                m = x * n;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    bool bernoulli(double p) {
        if (p >= 1.0) return true;
        if (p <= 0.0) return false;
        return uniform() < p;
    }

    /// Inverse-CDF draw from non-negative weights with the given total.
    std::size_t categorical(std::span<const double> weights, double total) {
        const double target = uniform() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last_positive = i;
            if (target < acc) return i;
        }
        // Rounding can leave target == acc at the top end.
        return last_positive;
    }

    const std::mt19937_64& engine() const { return engine_; }

    friend bool operator==(const rng&, const rng&) = default;

  private:
    std::mt19937_64 engine_;
};

} // namespace ptm
