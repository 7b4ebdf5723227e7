#pragma once

#include <cmath>
#include <cstdint>

namespace tomomip {

/**
 * Counter-based pseudo-random generator.
 *
 * Each (seed, stream) pair addresses an independent sequence, and the value
 * at any position depends only on (seed, stream, counter). This makes draws
 * reproducible regardless of how work is split across threads: give each
 * logical unit (sinogram bin, training epoch, ...) its own stream and the
 * serial and parallel runs agree bit for bit.
 */
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

    std::uint64_t next_u64() {
        return mix(base_ + 0x9e3779b97f4a7c15ULL * (++counter_));
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double next_double_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (consumes two uniforms per call).
    double normal() {
        double u1 = next_double_pos();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Poisson draw with mean lambda >= 0.
    std::uint64_t poisson(double lambda) {
        if (lambda <= 0.0)
            return 0;
        if (lambda < 30.0)
            return poisson_knuth(lambda);
        return poisson_ptrs(lambda);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    // Product-of-uniforms inversion; exact for small means.
    std::uint64_t poisson_knuth(double lambda) {
        double limit = std::exp(-lambda);
        double prod = 1.0;
        std::uint64_t k = 0;
        do {
            prod *= next_double_pos();
            ++k;
        } while (prod > limit);
        return k - 1;
    }

    // Hoermann's transformed rejection (PTRS), valid for lambda >= 10.
    std::uint64_t poisson_ptrs(double lambda) {
        const double log_lambda = std::log(lambda);
        const double b = 0.931 + 2.53 * std::sqrt(lambda);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = next_double() - 0.5;
            double v = next_double_pos();
            double us = 0.5 - std::abs(u);
            double kd = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= v_r && kd >= 0.0)
                return static_cast<std::uint64_t>(kd);
            if (kd < 0.0 || (us < 0.013 && v > us))
                continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kd * log_lambda - lambda - std::lgamma(kd + 1.0))
                return static_cast<std::uint64_t>(kd);
        }
    }

    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

/// FNV-1a 64-bit hash, used for operator cache keys and manifest digests.
inline std::uint64_t fnv1a64(const void* data, std::size_t length,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < length; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace tomomip
