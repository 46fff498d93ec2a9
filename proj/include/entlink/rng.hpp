#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace entlink::rng {

/// Mixes one 64-bit word into a seed state (splitmix64 finalizer).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic substream key: master seed folded with a path of integers
/// (stream purpose, pair index, phase index, ...). Independent paths give
/// statistically independent streams regardless of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(master);
    for (std::uint64_t p : path) {
        s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return s;
}

/// Random stream with samplers whose draw sequence is fully specified here,
/// on top of std::mt19937_64 (whose output sequence the standard pins down).
/// Identical seeds therefore give bit-identical tag streams on any platform.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return 1.0 - uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Exponential inter-arrival gap for a Poisson process of the given rate.
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    /// Gaussian with mean 0. Box-Muller, two uniforms per draw.
    double normal(double sigma) {
        double u1 = uniform_pos();
        double u2 = uniform();
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Poisson count. Knuth's product method below mean 12, Hormann's PTRS
    /// transformed rejection above (exact for all means, O(1) per draw).
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 12.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform();
            while (prod > limit) {
                ++k;
                prod *= uniform();
            }
            return k;
        }
        return poisson_ptrs(mean);
    }

private:
    std::uint64_t poisson_ptrs(double mean) {
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::fabs(u);
            double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            double k = kf;
            double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
            double rhs = k * log_mean - mean - std::lgamma(k + 1.0);
            if (lhs <= rhs) return static_cast<std::uint64_t>(kf);
        }
    }

    std::mt19937_64 eng_;
};

} // namespace entlink::rng
