#pragma once

// Deterministic random number utilities.
//
// All randomness in the library flows through Rng, a thin wrapper around
// std::mt19937_64 with fixed sampling algorithms (not the standard library
// distributions, whose output is implementation-defined). This makes every
// seeded result bit-identical across platforms and compilers.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace enpi {

// SplitMix64 finalizer. Used to derive independent child seeds from a root
// seed, so parallel work items get decorrelated streams without sharing
// generator state.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return mix64(root ^ mix64(stream + 0xD1B54A32D192ED03ull));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller, one value per call (the sine branch is
    // discarded so the draw count per sample is fixed at two).
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Uniform integer in [0, n) by Lemire's multiply-shift with rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("invalid value");
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Binomial as an explicit Bernoulli sum; n is small everywhere we use it.
    int binomial(int n, double p) {
        if (n < 0 || p < 0.0 || p > 1.0) throw std::invalid_argument("invalid value");
        int c = 0;
        for (int i = 0; i < n; ++i)
            if (uniform01() < p) ++c;
        return c;
    }

    // k distinct values from {0, ..., n-1} by partial Fisher-Yates,
    // in draw order.
    std::vector<int> sample_without_replacement(int n, int k) {
        if (k < 0 || n < 0 || k > n) throw std::invalid_argument("invalid value");
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<int> out(k);
        for (int i = 0; i < k; ++i) {
            auto j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[i], pool[j]);
            out[i] = pool[i];
        }
        return out;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace enpi
