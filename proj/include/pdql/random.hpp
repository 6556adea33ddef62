#pragma once

#include <cstdint>
#include <random>

namespace pdql {

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
    return mix_seed(mix_seed(base) ^ mix_seed(tag + 0x632be59bd9b4e019ULL));
}

/// Seeded random stream. One per worker; never shared across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Lemire's multiply-shift with rejection for exact uniformity.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = -n % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t binomial(std::uint64_t trials, double p) {
        if (trials == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return trials;
        std::binomial_distribution<std::uint64_t> dist(trials, p);
        return dist(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace pdql
