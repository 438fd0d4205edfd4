#pragma once

#include <cstdint>
#include <random>

namespace stbd {

// Single RNG type used everywhere so chains are reproducible from one seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    double normal() {
        // fresh distribution per call: no cached spare, draws depend only on
        // the engine state
        return std::normal_distribution<double>(0.0, 1.0)(gen_);
    }

    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(gen_);
    }

    // IG(shape, scale) with density proportional to x^{-shape-1} exp(-scale/x)
    double inverse_gamma(double shape, double scale) {
        return scale != 0.0 ? 1.0 / gamma(shape, 1.0 / scale) : 0.0;
    }

    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        return std::poisson_distribution<int>(mean)(gen_);
    }

    std::uint64_t next_u64() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Stream seed for one subset chain; splitmix64-style mix of (master, index)
// so subsets get independent streams regardless of how workers are scheduled.
inline std::uint64_t subset_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace stbd
