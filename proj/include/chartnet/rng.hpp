#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace chartnet {

// Deterministic draws on top of mt19937_64. The engine's output sequence is
// fixed by the standard; std::uniform_*_distribution is not, so the mapping
// from raw 64-bit words to values is done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    /// Uniform index in [0, n). Modulo bias is negligible for the sizes used here.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

    /// Standard Cauchy deviate (inverse CDF).
    double cauchy() { return std::tan(3.141592653589793 * (uniform() - 0.5)); }

    /// Fisher-Yates shuffle; element order depends only on the seed.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace chartnet
