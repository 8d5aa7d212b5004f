#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ftlab {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Deterministic seeded generator with named derived streams. Distributions
// are implemented by hand (not via <random> adapters, whose output is
// implementation-defined) so that draws are reproducible everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : base_(seed), gen_(seed) {}

    // Independent stream derived from this stream's base seed. Derivation
    // depends only on (base seed, tag), never on how much has been drawn.
    Rng derive(std::string_view tag) const { return Rng(derive_seed(tag)); }

    uint64_t derive_seed(std::string_view tag) const {
        return splitmix64(base_ ^ (fnv1a64(tag) * 0x9E3779B97F4A7C15ull));
    }

    uint64_t base_seed() const { return base_; }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller with a cached spare.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double next_normal(double mean, double sigma) { return mean + sigma * next_normal(); }

    // Uniform in [0, bound), rejection-sampled to remove modulo bias.
    uint32_t next_below(uint32_t bound) {
        if (bound <= 1) return 0;
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
        uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return static_cast<uint32_t>(r % bound);
    }

    bool next_bernoulli(double p_true) { return next_double() < p_true; }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = next_below(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t base_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ftlab
