#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hetreg {

/// Stateless seed mixing (splitmix64). Used to derive independent child
/// streams from a master seed so that results do not depend on how many
/// streams exist or on the order in which they are consumed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a child seed from (master, tag, index). Two distinct
/// (tag, index) pairs give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0) {
    return mix_seed(mix_seed(master ^ mix_seed(tag)) ^ mix_seed(index + 1));
}

/// Deterministic random stream. Thin wrapper around mt19937_64 with
/// self-contained samplers, so that draws are reproducible bit-for-bit
/// for a given seed regardless of the standard library in use.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (one value per call).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    /// Standard Cauchy, i.e. Student-t with one degree of freedom.
    double cauchy() {
        return std::tan(3.141592653589793238462643383279502884 *
                        (uniform() - 0.5));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace hetreg
