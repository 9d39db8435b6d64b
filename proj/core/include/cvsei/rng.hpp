#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cvsei {

// All randomness in the library flows through this wrapper. The raw stream is
// std::mt19937_64; every derived quantity (uniforms, normals, shuffles) is
// computed here from raw 64-bit draws so runs are reproducible independent of
// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform on [-1, 1).
    double uniform_signed() { return 2.0 * uniform() - 1.0; }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. Two draws per call, no cached spare, so
    // the stream position is a fixed function of the call count.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n), rejection sampled (exact, no modulo bias).
    std::size_t index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // Fisher-Yates with our own index() so the permutation is stable across
    // standard libraries.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent substream seed from a master seed and up to three
// tags (e.g. purpose id, epoch, record index). Documented so external tools
// can reproduce any stream in isolation.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(master ^ 0x243f6a8885a308d3ULL);
    h = splitmix64(h ^ splitmix64(a));
    h = splitmix64(h ^ splitmix64(b));
    h = splitmix64(h ^ splitmix64(c));
    return h;
}

// Substream purpose tags used with derive_seed(master, tag, ...).
namespace stream {
constexpr std::uint64_t profile = 1;
constexpr std::uint64_t payload = 2;
constexpr std::uint64_t burst = 3;
constexpr std::uint64_t model_init = 4;
constexpr std::uint64_t batch = 5;
constexpr std::uint64_t dropout = 6;
constexpr std::uint64_t mining = 7;
constexpr std::uint64_t episode = 8;
constexpr std::uint64_t validation = 9;
}  // namespace stream

}  // namespace cvsei
