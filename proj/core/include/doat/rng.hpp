#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace doat {

/// Seedable generator with a fixed, platform-independent output stream.
///
/// The engine is std::mt19937_64, whose output sequence is pinned by the
/// C++ standard. The standard distributions are not (their algorithms are
/// implementation-defined), so all conversions to reals and bounded
/// integers are done here.
class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/53bit-real/lemire-bounded";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform in [0, bound). `bound` must be non-zero.
    std::uint64_t below(std::uint64_t bound) {
        __extension__ using u128 = unsigned __int128;
        // Lemire's nearly-divisionless method.
        u128 m = static_cast<u128>(engine_()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (low < threshold) {
                m = static_cast<u128>(engine_()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Derives an independent stream for a named sub-purpose.
    Rng fork(std::uint64_t salt) const {
        std::uint64_t z = seed_mix(salt);
        return Rng(z);
    }

private:
    std::uint64_t seed_mix(std::uint64_t salt) const {
        // splitmix64 over a copy of the engine's next output and the salt
        std::mt19937_64 copy = engine_;
        std::uint64_t z = copy() ^ (salt + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace doat
