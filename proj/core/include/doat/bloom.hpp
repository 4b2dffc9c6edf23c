#pragma once

// Fixed-size Bloom filters over anycast group identifiers.
//
// Probe j of k is (h1 + j*h2) mod m, where h1 and h2 are 64-bit FNV-1a
// digests of the group bytes: h1 with the standard offset basis, h2 with the
// basis XOR kSecondBasisTweak and forced odd. Bit j of the array is stored
// in byte j/8 at position j%8 (LSB first). Both rules are part of the wire
// format and must not change.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace doat {

class GroupId {
public:
    /// Throws std::invalid_argument when `bytes` is empty.
    explicit GroupId(std::string bytes);

    const std::string& bytes() const noexcept { return bytes_; }

    friend auto operator<=>(const GroupId&, const GroupId&) = default;

private:
    std::string bytes_;
};

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ULL;
inline constexpr std::uint64_t kSecondBasisTweak = 0x9e3779b97f4a7c15ULL;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = kFnvOffsetBasis) noexcept;

struct BloomParams {
    std::uint32_t m = 1024;
    std::uint32_t k = 7;

    /// Throws ConfigError unless m >= 8, m % 8 == 0 and 1 <= k <= 16.
    void validate() const;

    friend bool operator==(const BloomParams&, const BloomParams&) = default;
};

class BloomFilter {
public:
    explicit BloomFilter(BloomParams params = {});
    /// Reconstructs a serialized filter; `bytes` must hold exactly m/8 bytes.
    BloomFilter(BloomParams params, std::vector<std::uint8_t> bytes);

    const BloomParams& params() const noexcept { return params_; }
    std::span<const std::uint8_t> bytes() const noexcept { return bits_; }

    /// Returns true when at least one bit changed.
    bool insert(const GroupId& g);
    bool contains(const GroupId& g) const;

    /// Bitwise OR in place. Throws ConfigError on parameter mismatch.
    BloomFilter& merge(const BloomFilter& other);

    bool test_bit(std::size_t j) const { return (bits_[j / 8] >> (j % 8)) & 1u; }
    std::size_t popcount() const noexcept;
    bool empty() const noexcept;
    double fill_ratio() const noexcept { return static_cast<double>(popcount()) / params_.m; }

    /// Probe positions for `g` under `params`, in probe order.
    static std::vector<std::size_t> probes(const GroupId& g, const BloomParams& params);

    friend bool operator==(const BloomFilter&, const BloomFilter&) = default;

private:
    BloomParams params_;
    std::vector<std::uint8_t> bits_;
};

BloomFilter bloom_insert(BloomFilter f, const GroupId& g);
bool bloom_contains(const BloomFilter& f, const GroupId& g);
/// OR of all inputs. Throws on an empty list or mismatched parameters.
BloomFilter bloom_union(std::span<const BloomFilter> filters);

}  // namespace doat
