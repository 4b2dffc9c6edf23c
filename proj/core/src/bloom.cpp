#include "doat/bloom.hpp"

#include "doat/error.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace doat {

GroupId::GroupId(std::string bytes) : bytes_(std::move(bytes)) {
    if (bytes_.empty()) {
        throw std::invalid_argument("group id must be non-empty");
    }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

void BloomParams::validate() const {
    if (m < 8 || m % 8 != 0) {
        throw ConfigError("bloom m must be a positive multiple of 8, got " + std::to_string(m));
    }
    if (k < 1 || k > 16) {
        throw ConfigError("bloom k must be in [1, 16], got " + std::to_string(k));
    }
}

BloomFilter::BloomFilter(BloomParams params) : params_(params) {
    params_.validate();
    bits_.assign(params_.m / 8, 0);
}

BloomFilter::BloomFilter(BloomParams params, std::vector<std::uint8_t> bytes)
    : params_(params), bits_(std::move(bytes)) {
    params_.validate();
    if (bits_.size() != params_.m / 8) {
        throw ConfigError("bloom byte array has " + std::to_string(bits_.size()) + " bytes, expected " +
                          std::to_string(params_.m / 8));
    }
}

namespace {

struct ProbeSeq {
    std::uint64_t h1;
    std::uint64_t h2;

    explicit ProbeSeq(const GroupId& g)
        : h1(fnv1a64(g.bytes())), h2(fnv1a64(g.bytes(), kFnvOffsetBasis ^ kSecondBasisTweak) | 1u) {}

    std::size_t at(std::uint32_t i, std::uint32_t m) const { return static_cast<std::size_t>((h1 + i * h2) % m); }
};

}  // namespace

bool BloomFilter::insert(const GroupId& g) {
    const ProbeSeq seq(g);
    bool changed = false;
    for (std::uint32_t i = 0; i < params_.k; ++i) {
        const std::size_t j = seq.at(i, params_.m);
        const auto mask = static_cast<std::uint8_t>(1u << (j % 8));
        changed |= (bits_[j / 8] & mask) == 0;
        bits_[j / 8] |= mask;
    }
    return changed;
}

bool BloomFilter::contains(const GroupId& g) const {
    const ProbeSeq seq(g);
    for (std::uint32_t i = 0; i < params_.k; ++i) {
        if (!test_bit(seq.at(i, params_.m))) {
            return false;
        }
    }
    return true;
}

BloomFilter& BloomFilter::merge(const BloomFilter& other) {
    if (!(params_ == other.params_)) {
        throw ConfigError("cannot merge bloom filters with different (m, k)");
    }
    // m is a multiple of 8, so whole words cover all but a few bytes.
    const std::size_t n = bits_.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        std::uint64_t a;
        std::uint64_t b;
        std::memcpy(&a, bits_.data() + i, 8);
        std::memcpy(&b, other.bits_.data() + i, 8);
        a |= b;
        std::memcpy(bits_.data() + i, &a, 8);
    }
    for (; i < n; ++i) {
        bits_[i] |= other.bits_[i];
    }
    return *this;
}

std::size_t BloomFilter::popcount() const noexcept {
    std::size_t n = 0;
    for (std::uint8_t b : bits_) {
        n += static_cast<std::size_t>(std::popcount(b));
    }
    return n;
}

bool BloomFilter::empty() const noexcept {
    for (std::uint8_t b : bits_) {
        if (b != 0) {
            return false;
        }
    }
    return true;
}

std::vector<std::size_t> BloomFilter::probes(const GroupId& g, const BloomParams& params) {
    const ProbeSeq seq(g);
    std::vector<std::size_t> out(params.k);
    for (std::uint32_t i = 0; i < params.k; ++i) {
        out[i] = seq.at(i, params.m);
    }
    return out;
}

BloomFilter bloom_insert(BloomFilter f, const GroupId& g) {
    f.insert(g);
    return f;
}

bool bloom_contains(const BloomFilter& f, const GroupId& g) {
    return f.contains(g);
}

BloomFilter bloom_union(std::span<const BloomFilter> filters) {
    if (filters.empty()) {
        throw Error("bloom_union of an empty list");
    }
    BloomFilter out = filters.front();
    for (std::size_t i = 1; i < filters.size(); ++i) {
        out.merge(filters[i]);
    }
    return out;
}

}  // namespace doat
