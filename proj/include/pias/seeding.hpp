#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pias {

/// Seed derivation: FNV-1a (64-bit) over a canonical byte encoding of a tuple.
///
/// Each integer field is encoded as the tag byte 'i' followed by its 8 bytes
/// in little-endian order; each string field as the tag byte 's', its length
/// as 8 little-endian bytes, then the raw bytes. The result is therefore
/// independent of platform endianness and of the standard library.
class SeedHasher {
public:
    static constexpr std::uint64_t offset_basis = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t prime = 0x100000001b3ULL;

    SeedHasher &add(std::uint64_t value);
    SeedHasher &add(std::string_view text);
    SeedHasher &add(int value) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(value))); }
    SeedHasher &add(long value) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(value))); }
    SeedHasher &add(const char *text) { return add(std::string_view{text}); }

    std::uint64_t value() const { return state_; }

private:
    void byte(std::uint8_t b) {
        state_ ^= b;
        state_ *= prime;
    }

    std::uint64_t state_ = offset_basis;
};

template <typename... Fields>
std::uint64_t derive_seed(const Fields &...fields) {
    SeedHasher hasher;
    (hasher.add(fields), ...);
    return hasher.value();
}

/// Pseudo-random source with platform-stable distributions.
///
/// std::uniform_real_distribution and std::normal_distribution are
/// implementation-defined, so the conversions are spelled out here to keep
/// every generated number reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via the Marsaglia polar method.
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pias
