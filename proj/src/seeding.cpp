#include "pias/seeding.hpp"

#include <cmath>

namespace pias {

SeedHasher &SeedHasher::add(std::uint64_t value) {
    byte('i');
    for (int shift = 0; shift < 64; shift += 8) {
        byte(static_cast<std::uint8_t>(value >> shift));
    }
    return *this;
}

SeedHasher &SeedHasher::add(std::string_view text) {
    byte('s');
    const auto length = static_cast<std::uint64_t>(text.size());
    for (int shift = 0; shift < 64; shift += 8) {
        byte(static_cast<std::uint8_t>(length >> shift));
    }
    for (const char c : text) {
        byte(static_cast<std::uint8_t>(c));
    }
    return *this;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t draw = engine_();
    while (draw >= limit) {
        draw = engine_();
    }
    return draw % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

}  // namespace pias
