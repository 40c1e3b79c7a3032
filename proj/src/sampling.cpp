#include "pias/sampling.hpp"

#include "pias/seeding.hpp"

#include <array>
#include <bit>

namespace pias::sampling {

namespace {

struct DirectionInit {
    std::uint32_t polynomial;  // including the leading and constant terms
    std::array<std::uint32_t, 7> m;
};

// Joe & Kuo (new-joe-kuo-6.21201), dimensions 2..32. Dimension 1 is van der Corput.
constexpr std::array<DirectionInit, max_sobol_dimension - 1> kDirections = {{
    {3, {1}},
    {7, {1, 3}},
    {11, {1, 3, 1}},
    {13, {1, 1, 1}},
    {19, {1, 1, 3, 3}},
    {25, {1, 3, 5, 13}},
    {37, {1, 1, 5, 5, 17}},
    {41, {1, 1, 5, 5, 5}},
    {47, {1, 1, 7, 11, 19}},
    {55, {1, 1, 5, 1, 1}},
    {59, {1, 1, 1, 3, 11}},
    {61, {1, 3, 5, 5, 31}},
    {67, {1, 3, 3, 9, 7, 49}},
    {91, {1, 1, 1, 15, 21, 21}},
    {97, {1, 3, 1, 13, 27, 49}},
    {103, {1, 1, 1, 15, 7, 5}},
    {109, {1, 3, 1, 15, 13, 25}},
    {115, {1, 1, 5, 5, 19, 61}},
    {131, {1, 3, 7, 11, 23, 15, 103}},
    {137, {1, 3, 7, 13, 13, 15, 69}},
    {143, {1, 1, 3, 13, 7, 35, 63}},
    {145, {1, 3, 5, 9, 1, 25, 53}},
    {157, {1, 3, 1, 13, 9, 35, 107}},
    {167, {1, 3, 1, 5, 27, 61, 31}},
    {171, {1, 1, 5, 11, 19, 41, 61}},
    {185, {1, 3, 5, 3, 3, 13, 69}},
    {191, {1, 1, 7, 13, 1, 19, 1}},
    {193, {1, 3, 7, 5, 13, 19, 59}},
    {203, {1, 1, 3, 9, 25, 29, 41}},
    {211, {1, 3, 5, 13, 23, 1, 55}},
    {213, {1, 3, 7, 3, 13, 59, 17}},
}};

constexpr int kBits = 32;

}  // namespace

std::uint64_t repetition_seed(std::uint64_t master_seed, int repetition_index) {
    return derive_seed("sobol-scramble", master_seed, repetition_index);
}

SobolSequence::SobolSequence(std::size_t dimension, std::uint64_t scramble_seed, bool scramble)
    : dimension_(dimension), directions_(dimension * kBits), masks_(dimension, 0) {
    if (dimension < 1 || dimension > max_sobol_dimension) {
        throw UnsupportedDimension("Sobol sampling supports 1 to 32 dimensions");
    }
    for (int k = 0; k < kBits; ++k) {
        directions_[static_cast<std::size_t>(k)] = std::uint32_t{1} << (kBits - 1 - k);
    }
    for (std::size_t j = 1; j < dimension; ++j) {
        const auto &init = kDirections[j - 1];
        const int degree = std::bit_width(init.polynomial) - 1;
        std::uint32_t *v = &directions_[j * kBits];
        for (int k = 0; k < degree; ++k) {
            v[k] = init.m[static_cast<std::size_t>(k)] << (kBits - 1 - k);
        }
        for (int k = degree; k < kBits; ++k) {
            std::uint32_t value = v[k - degree] ^ (v[k - degree] >> degree);
            for (int b = 1; b < degree; ++b) {
                if ((init.polynomial >> (degree - b)) & 1u) {
                    value ^= v[k - b];
                }
            }
            v[k] = value;
        }
    }
    if (scramble) {
        Rng rng(scramble_seed);
        for (auto &mask : masks_) {
            mask = static_cast<std::uint32_t>(rng.next() >> 32);
        }
    }
}

Point SobolSequence::at(std::uint64_t index) const {
    const std::uint64_t gray = index ^ (index >> 1);
    Point point(dimension_);
    for (std::size_t j = 0; j < dimension_; ++j) {
        std::uint32_t x = masks_[j];
        for (int k = 0; k < kBits; ++k) {
            if ((gray >> k) & 1u) {
                x ^= directions_[j * kBits + static_cast<std::size_t>(k)];
            }
        }
        point[j] = static_cast<double>(x) * 0x1.0p-32;
    }
    return point;
}

std::vector<Point> sobol_points(const SamplePlan &plan) {
    if (plan.count < 1) {
        throw std::invalid_argument("sample size must be at least 1");
    }
    const SobolSequence sequence(plan.dimension, plan.scramble_seed, plan.scramble);
    std::vector<Point> points;
    points.reserve(plan.count);
    for (std::size_t i = 1; i <= plan.count; ++i) {
        points.push_back(sequence.at(i));
    }
    return points;
}

std::vector<Point> scale_to_box(const std::vector<Point> &points, const suites::Bounds &bounds) {
    std::vector<Point> scaled = points;
    for (auto &p : scaled) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] = bounds.lower[j] + p[j] * (bounds.upper[j] - bounds.lower[j]);
        }
    }
    return scaled;
}

}  // namespace pias::sampling
