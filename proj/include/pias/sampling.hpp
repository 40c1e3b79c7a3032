#pragma once

#include "pias/suites.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pias::sampling {

using Point = std::vector<double>;

inline constexpr std::size_t max_sobol_dimension = 32;

class UnsupportedDimension : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SamplePlan {
    std::size_t dimension = 1;
    std::size_t count = 1;
    int repetition_index = 0;
    std::uint64_t scramble_seed = 0;
    bool scramble = true;
};

/// Scramble seed for repetition `repetition_index` of one feature sample.
std::uint64_t repetition_seed(std::uint64_t master_seed, int repetition_index);

/// Gray-code Sobol generator over Joe-Kuo direction numbers with an optional
/// digital (XOR) shift. Index 0 is the all-zeros point before scrambling.
class SobolSequence {
public:
    explicit SobolSequence(std::size_t dimension, std::uint64_t scramble_seed = 0, bool scramble = false);

    std::size_t dimension() const { return dimension_; }

    /// Point with sequence index `index` (< 2^32).
    Point at(std::uint64_t index) const;

private:
    std::size_t dimension_;
    std::vector<std::uint32_t> directions_;  // dimension x 32, row-major
    std::vector<std::uint32_t> masks_;
};

/// `plan.count` points in [0,1)^d: indices 1..count, skipping the origin.
std::vector<Point> sobol_points(const SamplePlan &plan);

/// Affine map of unit-cube points into the box.
std::vector<Point> scale_to_box(const std::vector<Point> &points, const suites::Bounds &bounds);

}  // namespace pias::sampling
