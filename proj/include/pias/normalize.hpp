#pragma once

namespace pias::perf {

inline constexpr double attainment_upper_error = 1e2;
inline constexpr double attainment_lower_error = 1e-8;

/// Log-precision attainment: 0 at error 1e2 or worse, 1 at 1e-8 or better,
/// linear in log10(error) in between. Throws for negative or NaN errors.
double attainment_score(double error);

/// Maps a run score (error for known-optimum suites, raw value otherwise) to [0, 1].
class Normalizer {
public:
    static Normalizer attainment();
    /// Per-instance min-max normalizer; degenerate when v_max <= v_min.
    static Normalizer extrema(double v_min, double v_max);

    double operator()(double score) const;

    bool is_attainment() const { return attainment_; }
    bool degenerate() const { return !attainment_ && !(v_max_ > v_min_); }
    double v_min() const { return v_min_; }
    double v_max() const { return v_max_; }

private:
    bool attainment_ = true;
    double v_min_ = 0.0;
    double v_max_ = 0.0;
};

}  // namespace pias::perf
