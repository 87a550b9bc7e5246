#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rodd/errors.hpp"

namespace rodd {

/// Fraction removed from EACH tail before averaging. 0.125 keeps 75% of the
/// data (S75), 0.05 keeps 90% (S90), 0.20 keeps 60% (S60).
struct TrimSpec {
    double trim_fraction = 0.125;

    void validate() const {
        if (!(trim_fraction >= 0.0 && trim_fraction <= 0.5))
            throw ConfigError("trim_fraction must lie in [0, 0.5], got " +
                              std::to_string(trim_fraction));
    }
};

inline double median_of_sorted(std::span<const double> sorted) {
    const std::size_t m = sorted.size();
    if (m == 0) throw EmptyInput("median of empty input");
    if (m % 2 == 1) return sorted[m / 2];
    return 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
}

inline double median(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("median of empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return median_of_sorted(sorted);
}

/// Sorts, drops floor(trim_fraction * m) elements from each tail, and
/// averages the rest. If trimming would drop everything, falls back to the
/// median so tiny views still yield an estimate.
inline double trimmed_mean(std::span<const double> values, const TrimSpec& spec) {
    spec.validate();
    const std::size_t m = values.size();
    if (m == 0) throw EmptyInput("trimmed mean of empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(std::floor(spec.trim_fraction * static_cast<double>(m)));
    if (2 * cut >= m) return median_of_sorted(sorted);
    double sum = 0.0;
    for (std::size_t i = cut; i < m - cut; ++i) sum += sorted[i];
    return sum / static_cast<double>(m - 2 * cut);
}

/// Quantile by linear interpolation between order statistics
/// (position f*(m-1), the numpy/R type-7 rule).
inline double quantile_of_sorted(std::span<const double> sorted, double f) {
    const std::size_t m = sorted.size();
    if (m == 0) throw EmptyInput("quantile of empty input");
    if (m == 1) return sorted[0];
    const double pos = f * static_cast<double>(m - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double interquartile_range_of_sorted(std::span<const double> sorted) {
    return quantile_of_sorted(sorted, 0.75) - quantile_of_sorted(sorted, 0.25);
}

inline double mean(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("mean of empty input");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

/// Population standard deviation (divides by m, not m-1).
inline double population_stddev(std::span<const double> values) {
    const double mu = mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

/// Half-away-from-zero rounding of an integer ratio, done in integer
/// arithmetic so results are bit-exact across platforms.
inline std::int64_t round_half_away(std::int64_t numerator, std::int64_t denominator) {
    const std::int64_t n = numerator < 0 ? -numerator : numerator;
    const std::int64_t q = (2 * n + denominator) / (2 * denominator);
    return numerator < 0 ? -q : q;
}

/// Half-away-from-zero rounding of a real (std::round semantics), as a
/// 64-bit integer.
inline std::int64_t round_half_away(double x) {
    return static_cast<std::int64_t>(std::llround(x));
}

}  // namespace rodd
