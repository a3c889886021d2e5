#pragma once

// Small descriptive statistics shared by the detectors.

#include <span>
#include <vector>

namespace stagelens::stats {

/// Arithmetic mean; NaN for an empty input.
double mean(std::span<const double> values) noexcept;

/// Median (average of the two middle values for even sizes); NaN when empty.
double median(std::span<const double> values);

/// Population variance / standard deviation (divide by n); NaN when empty.
double variance(std::span<const double> values) noexcept;
double stddev(std::span<const double> values) noexcept;

}  // namespace stagelens::stats
