#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace geoctrl {

/// Uniform grid t_i = start + i * spacing, i = 0..intervals.
struct TimeGrid {
    double start = 0.0;
    double spacing = 0.0;
    std::size_t intervals = 0;

    std::size_t size() const { return intervals + 1; }
    double time(std::size_t i) const { return start + static_cast<double>(i) * spacing; }
    double end() const { return time(intervals); }

    /// Grid over [start, start + span] with spacing <= max_spacing.
    static TimeGrid covering(double start, double span, double max_spacing);
};

/// Composite Simpson rule over uniformly spaced samples. An odd number of
/// intervals closes with the Simpson 3/8 rule on the last three.
double simpson(std::span<const double> values, double spacing);

/// Running integral from the first node to every node, fourth-order
/// accurate at each node (Simpson pairs, a 3/8 panel for odd indices, and a
/// quadratic start-up formula for the first interval).
std::vector<double> cumulative_integral(std::span<const double> values, double spacing);

/// Cubic Lagrange interpolation of grid samples; exact at the nodes.
double interpolate(const TimeGrid& grid, std::span<const double> values, double t);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace geoctrl
