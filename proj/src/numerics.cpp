#include "geoctrl/numerics.hpp"

#include "geoctrl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace geoctrl {

TimeGrid TimeGrid::covering(double start, double span, double max_spacing) {
    if (!(max_spacing > 0.0) || span < 0.0) {
        throw PreconditionError("time grid needs a positive spacing and non-negative span");
    }
    const auto intervals =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(span / max_spacing - 1e-9)));
    return {start, span / static_cast<double>(intervals), intervals};
}

double simpson(std::span<const double> f, double h) {
    const std::size_t intervals = f.empty() ? 0 : f.size() - 1;
    if (intervals == 0) {
        return 0.0;
    }
    if (intervals == 1) {
        return 0.5 * h * (f[0] + f[1]);
    }
    std::size_t even = intervals % 2 == 0 ? intervals : intervals - 3;
    double acc = 0.0;
    for (std::size_t i = 0; i + 2 <= even; i += 2) {
        acc += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
    }
    if (even != intervals) {
        const std::size_t i = even;
        acc += 3.0 * h / 8.0 * (f[i] + 3.0 * f[i + 1] + 3.0 * f[i + 2] + f[i + 3]);
    }
    return acc;
}

std::vector<double> cumulative_integral(std::span<const double> f, double h) {
    std::vector<double> out(f.size(), 0.0);
    if (f.size() < 2) {
        return out;
    }
    if (f.size() == 2) {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    // Quadratic through the first three nodes, integrated over [t0, t1].
    out[1] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
    for (std::size_t i = 2; i < f.size(); ++i) {
        if (i % 2 == 0) {
            out[i] = out[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
        } else {
            out[i] = out[i - 3] + 3.0 * h / 8.0 * (f[i - 3] + 3.0 * f[i - 2] + 3.0 * f[i - 1] + f[i]);
        }
    }
    return out;
}

double interpolate(const TimeGrid& grid, std::span<const double> values, double t) {
    const double pos = (t - grid.start) / grid.spacing;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < 1e-9 && nearest >= 0.0 &&
        nearest <= static_cast<double>(grid.intervals)) {
        return values[static_cast<std::size_t>(nearest)];
    }
    if (values.size() < 4) {
        throw PreconditionError("cubic interpolation needs at least four samples");
    }
    auto first = static_cast<long>(std::floor(pos)) - 1;
    first = std::clamp<long>(first, 0, static_cast<long>(values.size()) - 4);
    double acc = 0.0;
    for (long i = first; i < first + 4; ++i) {
        double weight = 1.0;
        for (long j = first; j < first + 4; ++j) {
            if (j != i) {
                weight *= (pos - static_cast<double>(j)) / static_cast<double>(i - j);
            }
        }
        acc += weight * values[static_cast<std::size_t>(i)];
    }
    return acc;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw PreconditionError("slope fit needs at least two matching samples");
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace geoctrl
