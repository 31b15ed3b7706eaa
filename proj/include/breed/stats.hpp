#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "breed/types.hpp"

namespace breed {

struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
    const double mu = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

// Spread of the five temperatures of one input vector, in Kelvin.
inline double param_deviation(const SimParams& p) {
    return population_std(std::span<const double>(p.temps.data(), p.temps.size()));
}

// Sample Pearson correlation. Throws DegenerateInput on constant series
// or mismatched/short input.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw DegenerateInput("pearson: need two equal-length series of size >= 2");
    const double mx = mean_of(xs);
    const double my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DegenerateInput("pearson: constant series");
    return sxy / std::sqrt(sxx * syy);
}

// Trailing moving average: position i averages the last min(w, i+1) values,
// so the output has the same length as the input.
inline std::vector<double> moving_average(std::span<const double> series, std::size_t w) {
    if (w < 1) throw std::invalid_argument("moving_average: window must be >= 1");
    std::vector<double> out(series.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i >= w) acc -= series[i - w];
        out[i] = acc / static_cast<double>(std::min(w, i + 1));
    }
    return out;
}

}  // namespace breed
