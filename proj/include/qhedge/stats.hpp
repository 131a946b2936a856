#pragma once

#include <cmath>
#include <span>

namespace qhedge {

struct MeanEstimate {
    double mean = 0;
    double std_error = 0;
};

/// Sample mean and its standard error (unbiased sample variance), summed in index order.
inline MeanEstimate mean_estimate(std::span<const double> xs) {
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return {};
    double sum = 0;
    for (double x : xs) sum += x;
    const double mean = sum / n;
    if (xs.size() < 2) return {mean, 0};
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace qhedge
