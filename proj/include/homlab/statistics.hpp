#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace homlab {

double mean(std::span<const double> x);
/// Unbiased sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> x);
/// sqrt(sample_variance / n).
double standard_error(std::span<const double> x);

struct BootstrapResult {
  double se = 0.0;
  double ci_lo = 0.0;  // 2.5% percentile of resampled means
  double ci_hi = 0.0;  // 97.5%
};

/// Nonparametric bootstrap of the mean with a fixed-seed mt19937_64.
BootstrapResult bootstrap_mean(std::span<const double> x, int resamples = 1000,
                               std::uint64_t seed = 20240611);

/// Least-squares slope of log y against log x over points with x, y > 0.
/// NaN when fewer than two such points exist.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace homlab
