#pragma once

#include <functional>
#include <vector>

namespace pdmp {

/// One-sample Kolmogorov-Smirnov statistic against a reference cdf that may
/// carry point masses. `point_mass(x)` returns the mass exactly at x (null:
/// continuous law). Samples need not be sorted.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf,
                    const std::function<double(double)>& point_mass = nullptr);

/// Critical KS value at significance alpha (Stephens' small-sample form).
double ks_critical(double alpha, std::size_t n);

/// Standard normal quantile.
double normal_quantile(double p);

struct Interval {
  double lo, hi;
};

/// Exact (Garwood) confidence interval for a Poisson rate given `count`
/// events over `exposure`, at the given two-sided confidence level.
Interval poisson_rate_ci(long long count, double exposure, double level);

}  // namespace pdmp
