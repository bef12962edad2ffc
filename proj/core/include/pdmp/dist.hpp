#pragma once

#include <functional>
#include <limits>
#include <string>

#include "pdmp/rng.hpp"

namespace pdmp {

enum class DistFamily { exponential, uniform, weibull, gamma, other };

/// Value-type probability distribution on an interval of the real line.
/// Used for lifetime laws, service laws, and state-independent jump laws.
/// `sf` and `quantile_tail` are numerically stable deep in the tail, which
/// hazards and hazard inversion rely on. Sampling is inverse-transform (one
/// uniform per draw) so trajectories are reproducible bit-for-bit.
struct Dist {
  std::string name;  // e.g. "exponential(rate=1)"
  DistFamily family = DistFamily::other;
  double param1 = 0.0, param2 = 0.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double mean = std::numeric_limits<double>::quiet_NaN();
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(double)> sf;             // 1 - cdf, stable
  std::function<double(double)> quantile;       // u -> x with cdf(x) = u
  std::function<double(double)> quantile_tail;  // q -> x with sf(x) = q

  double sample(RngStream& rng) const { return quantile(rng.uniform01()); }
};

Dist exponential_dist(double rate);
Dist uniform_dist(double lo, double hi);
Dist weibull_dist(double shape, double scale);
Dist gamma_dist(double shape, double scale);

}  // namespace pdmp
