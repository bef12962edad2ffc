#include "pdmp/dist.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/weibull.hpp>
#include <cmath>
#include <stdexcept>

namespace pdmp {

Dist exponential_dist(double rate) {
  if (!(rate > 0)) throw std::invalid_argument("exponential_dist: rate must be > 0");
  Dist d;
  d.name = "exponential(rate=" + std::to_string(rate) + ")";
  d.family = DistFamily::exponential;
  d.param1 = rate;
  d.lo = 0.0;
  d.mean = 1.0 / rate;
  d.pdf = [rate](double x) { return x < 0 ? 0.0 : rate * std::exp(-rate * x); };
  d.cdf = [rate](double x) { return x < 0 ? 0.0 : -std::expm1(-rate * x); };
  d.sf = [rate](double x) { return x < 0 ? 1.0 : std::exp(-rate * x); };
  d.quantile = [rate](double u) { return -std::log1p(-u) / rate; };
  d.quantile_tail = [rate](double q) { return -std::log(q) / rate; };
  return d;
}

Dist uniform_dist(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("uniform_dist: requires lo < hi");
  Dist d;
  d.name = "uniform(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
  d.family = DistFamily::uniform;
  d.param1 = lo;
  d.param2 = hi;
  d.lo = lo;
  d.hi = hi;
  d.mean = 0.5 * (lo + hi);
  const double w = hi - lo;
  d.pdf = [lo, hi, w](double x) { return (x < lo || x > hi) ? 0.0 : 1.0 / w; };
  d.cdf = [lo, hi, w](double x) {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    return (x - lo) / w;
  };
  d.sf = [d](double x) { return 1.0 - d.cdf(x); };
  d.quantile = [lo, w](double u) { return lo + u * w; };
  d.quantile_tail = [hi, w](double q) { return hi - q * w; };
  return d;
}

Dist weibull_dist(double shape, double scale) {
  if (!(shape > 0) || !(scale > 0))
    throw std::invalid_argument("weibull_dist: shape and scale must be > 0");
  boost::math::weibull_distribution<double> w(shape, scale);
  Dist d;
  d.name = "weibull(shape=" + std::to_string(shape) + ",scale=" + std::to_string(scale) + ")";
  d.family = DistFamily::weibull;
  d.param1 = shape;
  d.param2 = scale;
  d.lo = 0.0;
  d.mean = boost::math::mean(w);
  d.pdf = [w](double x) { return x < 0 ? 0.0 : boost::math::pdf(w, x); };
  d.cdf = [w](double x) { return x < 0 ? 0.0 : boost::math::cdf(w, x); };
  d.sf = [shape, scale](double x) {
    return x < 0 ? 1.0 : std::exp(-std::pow(x / scale, shape));
  };
  d.quantile = [w](double u) { return boost::math::quantile(w, u); };
  d.quantile_tail = [w](double q) { return boost::math::quantile(boost::math::complement(w, q)); };
  return d;
}

Dist gamma_dist(double shape, double scale) {
  if (!(shape > 0) || !(scale > 0))
    throw std::invalid_argument("gamma_dist: shape and scale must be > 0");
  boost::math::gamma_distribution<double> g(shape, scale);
  Dist d;
  d.name = "gamma(shape=" + std::to_string(shape) + ",scale=" + std::to_string(scale) + ")";
  d.family = DistFamily::gamma;
  d.param1 = shape;
  d.param2 = scale;
  d.lo = 0.0;
  d.mean = boost::math::mean(g);
  d.pdf = [g](double x) { return x < 0 ? 0.0 : boost::math::pdf(g, x); };
  d.cdf = [g](double x) { return x < 0 ? 0.0 : boost::math::cdf(g, x); };
  d.sf = [g](double x) { return x < 0 ? 1.0 : boost::math::cdf(boost::math::complement(g, x)); };
  d.quantile = [g](double u) { return boost::math::quantile(g, u); };
  d.quantile_tail = [g](double q) { return boost::math::quantile(boost::math::complement(g, q)); };
  return d;
}

}  // namespace pdmp
