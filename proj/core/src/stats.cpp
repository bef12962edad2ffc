#include "pdmp/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>

namespace pdmp {

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf,
                    const std::function<double(double)>& point_mass) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    const double fx = cdf(x);
    const double fx_left = point_mass ? fx - point_mass(x) : fx;
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - fx);
    d = std::max(d, fx_left - static_cast<double>(i) / n);
  }
  return d;
}

double ks_critical(double alpha, std::size_t n) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double rn = std::sqrt(static_cast<double>(n));
  return c / (rn + 0.12 + 0.11 / rn);
}

double normal_quantile(double p) {
  boost::math::normal_distribution<double> nd(0.0, 1.0);
  return boost::math::quantile(nd, p);
}

Interval poisson_rate_ci(long long count, double exposure, double level) {
  if (count < 0 || !(exposure > 0))
    throw std::invalid_argument("poisson_rate_ci: bad count or exposure");
  const double alpha = 1.0 - level;
  double lo = 0.0;
  if (count > 0) {
    boost::math::gamma_distribution<double> g_lo(static_cast<double>(count), 1.0);
    lo = boost::math::quantile(g_lo, alpha / 2.0);
  }
  boost::math::gamma_distribution<double> g_hi(static_cast<double>(count) + 1.0, 1.0);
  const double hi = boost::math::quantile(g_hi, 1.0 - alpha / 2.0);
  return {lo / exposure, hi / exposure};
}

}  // namespace pdmp
