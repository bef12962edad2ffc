#include "pdmp/grid_density.hpp"

#include <algorithm>
#include <cmath>

#include "pdmp/errors.hpp"

namespace pdmp {

void GridDensity::finalize() {
  if (grid.size() != values.size())
    throw PdmpError("GridDensity: grid and values must have equal length");
  if (!grid.empty() && grid.size() < 2)
    throw PdmpError("GridDensity: need at least two grid nodes");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw PdmpError("GridDensity: grid must be increasing");

  cum_.assign(grid.size(), 0.0);
  for (size_t i = 1; i < grid.size(); ++i)
    cum_[i] = cum_[i - 1] + 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);

  double total = continuous_mass();
  for (const auto& a : atoms) total += a.mass;
  normalization_error = std::abs(1.0 - total);
  finalized_ = true;
}

void GridDensity::normalize() {
  if (!finalized_) finalize();
  double total = continuous_mass();
  for (const auto& a : atoms) total += a.mass;
  if (!(total > 0)) throw PdmpError("GridDensity: cannot normalize zero mass");
  const double s = 1.0 / total;
  for (auto& v : values) v *= s;
  for (auto& c : cum_) c *= s;
  for (auto& a : atoms) a.mass *= s;
  sigma_gamma *= s;
}

double GridDensity::interp_pdf(double x) const {
  if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  if (it == grid.begin()) return values.front();
  if (it == grid.end()) return values.back();
  const size_t i = static_cast<size_t>(it - grid.begin());
  const double w = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
  return values[i - 1] + w * (values[i] - values[i - 1]);
}

double GridDensity::pdf(double x) const { return exact_pdf ? exact_pdf(x) : interp_pdf(x); }

double GridDensity::grid_cdf(double x) const {
  if (!finalized_) throw PdmpError("GridDensity: finalize() before cdf queries");
  double c = 0.0;
  if (!grid.empty()) {
    if (x >= grid.back()) {
      c = cum_.back();
    } else if (x > grid.front()) {
      const auto it = std::upper_bound(grid.begin(), grid.end(), x);
      const size_t i = static_cast<size_t>(it - grid.begin());
      const double vx = interp_pdf(x);
      c = cum_[i - 1] + 0.5 * (values[i - 1] + vx) * (x - grid[i - 1]);
    }
  }
  for (const auto& a : atoms)
    if (a.x <= x) c += a.mass;
  return c;
}

double GridDensity::cdf(double x) const { return exact_cdf ? exact_cdf(x) : grid_cdf(x); }

double GridDensity::quantile(double u) const {
  if (exact_quantile) {
    // Endpoints map to the window edges so callers can form closed covers of
    // the window; analytic quantiles may diverge (or throw) at u = 1.
    if (u <= 0) return window_lo;
    if (u >= 1) return window_hi;
    return std::clamp(exact_quantile(u), window_lo, window_hi);
  }
  u = std::clamp(u, 1e-15, 1.0 - 1e-15);
  for (const auto& a : atoms) {
    const double f_below = cdf(a.x) - a.mass;
    if (u > f_below && u <= f_below + a.mass + 1e-15) return a.x;
  }
  double lo = window_lo, hi = window_hi;
  if (!grid.empty()) {
    lo = std::min(lo, grid.front());
    hi = std::max(hi, grid.back());
  }
  if (cdf(lo) >= u) return lo;
  if (cdf(hi) <= u) return hi;
  return bisect_root([&](double x) { return cdf(x) - u; }, lo, hi, 1e-12 * (1.0 + hi - lo));
}

double GridDensity::sample(RngStream& rng) const { return quantile(rng.uniform01()); }

double GridDensity::atom_mass(double x) const {
  for (const auto& a : atoms)
    if (a.x == x) return a.mass;
  return 0.0;
}

double GridDensity::continuous_mass() const { return cum_.empty() ? 0.0 : cum_.back(); }

GridDensity mirror_density(const GridDensity& g) {
  GridDensity m;
  m.grid.reserve(g.grid.size());
  m.values.reserve(g.values.size());
  for (size_t i = g.grid.size(); i-- > 0;) {
    m.grid.push_back(-g.grid[i]);
    m.values.push_back(g.values[i]);
  }
  for (const auto& a : g.atoms) m.atoms.push_back({-a.x, a.mass});
  m.sigma_gamma = g.sigma_gamma;
  m.window_lo = -g.window_hi;
  m.window_hi = -g.window_lo;
  m.truncated_mass = g.truncated_mass;
  if (g.exact_pdf) m.exact_pdf = [f = g.exact_pdf](double x) { return f(-x); };
  m.finalize();
  return m;
}

}  // namespace pdmp
