#include "pdmp/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace pdmp {
namespace {

struct SimpsonPanel {
  double a, b, fa, fm, fb, estimate;
};

double simpson(double a, double fa, double fm, double fb, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const RealFn& f, const SimpsonPanel& p, double tol, int depth, int max_depth) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(p.a, p.fa, flm, p.fm, m);
  const double right = simpson(m, p.fm, frm, p.fb, p.b);
  const double err = left + right - p.estimate;
  if (depth >= max_depth || std::abs(err) <= 15.0 * tol) {
    // Richardson correction, one order beyond plain Simpson.
    return left + right + err / 15.0;
  }
  const SimpsonPanel pl{p.a, m, p.fa, flm, p.fm, left};
  const SimpsonPanel pr{m, p.b, p.fm, frm, p.fb, right};
  return adaptive(f, pl, 0.5 * tol, depth + 1, max_depth) +
         adaptive(f, pr, 0.5 * tol, depth + 1, max_depth);
}

}  // namespace

double integrate(const RealFn& f, double a, double b, const QuadOptions& opt) {
  if (a == b) return 0.0;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  // Seed the recursion with a uniform composite pass: a single whole-interval
  // Simpson estimate can sample straight past a localized bump and accept ~0
  // (the acceptance test compares two estimates that both missed it).
  constexpr int kSeedPanels = 8;
  SimpsonPanel panels[kSeedPanels];
  const double h = (b - a) / kSeedPanels;
  double rough = 0.0;
  double fl = f(a);
  for (int k = 0; k < kSeedPanels; ++k) {
    const double pa = a + k * h;
    const double pb = k + 1 == kSeedPanels ? b : pa + h;
    const double pm = 0.5 * (pa + pb);
    const double fm = f(pm);
    const double fr = f(pb);
    panels[k] = {pa, pb, fl, fm, fr, simpson(pa, fl, fm, fr, pb)};
    rough += panels[k].estimate;
    fl = fr;
  }
  const double tol = std::max(opt.abs_tol, opt.rel_tol * std::abs(rough)) / kSeedPanels;
  double total = 0.0;
  for (const SimpsonPanel& p : panels) total += adaptive(f, p, tol, 0, opt.max_depth);
  return sign * total;
}

double integrate_to_inf(const RealFn& f, double a, const QuadOptions& opt) {
  double total = 0.0;
  double lo = a;
  double width = 1.0;
  int quiet_panels = 0;
  for (int k = 0; k < 64; ++k) {
    const double hi = lo + width;
    const double part = integrate(f, lo, hi, opt);
    total += part;
    if (std::abs(part) < std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
      if (++quiet_panels >= 2) return total;
    } else {
      quiet_panels = 0;
    }
    lo = hi;
    width *= 2.0;
  }
  return total;
}

std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
  const std::size_t n = grid.size();
  if (n < 2) throw std::invalid_argument("trapezoid_weights: need at least 2 nodes");
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    if (!(h > 0)) throw std::invalid_argument("trapezoid_weights: grid must be increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

double trapezoid(const std::vector<double>& grid, const std::vector<double>& values) {
  if (grid.size() != values.size())
    throw std::invalid_argument("trapezoid: grid/value size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    total += 0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]);
  return total;
}

std::vector<double> interval_weights(const std::vector<double>& grid, double lo, double hi) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  if (!(hi > lo)) return w;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double a = std::max(lo, grid[j]);
    const double b = std::min(hi, grid[j + 1]);
    if (!(b > a)) continue;
    const double cell = grid[j + 1] - grid[j];
    const double ta = (a - grid[j]) / cell;
    const double tb = (b - grid[j]) / cell;
    w[j] += 0.5 * (b - a) * ((1.0 - ta) + (1.0 - tb));
    w[j + 1] += 0.5 * (b - a) * (ta + tb);
  }
  return w;
}

double bisect_root(const RealFn& f, double lo, double hi, double x_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw std::invalid_argument("bisect_root: endpoints do not bracket a root");
  for (int i = 0; i < max_iter && (hi - lo) > x_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if (fmid == 0.0) return mid;
    if ((fmid > 0) == (flo > 0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double fd_derivative(const RealFn& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double fd_second_derivative(const RealFn& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

}  // namespace pdmp
