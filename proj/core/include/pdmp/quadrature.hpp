#pragma once

#include <functional>
#include <vector>

namespace pdmp {

using RealFn = std::function<double(double)>;

struct QuadOptions {
  double abs_tol = 1e-11;
  double rel_tol = 1e-10;
  int max_depth = 48;
};

/// Adaptive Simpson on [a, b]. Integrand must be finite on the closed
/// interval; callers split at known kinks/discontinuities themselves.
double integrate(const RealFn& f, double a, double b, const QuadOptions& opt = {});

/// Integral over [a, inf) for integrands with decaying tails: doubling
/// panels until two consecutive contributions fall below tolerance.
double integrate_to_inf(const RealFn& f, double a, const QuadOptions& opt = {});

/// Trapezoid weights for an arbitrary strictly increasing grid.
std::vector<double> trapezoid_weights(const std::vector<double>& grid);

/// Trapezoid rule of tabulated values over the grid.
double trapezoid(const std::vector<double>& grid, const std::vector<double>& values);

/// Trapezoid weights restricted to [lo, hi] (clipped to the grid): dotting
/// them with tabulated values integrates the linear interpolant over the
/// interval.
std::vector<double> interval_weights(const std::vector<double>& grid, double lo, double hi);

/// Root of a continuous function on a bracketing interval [lo, hi]
/// (f(lo), f(hi) of opposite sign), bisection to absolute x-tolerance.
double bisect_root(const RealFn& f, double lo, double hi, double x_tol, int max_iter = 200);

/// Central finite differences on a closed-form function.
double fd_derivative(const RealFn& f, double x, double h);
double fd_second_derivative(const RealFn& f, double x, double h);

}  // namespace pdmp
