#pragma once

#include <functional>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

// Stationary (or embedded) law on a truncation window: continuous density
// sampled on a grid, plus point masses. Closed-form models attach exact
// callables so downstream consumers are not limited by interpolation error.
struct GridDensity {
  std::vector<double> grid;    // strictly increasing nodes
  std::vector<double> values;  // continuous density at the nodes
  std::vector<MassAtom> atoms;
  double sigma_gamma = 0;  // boundary hit rate r(gamma) nu'(gamma)
  double window_lo = 0;
  double window_hi = 0;
  double truncated_mass = 0;       // estimated mass beyond the window
  double normalization_error = 0;  // |1 - raw mass| seen before normalize()

  RealFn exact_pdf;       // optional closed form; pdf() prefers it
  RealFn exact_cdf;       // must include atom mass (right-continuous)
  RealFn exact_quantile;  // inverse of exact_cdf

  void finalize();   // build the cdf cache; call after filling the fields
  void normalize();  // rescale grid values + atoms + sigma_gamma to mass 1

  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;
  double sample(RngStream& rng) const;

  double atom_mass(double x) const;
  double continuous_mass() const;
  double interp_pdf(double x) const;  // grid interpolation even when exact_pdf is set

 private:
  std::vector<double> cum_;  // cum_[i] = continuous mass on [grid[0], grid[i]]
  bool finalized_ = false;
  double grid_cdf(double x) const;
};

// Image of the law under x -> -x (pairs with mirror_model). Exact callables
// other than the pdf are dropped.
GridDensity mirror_density(const GridDensity& g);

}  // namespace pdmp
