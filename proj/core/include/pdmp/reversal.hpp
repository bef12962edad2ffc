#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pdmp/grid_density.hpp"
#include "pdmp/model.hpp"
#include "pdmp/quadrature.hpp"
#include "pdmp/zoo.hpp"

namespace pdmp {

// Function tabulated on the density grid. NaN entries mark nodes where the
// value is undefined (listed in `flagged`); interpolation skips them.
struct GridFn {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<size_t> flagged;

  double operator()(double q) const;
  bool empty() const { return x.empty(); }
};

// Point mass of the reversed kernel at a fixed target location, tabulated
// over the source nodes.
struct TargetMass {
  double loc = 0;
  std::vector<double> mass;
};

// Reversed jump law mu*_x, tabulated on the grid. Row i holds the continuous
// density of mu*_{x_i}; point-mass components land on the forward boundary
// (reverse of forced jumps) and on holding atoms (reverse of their exits).
struct ReversedKernel {
  std::vector<double> grid;
  std::vector<std::vector<double>> density;  // [i][j] = mu*'_{x_i}(grid[j])
  GridFn boundary_jump;                      // x -> mu*_x({gamma}); empty rates when no boundary
  std::vector<TargetMass> point_masses;      // reversed jumps into holding atoms
  std::vector<size_t> flagged;               // rows where the post-jump flux vanishes
  double max_row_defect = 0;                 // max |mass(mu*_x) - 1| over defined rows
};

// Time-reversed process: drift -r, intensity lambda*, kernel mu*, and a
// forced-jump measure sigma* sitting on the forward entry endpoint w.
// `base` is a usable model whose callables interpolate the tabulated
// quantities (exact at the grid nodes).
struct ReversedPdmp {
  PdmpModel base;
  std::vector<double> grid;
  GridFn lambda_star;
  ReversedKernel kernel_star;
  std::vector<MassAtom> sigma_star;     // forced-jump mass, at w when present
  GridFn boundary_law_star;             // density of the jump law at w
  std::vector<MassAtom> boundary_law_star_atoms;
  std::vector<double> flux;             // lambda*(x) nu'(x) at the nodes (exact)
};

// Reversed intensity via the flux ratio lambda*(x) = q(x)/nu'(x), where q is
// the post-jump flux density of the stationary law. Ground-truth route.
GridFn reversed_intensity_kernel_ratio(const PdmpModel& model, const GridDensity& density);

// Same ratio at a single point, with adaptive quadrature for q(x). Slower but
// free of grid interpolation error; used by the flux-continuation check.
double reversed_intensity_at(const PdmpModel& model, const GridDensity& density, double x);

// Reversed intensity via lambda* = lambda + r' + r nu''/nu' (cross-check
// route; differentiates the exact density when one is attached, finite
// differences on the grid otherwise). Mirrors decreasing models internally.
GridFn reversed_intensity_derivative(const PdmpModel& model, const GridDensity& density);

// Reversed jump law mu*_x(dy) proportional to lambda(y) nu'(y) mu'_y(x) dy,
// plus the boundary and holding-atom point masses.
ReversedKernel reversed_kernel(const PdmpModel& model, const GridDensity& density);

// Forced-jump mass of the reversed process: the stationary flux into the
// forward entry endpoint w. Empty when w is unreachable by jumps.
std::vector<MassAtom> reversed_boundary_mass(const PdmpModel& model, const GridDensity& density);

// Assemble the full reversed process. Throws ConfigError when the reversal
// fails to be of the same class (a post-jump point mass sits away from the
// boundary and the holding atoms) or when an atom mixes entry modes.
ReversedPdmp derive_reversed(const PdmpModel& model, const GridDensity& density);

// Double reversal: reverse `rev.base`, reusing the tabulated flux of `rev` so
// node values are exact. Should reproduce the forward model.
ReversedPdmp derive_reversed(const ReversedPdmp& rev, const GridDensity& density);

// Rectangle A x B in (pre-jump, post-jump) coordinates.
struct Rect {
  double a_lo = 0, a_hi = 0, b_lo = 0, b_hi = 0;
};

// Discrepancy between the forward two-sided jump law pi(A x B) and the
// reversed one pi*(B x A), plus L1 distances between the matched embedded
// laws and the two total transition rates.
struct DualityReport {
  double max_abs = 0;
  double max_rel = 0;
  Rect worst{};
  double l1_after_vs_rev_before = 0;  // pi_Q vs pi*_W
  double l1_before_vs_rev_after = 0;  // pi_W vs pi*_Q
  double xi_forward = 0;
  double xi_reversed = 0;
};

DualityReport duality_residual(const PdmpModel& model, const GridDensity& density,
                               std::vector<Rect> rectangles = {});

// Closed-form variant: the forward side uses the model's own intensity and
// kernel, the reversed side the independently derived analytic reversed
// parameters, both integrated adaptively. The residual then measures how well
// the analytic reversal satisfies the pair-measure identity, free of any
// grid-tabulation error; it is the oracle the rectangle tolerance is pinned
// against.
DualityReport duality_residual(const PdmpModel& model, const GridDensity& density,
                               const ClosedForms& cf, std::vector<Rect> rectangles = {});

// Smooth test function with its derivative, for the generator pairing check.
struct TestFn {
  std::string name;
  RealFn f;
  RealFn df;
};

// Default battery: x, x^2, exp(-x), sin(x), and two products.
std::vector<TestFn> adjoint_test_battery();

// Relative gap between the two generator pairings
//   int g (A f) d nu  vs  int f (A* g) d nu
// evaluated without forming A* explicitly: both sides reduce to drift terms
// plus pairings against the stationary transition flux.
double adjoint_residual(const PdmpModel& model, const GridDensity& density, const TestFn& f,
                        const TestFn& g);

// One checked pair of the flux-continuation identity.
struct PairResidual {
  double y = 0, x = 0;   // upstream point y, downstream point x
  double lhs = 0, rhs = 0;
  double rel = 0;
};

struct SurvivalFluxReport {
  double max_rel = 0;
  std::vector<PairResidual> pairs;
};

// Identity r(y) nu'(y) P_y(no jump before reaching x) =
//          r(x) nu'(x) P*_x(no reversed jump before reaching y)
// for y upstream of x along the flow. Checks each supplied (y, x) pair.
SurvivalFluxReport survival_flux_residual(const PdmpModel& model, const GridDensity& density,
                                          const std::vector<std::pair<double, double>>& pairs);

}  // namespace pdmp
