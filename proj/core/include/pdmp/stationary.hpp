#pragma once

#include <optional>
#include <utility>

#include "pdmp/grid_density.hpp"
#include "pdmp/model.hpp"
#include "pdmp/zoo.hpp"

namespace pdmp {

// Law of the embedded transition chain: state just before a transition
// (pi_W), just after (pi_Q), and the total transition rate ||xi||.
struct EmbeddedDist {
  GridDensity before;      // pi_W
  GridDensity after;       // pi_Q
  double total_rate = 0;   // ||xi|| = int lambda d nu + sigma_gamma
};

// Explicit truncation window; when absent the model's domain hint is used,
// and failing that a pilot simulation picks one.
struct WindowOverride {
  std::optional<std::pair<double, double>> window;
  uint64_t pilot_seed = 0x5eedful;
  int pilot_paths = 24;
  double pilot_horizon = 400.0;
};

// Collocation solve of the flux-balance equation
//   r(x) nu'(x) = int lambda(z) K(x,z) nu'(z) dz + sigma_gamma K(x,gamma) + atom terms,
//   K(x,z) = mu_z([w,x)) - 1{z < x},
// closed by sigma_gamma = r(gamma) nu'(gamma) and normalization.
GridDensity solve_stationary_grid(const PdmpModel& model, int n_nodes = 1024,
                                  const WindowOverride& win = {});

// Independent route: power iteration of the post-jump chain on grid cells,
// then occupation reconstruction nu'(x) ∝ sum_k pi_k S_k(x) / |r(x)|.
GridDensity solve_stationary_regenerative(const PdmpModel& model, int n_nodes = 256,
                                          int max_iters = 2000, const WindowOverride& win = {});

// Closed forms for the zoo; the reflected queue with non-exponential service
// is solved by Neumann-series convolution iteration. No closed route exists
// for the linear-decay model. `window` widens/overrides the default 1e-8
// tail cut (closed-form models only); polynomial-weighted integrals need it.
std::optional<GridDensity> closed_form_stationary(
    const ZooSpec& spec, int n_nodes = 1024,
    std::optional<std::pair<double, double>> window = std::nullopt);

// Max relative residual of the discretized flux-balance rows at a solved
// density (diagnostic for the collocation route; excludes normalization).
double grid_equation_residual(const PdmpModel& model, const GridDensity& density);

// sigma({gamma}) = r(gamma) nu'(gamma), with nu'(gamma) extrapolated from the
// last three grid nodes on the exit side.
double boundary_mass(const GridDensity& density, const PdmpModel& model);

EmbeddedDist embedded_laws(const GridDensity& density, const PdmpModel& model);

}  // namespace pdmp
