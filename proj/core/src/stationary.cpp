#include "pdmp/stationary.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "pdmp/errors.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {
namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  g.back() = hi;
  return g;
}

double kernel_atom_at(const JumpKernel& k, double z, double loc) {
  return kernel_point_mass(k, z, loc);
}

// mu_z((-inf, y)) — kernel mass strictly below y.
double mass_below(const JumpKernel& k, double z, double y) { return kernel_mass_below(k, z, y); }

std::pair<double, double> resolve_window(const PdmpModel& model, const WindowOverride& win) {
  double lo, hi;
  if (win.window) {
    lo = win.window->first;
    hi = win.window->second;
  } else if (model.domain_hint) {
    lo = model.domain_hint->first;
    hi = model.domain_hint->second;
  } else {
    double x0;
    const double sl = model.space.lower, su = model.space.upper;
    if (std::isfinite(sl) && std::isfinite(su))
      x0 = 0.5 * (sl + su);
    else if (std::isfinite(su))
      x0 = su;
    else if (std::isfinite(sl))
      x0 = sl;
    else
      x0 = 0.0;
    const auto trajs =
        simulate_batch(model, x0, win.pilot_horizon, win.pilot_paths, win.pilot_seed);
    lo = kInf;
    hi = -kInf;
    for (const auto& tr : trajs) {
      lo = std::min({lo, tr.start_state, tr.end_state});
      hi = std::max({hi, tr.start_state, tr.end_state});
      for (const auto& e : tr.events) {
        lo = std::min({lo, e.pre, e.post});
        hi = std::max({hi, e.pre, e.post});
      }
    }
    if (!(hi > lo)) throw SolverError("pilot simulation produced a degenerate state range");
    const double pad = 0.15 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  lo = std::max(lo, model.space.lower);
  hi = std::min(hi, model.space.upper);
  // An active boundary or endpoint holding atom must be a window endpoint.
  if (model.space.active_boundary) {
    if (model.direction() > 0)
      hi = model.space.upper;
    else
      lo = model.space.lower;
  }
  for (const auto& [a, info] : model.atoms) {
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo))
    throw SolverError("could not resolve a finite truncation window");
  return {lo, hi};
}

struct Assembly {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  int n = 0;                      // grid nodes
  std::vector<double> atom_locs;  // holding atoms, column n + k
  std::vector<HoldingAtom> atom_info;
  bool active = false;  // sigma column is the last one
  int norm_row = -1;
  int cols() const { return n + static_cast<int>(atom_locs.size()) + (active ? 1 : 0); }
};

// Builds the collocation system in the increasing frame.
Assembly assemble(const PdmpModel& model, const std::vector<double>& grid) {
  const int n = static_cast<int>(grid.size());
  const double span = grid.back() - grid.front();
  const double tol = 1e-9 * (1.0 + std::abs(grid.front()) + std::abs(grid.back()));
  const double w_true = model.space.lower;
  const double gamma = model.space.upper;

  Assembly as;
  as.n = n;
  as.active = model.space.active_boundary;
  for (const auto& [a, info] : model.atoms) {
    if (a < grid.front() - tol || a > grid.back() + tol) continue;
    if (std::abs(a - grid.front()) > tol && std::abs(a - grid.back()) > tol)
      throw ConfigError("grid solver: holding atom must sit at a window endpoint");
    as.atom_locs.push_back(a);
    as.atom_info.push_back(info);
  }
  const int n_atoms = static_cast<int>(as.atom_locs.size());
  const int sigma_col = n + n_atoms;  // valid only when active

  const bool w_is_entry = std::isfinite(w_true) && std::abs(grid.front() - w_true) <= tol;
  bool atom_at_top = false;
  for (double a : as.atom_locs)
    if (std::abs(a - grid.back()) <= tol) atom_at_top = true;

  const std::vector<double> omega = trapezoid_weights(grid);
  std::vector<double> lam(grid.size());
  for (size_t j = 0; j < grid.size(); ++j) lam[j] = model.intensity(grid[j]);

  // mu_{x_j}([w, x_i)) for every node pair, and landing masses at the
  // special points (entry endpoint, holding atoms).
  Eigen::MatrixXd mb(n, n);
  std::vector<double> mbw(static_cast<size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const double below_w =
        std::isfinite(w_true) ? mass_below(model.kernel, grid[static_cast<size_t>(j)], w_true)
                              : 0.0;
    mbw[static_cast<size_t>(j)] = below_w;
    for (int i = 0; i < n; ++i)
      mb(j, i) =
          mass_below(model.kernel, grid[static_cast<size_t>(j)], grid[static_cast<size_t>(i)]) -
          below_w;
  }
  std::vector<double> ka_w(static_cast<size_t>(n), 0.0);
  for (int j = 0; j < n; ++j)
    ka_w[static_cast<size_t>(j)] =
        kernel_atom_at(model.kernel, grid[static_cast<size_t>(j)], grid.front());
  std::vector<std::vector<double>> ka_atom(as.atom_locs.size(),
                                           std::vector<double>(static_cast<size_t>(n), 0.0));
  for (size_t k = 0; k < as.atom_locs.size(); ++k)
    for (int j = 0; j < n; ++j)
      ka_atom[k][static_cast<size_t>(j)] =
          kernel_atom_at(model.kernel, grid[static_cast<size_t>(j)], as.atom_locs[k]);

  const JumpKernel* bk = as.active ? &*model.boundary_kernel : nullptr;

  const int n_rows = (atom_at_top ? n - 1 : n) + n_atoms + 1;
  as.A = Eigen::MatrixXd::Zero(n_rows, as.cols());
  as.b = Eigen::VectorXd::Zero(n_rows);

  auto r_inside = [&](double x, double toward_interior) {
    double r = model.drift.r(x);
    if (r == 0.0) r = model.drift.r(x + toward_interior * 1e-9 * (1.0 + span));
    return r;
  };

  int row = 0;
  // Row for the entry endpoint: either the x -> w+ limit of the balance
  // equation (kernel atoms at {w} act as the source) or, for a window
  // truncated above the true entry point, a plain collocation row.
  {
    if (w_is_entry) {
      as.A(row, 0) += r_inside(grid.front(), +1.0);
      for (int j = 0; j < n; ++j)
        as.A(row, j) -= omega[static_cast<size_t>(j)] * lam[static_cast<size_t>(j)] *
                        ka_w[static_cast<size_t>(j)];
      if (as.active) as.A(row, sigma_col) -= kernel_atom_at(*bk, gamma, grid.front());
      for (int k = 0; k < n_atoms; ++k) {
        if (as.atom_info[static_cast<size_t>(k)].exit != AtomExit::jump) continue;
        const double a = as.atom_locs[static_cast<size_t>(k)];
        const double self = std::abs(a - grid.front()) <= tol ? 1.0 : 0.0;
        as.A(row, n + k) -= as.atom_info[static_cast<size_t>(k)].exit_rate *
                            (kernel_atom_at(model.kernel, a, grid.front()) - self);
      }
    } else {
      as.A(row, 0) += model.drift.r(grid.front());
      for (int j = 0; j < n; ++j)
        as.A(row, j) -= omega[static_cast<size_t>(j)] * lam[static_cast<size_t>(j)] * mb(j, 0);
      if (as.active)
        as.A(row, sigma_col) -=
            mass_below(*bk, gamma, grid.front()) - mass_below(*bk, gamma, w_true);
      for (int k = 0; k < n_atoms; ++k) {
        if (as.atom_info[static_cast<size_t>(k)].exit != AtomExit::jump) continue;
        const double a = as.atom_locs[static_cast<size_t>(k)];
        as.A(row, n + k) -=
            as.atom_info[static_cast<size_t>(k)].exit_rate *
            (mass_below(model.kernel, a, grid.front()) -
             (std::isfinite(w_true) ? mass_below(model.kernel, a, w_true) : 0.0));
      }
    }
    ++row;
  }

  // Interior collocation rows (the last one doubles as the sigma closure
  // when the boundary is active; skipped when a holding atom sits there).
  const int i_last = atom_at_top ? n - 2 : n - 1;
  for (int i = 1; i <= i_last; ++i, ++row) {
    as.A(row, i) += model.drift.r(grid[static_cast<size_t>(i)]);
    for (int j = 0; j < n; ++j)
      as.A(row, j) -= omega[static_cast<size_t>(j)] * lam[static_cast<size_t>(j)] * mb(j, i);
    for (int j = 0; j <= i; ++j) {
      double c;
      if (j == 0)
        c = 0.5 * (grid[1] - grid[0]);
      else if (j == i)
        c = 0.5 * (grid[static_cast<size_t>(i)] - grid[static_cast<size_t>(i) - 1]);
      else
        c = 0.5 * (grid[static_cast<size_t>(j) + 1] - grid[static_cast<size_t>(j) - 1]);
      as.A(row, j) += c * lam[static_cast<size_t>(j)];
    }
    if (as.active)
      as.A(row, sigma_col) -=
          mass_below(*bk, gamma, grid[static_cast<size_t>(i)]) - mass_below(*bk, gamma, w_true);
    for (int k = 0; k < n_atoms; ++k) {
      if (as.atom_info[static_cast<size_t>(k)].exit != AtomExit::jump) continue;
      const double a = as.atom_locs[static_cast<size_t>(k)];
      const double land =
          mass_below(model.kernel, a, grid[static_cast<size_t>(i)]) -
          (std::isfinite(w_true) ? mass_below(model.kernel, a, w_true) : 0.0);
      as.A(row, n + k) -= as.atom_info[static_cast<size_t>(k)].exit_rate *
                          (land - (a < grid[static_cast<size_t>(i)] ? 1.0 : 0.0));
    }
  }

  // Holding-atom balance: exits = kernel landings at {a} + flow entry.
  for (int k = 0; k < n_atoms; ++k, ++row) {
    const double a = as.atom_locs[static_cast<size_t>(k)];
    as.A(row, n + k) += as.atom_info[static_cast<size_t>(k)].exit_rate;
    for (int j = 0; j < n; ++j)
      as.A(row, j) -= omega[static_cast<size_t>(j)] * lam[static_cast<size_t>(j)] *
                      ka_atom[static_cast<size_t>(k)][static_cast<size_t>(j)];
    if (as.active) as.A(row, sigma_col) -= kernel_atom_at(*bk, gamma, a);
    for (int k2 = 0; k2 < n_atoms; ++k2) {
      if (k2 == k || as.atom_info[static_cast<size_t>(k2)].exit != AtomExit::jump) continue;
      as.A(row, n + k2) -= as.atom_info[static_cast<size_t>(k2)].exit_rate *
                           kernel_atom_at(model.kernel, as.atom_locs[static_cast<size_t>(k2)], a);
    }
    if (std::abs(a - grid.back()) <= tol)  // flow enters from below
      as.A(row, n - 1) -= r_inside(grid.back(), -1.0);
  }

  // Normalization.
  as.norm_row = row;
  for (int j = 0; j < n; ++j) as.A(row, j) += omega[static_cast<size_t>(j)];
  for (int k = 0; k < n_atoms; ++k) as.A(row, n + k) += 1.0;
  as.b(row) = 1.0;
  return as;
}

double extrapolate_quadratic(const std::vector<double>& xs, const std::vector<double>& ys,
                             double x) {
  // Lagrange through three points.
  double s = 0;
  for (int i = 0; i < 3; ++i) {
    double term = ys[static_cast<size_t>(i)];
    for (int j = 0; j < 3; ++j)
      if (j != i)
        term *= (x - xs[static_cast<size_t>(j)]) /
                (xs[static_cast<size_t>(i)] - xs[static_cast<size_t>(j)]);
    s += term;
  }
  return s;
}

GridDensity solve_increasing(const PdmpModel& model, const std::vector<double>& grid) {
  Assembly as = assemble(model, grid);
  const int n = as.n;
  const int n_atoms = static_cast<int>(as.atom_locs.size());
  const int cols = as.cols();

  // Row equilibration; rows that vanish identically are dropped.
  std::vector<int> keep_rows;
  for (int r = 0; r < as.A.rows(); ++r) {
    const double s = std::max(as.A.row(r).cwiseAbs().maxCoeff(), std::abs(as.b(r)));
    if (s < 1e-300) continue;
    as.A.row(r) /= s;
    as.b(r) /= s;
    keep_rows.push_back(r);
  }
  // Columns with no support (e.g. an endpoint node where both r and lambda
  // vanish) are removed and the node value extrapolated afterwards.
  std::vector<int> col_map;  // reduced -> original
  std::vector<bool> masked(static_cast<size_t>(cols), false);
  double max_col = 0;
  for (int c = 0; c < cols; ++c) max_col = std::max(max_col, as.A.col(c).cwiseAbs().maxCoeff());
  for (int c = 0; c < cols; ++c) {
    double cn = 0;
    for (int r : keep_rows) cn = std::max(cn, std::abs(as.A(r, c)));
    if (cn < 1e-13 * max_col) {
      if (c >= n)
        throw SolverError("grid solver: atom/boundary unknown has no support in the system");
      masked[static_cast<size_t>(c)] = true;
    } else {
      col_map.push_back(c);
    }
  }

  Eigen::MatrixXd A(keep_rows.size(), col_map.size());
  Eigen::VectorXd b(keep_rows.size());
  for (size_t r = 0; r < keep_rows.size(); ++r) {
    b(static_cast<Eigen::Index>(r)) = as.b(keep_rows[r]);
    for (size_t c = 0; c < col_map.size(); ++c)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as.A(keep_rows[r], col_map[c]);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < static_cast<Eigen::Index>(col_map.size())) {
    const auto& R = qr.matrixR();
    const double cond = std::abs(R(0, 0)) /
                        std::max(std::abs(R(qr.rank() > 0 ? qr.rank() - 1 : 0,
                                            qr.rank() > 0 ? qr.rank() - 1 : 0)),
                                 1e-300);
    throw SolverError("grid solver: rank-deficient system (rank " + std::to_string(qr.rank()) +
                      " of " + std::to_string(col_map.size()) + ", pivot ratio ~" +
                      std::to_string(cond) + ")");
  }
  Eigen::VectorXd sol_red = qr.solve(b);
  if (!sol_red.allFinite()) throw SolverError("grid solver: non-finite solution");

  Eigen::VectorXd sol = Eigen::VectorXd::Zero(cols);
  for (size_t c = 0; c < col_map.size(); ++c)
    sol(col_map[c]) = sol_red(static_cast<Eigen::Index>(c));

  std::vector<double> v(grid.size());
  for (int j = 0; j < n; ++j) v[static_cast<size_t>(j)] = sol(j);
  // Fill masked nodes from their solved neighbours.
  for (int j = 0; j < n; ++j) {
    if (!masked[static_cast<size_t>(j)]) continue;
    std::vector<double> xs, ys;
    for (int d = 1; d < n && xs.size() < 3; ++d) {
      for (int cand : {j - d, j + d}) {
        if (cand < 0 || cand >= n || masked[static_cast<size_t>(cand)]) continue;
        xs.push_back(grid[static_cast<size_t>(cand)]);
        ys.push_back(v[static_cast<size_t>(cand)]);
        if (xs.size() == 3) break;
      }
    }
    if (xs.size() == 3)
      v[static_cast<size_t>(j)] = std::max(0.0, extrapolate_quadratic(xs, ys, grid[static_cast<size_t>(j)]));
  }

  double vmax = 0;
  for (double x : v) vmax = std::max(vmax, std::abs(x));
  double most_negative = 0;
  for (double x : v) most_negative = std::min(most_negative, x);
  std::vector<MassAtom> atoms;
  for (int k = 0; k < n_atoms; ++k) {
    atoms.push_back({as.atom_locs[static_cast<size_t>(k)], sol(n + k)});
    most_negative = std::min(most_negative, sol(n + k));
    vmax = std::max(vmax, std::abs(sol(n + k)));
  }
  double sigma = as.active ? sol(cols - 1) : 0.0;
  most_negative = std::min(most_negative, as.active ? sigma : 0.0);
  if (most_negative < -1e-8 * std::max(vmax, 1e-30))
    throw NonphysicalSolutionError("grid solver: negative density " +
                                   std::to_string(most_negative) + " (max magnitude " +
                                   std::to_string(vmax) + ")");
  for (double& x : v) x = std::max(x, 0.0);
  for (auto& a : atoms) a.mass = std::max(a.mass, 0.0);
  sigma = std::max(sigma, 0.0);
  if (as.active && sigma < 1e-10 * std::max(vmax, 1e-30))
    std::cerr << "[pdmp] note: active boundary with sigma_gamma ~ 0 for model '" << model.name
              << "'; the closure equation is degenerate there\n";

  GridDensity out;
  out.grid = grid;
  out.values = v;
  out.atoms = atoms;
  out.sigma_gamma = sigma;
  out.window_lo = grid.front();
  out.window_hi = grid.back();
  out.finalize();
  out.normalize();
  return out;
}

}  // namespace

GridDensity solve_stationary_grid(const PdmpModel& model, int n_nodes, const WindowOverride& win) {
  if (n_nodes < 16) throw ConfigError("solve_stationary_grid: n_nodes too small");
  if (model.drift.orientation == Orientation::decreasing) {
    const PdmpModel mirrored = mirror_model(model);
    WindowOverride w2 = win;
    if (win.window) w2.window = std::make_pair(-win.window->second, -win.window->first);
    return mirror_density(solve_stationary_grid(mirrored, n_nodes, w2));
  }
  const auto [lo, hi] = resolve_window(model, win);
  return solve_increasing(model, linspace(lo, hi, n_nodes));
}

double grid_equation_residual(const PdmpModel& model, const GridDensity& density) {
  if (model.drift.orientation == Orientation::decreasing)
    return grid_equation_residual(mirror_model(model), mirror_density(density));
  Assembly as = assemble(model, density.grid);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(as.cols());
  for (int j = 0; j < as.n; ++j) u(j) = density.values[static_cast<size_t>(j)];
  for (size_t k = 0; k < as.atom_locs.size(); ++k)
    u(as.n + static_cast<int>(k)) = density.atom_mass(as.atom_locs[k]);
  if (as.active) u(as.cols() - 1) = density.sigma_gamma;

  std::vector<std::pair<double, double>> rows;  // (|residual|, scale)
  double global_scale = 0;
  for (int r = 0; r < as.A.rows(); ++r) {
    if (r == as.norm_row) continue;
    double resid = -as.b(r), scale = std::abs(as.b(r));
    for (int c = 0; c < as.cols(); ++c) {
      resid += as.A(r, c) * u(c);
      scale += std::abs(as.A(r, c) * u(c));
    }
    rows.emplace_back(std::abs(resid), scale);
    global_scale = std::max(global_scale, scale);
  }
  // Rows whose terms are all negligible against the problem scale (deep tail
  // nodes) carry no information; their 0/0 ratios would drown the signal.
  double worst = 0;
  for (const auto& [resid, scale] : rows)
    if (scale > 1e-6 * global_scale) worst = std::max(worst, resid / scale);
  return worst;
}

// ---------------------------------------------------------------- regenerative

namespace {

double hazard_along(const PdmpModel& model, double from, double to) {
  if (to <= from) return 0.0;
  if (model.closed_form_hazard) {
    const double t = travel_time(model, from, to);
    if (!std::isfinite(t)) return kInf;
    return model.closed_form_hazard(from, t);
  }
  return hazard_between(model, from, to);
}

GridDensity regenerative_increasing(const PdmpModel& model, const std::vector<double>& grid,
                                    int max_iters) {
  const int n = static_cast<int>(grid.size());
  const int n_cells = n - 1;
  const double tol = 1e-9 * (1.0 + std::abs(grid.front()) + std::abs(grid.back()));
  const double gamma = model.space.upper;

  std::vector<double> atom_locs;
  std::vector<HoldingAtom> atom_info;
  for (const auto& [a, info] : model.atoms) {
    if (a < grid.front() - tol || a > grid.back() + tol) continue;
    if (std::abs(a - grid.front()) > tol && std::abs(a - grid.back()) > tol)
      throw ConfigError("regenerative solver: holding atom must sit at a window endpoint");
    atom_locs.push_back(a);
    atom_info.push_back(info);
  }
  const int n_atoms = static_cast<int>(atom_locs.size());
  const int n_states = n_cells + n_atoms;

  // Cumulative hazard along the flow at nodes and cell midpoints.
  std::vector<double> mid(static_cast<size_t>(n_cells));
  for (int k = 0; k < n_cells; ++k)
    mid[static_cast<size_t>(k)] =
        0.5 * (grid[static_cast<size_t>(k)] + grid[static_cast<size_t>(k) + 1]);
  std::vector<double> H_node(static_cast<size_t>(n), 0.0), H_mid(static_cast<size_t>(n_cells));
  for (int j = 1; j < n; ++j)
    H_node[static_cast<size_t>(j)] =
        H_node[static_cast<size_t>(j) - 1] +
        hazard_along(model, grid[static_cast<size_t>(j) - 1], grid[static_cast<size_t>(j)]);
  for (int k = 0; k < n_cells; ++k)
    H_mid[static_cast<size_t>(k)] =
        H_node[static_cast<size_t>(k)] +
        hazard_along(model, grid[static_cast<size_t>(k)], mid[static_cast<size_t>(k)]);

  int atom_top_idx = -1;
  for (int k = 0; k < n_atoms; ++k)
    if (std::abs(atom_locs[static_cast<size_t>(k)] - grid.back()) <= tol) atom_top_idx = k;

  // Landing rows: where a jump from z lands (cells, holding atoms). Cell
  // masses are cdf differences, which already contain any kernel point
  // masses inside the cell; masses at holding-atom locations are then
  // reassigned from the containing cell to the atom state.
  auto landing_row = [&](const JumpKernel& kern, double z, Eigen::VectorXd& row, double weight) {
    double placed = 0;
    for (int l = 0; l < n_cells; ++l) {
      const double m = mass_below(kern, z, grid[static_cast<size_t>(l) + 1]) -
                       mass_below(kern, z, grid[static_cast<size_t>(l)]);
      row(l) += weight * m;
      placed += m;
    }
    // below-window mass flows back up through the window: first cell
    const double below = mass_below(kern, z, grid.front());
    row(0) += weight * below;
    placed += below;
    for (int k = 0; k < n_atoms; ++k) {
      const double a = atom_locs[static_cast<size_t>(k)];
      const double am = kernel_atom_at(kern, z, a);
      if (am <= 0) continue;
      if (std::abs(a - grid.back()) <= tol) {
        placed += am;  // a point mass at the top node sits outside every cell
      } else {
        for (int l = 0; l < n_cells; ++l)
          if (a >= grid[static_cast<size_t>(l)] && a < grid[static_cast<size_t>(l) + 1])
            row(l) -= weight * am;
      }
      row(n_cells + k) += weight * am;
    }
    // anything left over (above the window) is credited to the last cell
    const double above = 1.0 - placed;
    if (above > 0) row(n_cells - 1) += weight * above;
  };

  // Flow from a continuous position with cumulative hazard h0 at position p0.
  auto flow_row = [&](double p0, double h0, Eigen::VectorXd& row) {
    if (!std::isfinite(h0)) return;  // unreachable start; leave the row empty
    double s_prev = 1.0;
    for (int j = 0; j < n; ++j) {
      if (grid[static_cast<size_t>(j)] <= p0 + tol) continue;
      const double s = std::exp(-std::max(0.0, H_node[static_cast<size_t>(j)] - h0));
      const int cell = j - 1;
      const double mass = s_prev - s;
      if (mass > 0) {
        const double z = std::max(mid[static_cast<size_t>(cell)], p0);
        landing_row(model.kernel, z, row, mass);
      }
      s_prev = s;
    }
    // survived to the top of the window
    if (s_prev > 0) {
      if (atom_top_idx >= 0)
        row(n_cells + atom_top_idx) += s_prev;
      else if (model.space.active_boundary)
        landing_row(*model.boundary_kernel, gamma, row, s_prev);
      else
        row(n_cells - 1) += s_prev;  // truncation leak
    }
  };

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_states, n_states);
  for (int k = 0; k < n_cells; ++k) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n_states);
    flow_row(mid[static_cast<size_t>(k)], H_mid[static_cast<size_t>(k)], row);
    P.row(k) = row;
  }
  for (int k = 0; k < n_atoms; ++k) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n_states);
    if (atom_info[static_cast<size_t>(k)].exit == AtomExit::jump)
      landing_row(model.kernel, atom_locs[static_cast<size_t>(k)], row, 1.0);
    else {
      const double a = atom_locs[static_cast<size_t>(k)];
      const double h0 = std::abs(a - grid.front()) <= tol ? 0.0 : H_node[static_cast<size_t>(n) - 1];
      flow_row(a, h0, row);
    }
    P.row(n_cells + k) = row;
  }
  for (int s = 0; s < n_states; ++s) {
    const double rs = P.row(s).sum();
    if (rs > 1e-12) P.row(s) /= rs;
  }

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  double resid = kInf;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd next = P.transpose() * pi;
    const double total = next.sum();
    if (total > 0) next /= total;
    resid = (next - pi).cwiseAbs().sum();
    pi = next;
    if (resid < 1e-10) break;
  }
  if (resid >= 1e-10)
    throw IterationLimitError("regenerative solver: power iteration residual " +
                              std::to_string(resid) + " after max iterations");

  // Occupation reconstruction: nu'(x) ∝ sum_k pi_k S_k(x)/|r(x)|, atoms get
  // pi_a / exit_rate.
  std::vector<double> dens(static_cast<size_t>(n), 0.0);
  auto add_occupation = [&](double p0, double h0, double weight) {
    if (weight <= 0 || !std::isfinite(h0)) return;
    for (int j = 0; j < n; ++j) {
      if (grid[static_cast<size_t>(j)] < p0 - tol) continue;
      const double h = std::max(H_node[static_cast<size_t>(j)], h0);
      const double rr = std::abs(model.drift.r(grid[static_cast<size_t>(j)]));
      if (rr < 1e-300) continue;
      dens[static_cast<size_t>(j)] += weight * std::exp(-(h - h0)) / rr;
    }
  };
  for (int k = 0; k < n_cells; ++k)
    add_occupation(mid[static_cast<size_t>(k)], H_mid[static_cast<size_t>(k)], pi(k));
  std::vector<MassAtom> atoms;
  for (int k = 0; k < n_atoms; ++k) {
    if (atom_info[static_cast<size_t>(k)].exit == AtomExit::flow) {
      const double a = atom_locs[static_cast<size_t>(k)];
      const double h0 =
          std::abs(a - grid.front()) <= tol ? 0.0 : H_node[static_cast<size_t>(n) - 1];
      add_occupation(a, h0, pi(n_cells + k));
    }
    atoms.push_back({atom_locs[static_cast<size_t>(k)],
                     pi(n_cells + k) / atom_info[static_cast<size_t>(k)].exit_rate});
  }

  GridDensity out;
  out.grid = grid;
  out.values = dens;
  out.atoms = atoms;
  out.window_lo = grid.front();
  out.window_hi = grid.back();
  out.finalize();
  out.normalize();
  if (model.space.active_boundary)
    out.sigma_gamma = std::abs(model.drift.r(gamma)) * out.values.back();
  return out;
}

}  // namespace

GridDensity solve_stationary_regenerative(const PdmpModel& model, int n_nodes, int max_iters,
                                          const WindowOverride& win) {
  if (n_nodes < 16) throw ConfigError("solve_stationary_regenerative: n_nodes too small");
  if (model.drift.orientation == Orientation::decreasing) {
    const PdmpModel mirrored = mirror_model(model);
    WindowOverride w2 = win;
    if (win.window) w2.window = std::make_pair(-win.window->second, -win.window->first);
    return mirror_density(solve_stationary_regenerative(mirrored, n_nodes, max_iters, w2));
  }
  const auto [lo, hi] = resolve_window(model, win);
  return regenerative_increasing(model, linspace(lo, hi, n_nodes), max_iters);
}

// --------------------------------------------------------------- closed forms

namespace {

GridDensity mg1_neumann(const ReflectedMg1Spec& spec, int n) {
  const PdmpModel model = zoo_build(spec);
  const double hi = model.domain_hint->second;
  const double l0 = spec.lambda0;
  const std::vector<double> grid = linspace(0.0, hi, n);
  const double h = grid[1] - grid[0];

  std::vector<double> sf(grid.size());
  for (size_t j = 0; j < grid.size(); ++j) sf[j] = spec.service.sf(grid[j]);

  // w = lambda0 sf + lambda0 sf * w, solved by Neumann series; this is the
  // density of the continuous part scaled so the atom has mass 1.
  std::vector<double> w(grid.size(), 0.0), next(grid.size());
  int it = 0;
  const int max_iters = 10000;
  for (; it < max_iters; ++it) {
    for (size_t i = 0; i < grid.size(); ++i) {
      double conv = 0;
      for (size_t j = 0; j <= i; ++j) {
        const double weight = (j == 0 || j == i) ? 0.5 * h : h;
        conv += weight * sf[i - j] * w[j];
      }
      next[i] = l0 * sf[i] + l0 * conv;
    }
    double inc = 0;
    for (size_t i = 0; i < grid.size(); ++i) inc += std::abs(next[i] - w[i]) * h;
    w.swap(next);
    if (inc < 1e-12) break;
  }
  if (it >= max_iters)
    throw IterationLimitError("Neumann iteration did not reach the 1e-12 increment target");

  const double m0 = 1.0 / (1.0 + trapezoid(grid, w));
  GridDensity out;
  out.grid = grid;
  out.values.resize(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) out.values[i] = m0 * w[i];
  out.atoms = {{0.0, m0}};
  out.window_lo = 0.0;
  out.window_hi = hi;
  out.finalize();
  return out;
}

}  // namespace

std::optional<GridDensity> closed_form_stationary(const ZooSpec& spec, int n_nodes,
                                                  std::optional<std::pair<double, double>> window) {
  if (n_nodes < 16) throw ConfigError("closed_form_stationary: n_nodes too small");
  const auto cf = zoo_closed_forms(spec);
  if (cf) {
    const double lo = window ? window->first : cf->window_lo;
    const double hi = window ? window->second : cf->window_hi;
    if (!(lo < hi)) throw ConfigError("closed_form_stationary: empty window");
    GridDensity out;
    out.grid = linspace(lo, hi, n_nodes);
    out.values.resize(out.grid.size());
    for (size_t i = 0; i < out.grid.size(); ++i) out.values[i] = cf->nu_pdf(out.grid[i]);
    out.atoms = cf->nu_atoms;
    out.sigma_gamma = cf->sigma_gamma;
    out.window_lo = lo;
    out.window_hi = hi;
    out.exact_pdf = cf->nu_pdf;
    out.exact_cdf = cf->nu_cdf;
    out.exact_quantile = cf->nu_quantile;
    out.finalize();
    return out;
  }
  if (const auto* mg1 = std::get_if<ReflectedMg1Spec>(&spec)) return mg1_neumann(*mg1, n_nodes);
  return std::nullopt;
}

// ------------------------------------------------- boundary mass and chains

double boundary_mass(const GridDensity& density, const PdmpModel& model) {
  if (!model.space.active_boundary)
    throw ConfigError("boundary_mass: model has no active boundary");
  if (density.grid.size() < 3) throw ConfigError("boundary_mass: need at least three grid nodes");
  const double gamma = model.exit_endpoint();
  std::vector<double> xs(3), ys(3);
  if (model.direction() > 0) {
    const size_t n = density.grid.size();
    for (int i = 0; i < 3; ++i) {
      xs[static_cast<size_t>(i)] = density.grid[n - 3 + static_cast<size_t>(i)];
      ys[static_cast<size_t>(i)] = density.values[n - 3 + static_cast<size_t>(i)];
    }
  } else {
    for (int i = 0; i < 3; ++i) {
      xs[static_cast<size_t>(i)] = density.grid[static_cast<size_t>(i)];
      ys[static_cast<size_t>(i)] = density.values[static_cast<size_t>(i)];
    }
  }
  const double nu_gamma = std::max(0.0, extrapolate_quadratic(xs, ys, gamma));
  return std::abs(model.drift.r(gamma)) * nu_gamma;
}

EmbeddedDist embedded_laws(const GridDensity& density, const PdmpModel& model) {
  const auto& grid = density.grid;
  const size_t n = grid.size();
  if (n < 3) throw ConfigError("embedded_laws: density grid too small");
  const std::vector<double> omega = trapezoid_weights(grid);
  const double gamma = model.exit_endpoint();

  std::vector<double> lam(n), nu(n);
  for (size_t j = 0; j < n; ++j) {
    lam[j] = model.intensity(grid[j]);
    nu[j] = density.pdf(grid[j]);
  }

  double sigma = 0.0;
  if (model.space.active_boundary)
    sigma = density.sigma_gamma > 0 ? density.sigma_gamma : boundary_mass(density, model);

  struct AtomTerm {
    double loc, rate;  // rate = exit_rate * mass (jump exits only)
    const JumpKernel* kern;
  };
  std::vector<AtomTerm> atom_terms;
  double xi = sigma;
  for (size_t j = 0; j < n; ++j) xi += omega[j] * lam[j] * nu[j];
  for (const auto& [a, info] : model.atoms) {
    const double mass = density.atom_mass(a);
    if (info.exit == AtomExit::jump && mass > 0) {
      atom_terms.push_back({a, info.exit_rate * mass, &model.kernel});
      xi += info.exit_rate * mass;
    }
  }
  if (!(xi > 0) || !std::isfinite(xi))
    throw ConfigError("embedded_laws: degenerate model, ||xi|| = " + std::to_string(xi));

  EmbeddedDist out;
  out.total_rate = xi;

  // pi_W: state just before a transition.
  GridDensity& pw = out.before;
  pw.grid = grid;
  pw.values.resize(n);
  for (size_t j = 0; j < n; ++j) pw.values[j] = lam[j] * nu[j] / xi;
  for (const auto& at : atom_terms) pw.atoms.push_back({at.loc, at.rate / xi});
  if (sigma > 0) pw.atoms.push_back({gamma, sigma / xi});
  pw.window_lo = density.window_lo;
  pw.window_hi = density.window_hi;
  pw.finalize();
  pw.normalize();

  // pi_Q: state just after a transition.
  GridDensity& pq = out.after;
  pq.grid = grid;
  pq.values.assign(n, 0.0);
  const JumpKernel* bk = model.boundary_kernel ? &*model.boundary_kernel : nullptr;
  for (size_t i = 0; i < n; ++i) {
    double q = 0;
    for (size_t j = 0; j < n; ++j)
      q += omega[j] * lam[j] * nu[j] * model.kernel.density(grid[j], grid[i]);
    if (sigma > 0 && bk) q += sigma * bk->density(gamma, grid[i]);
    for (const auto& at : atom_terms) q += at.rate * at.kern->density(at.loc, grid[i]);
    pq.values[i] = q / xi;
  }
  // Landing point masses.
  std::vector<double> targets;
  auto note_target = [&](double p) {
    for (double t : targets)
      if (std::abs(t - p) <= 1e-12 * (1.0 + std::abs(p))) return;
    targets.push_back(p);
  };
  for (size_t j = 0; j < n; ++j)
    for (const auto& a : model.kernel.atoms_at(grid[j])) note_target(a.x);
  if (bk)
    for (const auto& a : bk->atoms_at(gamma)) note_target(a.x);
  for (const auto& at : atom_terms)
    for (const auto& a : at.kern->atoms_at(at.loc)) note_target(a.x);
  for (double p : targets) {
    double mass = 0;
    for (size_t j = 0; j < n; ++j) mass += omega[j] * lam[j] * nu[j] * kernel_atom_at(model.kernel, grid[j], p);
    if (sigma > 0 && bk) mass += sigma * kernel_atom_at(*bk, gamma, p);
    for (const auto& at : atom_terms) mass += at.rate * kernel_atom_at(*at.kern, at.loc, p);
    if (mass > 0) pq.atoms.push_back({p, mass / xi});
  }
  pq.window_lo = density.window_lo;
  pq.window_hi = density.window_hi;
  pq.finalize();
  pq.normalize();
  return out;
}

}  // namespace pdmp
