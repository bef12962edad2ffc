#include "pdmp/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "pdmp/errors.hpp"

namespace pdmp {

FirstJump sample_first_jump(const PdmpModel& model, double x, RngStream& rng) {
  const double e = rng.exponential(1.0);
  const double tau = hit_time(model, x);
  if (std::isfinite(tau)) {
    const double h_tau = cumulative_hazard(model, x, tau);
    if (h_tau <= e) return {tau, true};
  }
  return {hazard_inverse(model, x, e), false};
}

namespace {

Trajectory run_path(const PdmpModel& model, double init, double horizon, uint64_t seed,
                    RngStream& rng, const SimulateOptions& opt) {
  Trajectory traj;
  traj.start_state = init;
  traj.horizon = horizon;
  traj.seed = seed;

  const double gamma = model.exit_endpoint();
  double t = 0, x = init;
  while (t < horizon) {
    if (traj.events.size() + traj.atom_intervals.size() > opt.explosion_cap)
      throw ExplosionError("event count exceeded explosion cap " +
                           std::to_string(opt.explosion_cap));
    if (model.is_atom(x)) {
      const HoldingAtom& atom = model.atoms.at(x);
      const double hold = rng.exponential(atom.exit_rate);
      traj.atom_intervals.push_back({x, t, std::min(t + hold, horizon)});
      t += hold;
      if (t >= horizon) break;
      if (atom.exit == AtomExit::jump) {
        const double post = model.kernel.sample(x, rng);
        traj.events.push_back({t, x, post, false});
        x = post;
      }
      // AtomExit::flow: the path simply resumes flowing from the atom.
      continue;
    }
    const FirstJump fj = sample_first_jump(model, x, rng);
    if (!(fj.time > 0) && !fj.forced)
      throw PdmpError("nonpositive voluntary jump time at x=" + std::to_string(x));
    if (t + fj.time >= horizon || !std::isfinite(fj.time)) {
      x = flow_advance(model, x, horizon - t);
      t = horizon;
      break;
    }
    t += fj.time;
    if (fj.forced) {
      if (model.is_atom(gamma)) {
        x = gamma;  // flow ran into a holding atom, not a jump
        continue;
      }
      if (!model.space.active_boundary)
        throw PdmpError("flow reached a passive finite endpoint at x=" + std::to_string(gamma));
      const double post = model.boundary_kernel->sample(gamma, rng);
      traj.events.push_back({t, gamma, post, true});
      x = post;
    } else {
      const double pre = flow_advance(model, x, fj.time);
      const double post = model.kernel.sample(pre, rng);
      traj.events.push_back({t, pre, post, false});
      x = post;
    }
  }
  traj.end_state = x;
  return traj;
}

}  // namespace

Trajectory simulate_path(const PdmpModel& model, double init, double horizon, uint64_t seed,
                         const SimulateOptions& opt) {
  RngStream rng(seed, 0);
  return run_path(model, init, horizon, seed, rng, opt);
}

Trajectory simulate_path_stationary(const PdmpModel& model, const GridDensity& stationary,
                                    double horizon, uint64_t seed, const SimulateOptions& opt) {
  RngStream rng(seed, 0);
  const double init = stationary.sample(rng);
  return run_path(model, init, horizon, seed, rng, opt);
}

Trajectory reverse_path(const Trajectory& traj, const PdmpModel& model_of_input) {
  const double T = traj.horizon;
  const double w = model_of_input.entry_endpoint();
  Trajectory rev;
  rev.start_state = traj.end_state;
  rev.end_state = traj.start_state;
  rev.horizon = T;
  rev.seed = traj.seed;

  rev.events.reserve(traj.events.size());
  for (auto it = traj.events.rbegin(); it != traj.events.rend(); ++it) {
    JumpEvent e;
    e.time = T - it->time;
    e.pre = it->post;
    e.post = it->pre;
    e.forced = std::isfinite(w) && e.pre == w && !model_of_input.is_atom(w);
    rev.events.push_back(e);
  }
  rev.atom_intervals.reserve(traj.atom_intervals.size());
  for (auto it = traj.atom_intervals.rbegin(); it != traj.atom_intervals.rend(); ++it)
    rev.atom_intervals.push_back({it->atom, T - it->exit, T - it->entry});
  return rev;
}

namespace {

// Splits the time a monotone flow segment [x_from -> x_to] spends in each cell.
void add_flow_segment(const PdmpModel& model, const std::vector<double>& grid, double x_from,
                      double x_to, double duration, Occupation& occ) {
  if (duration <= 0) return;
  const double lo = std::min(x_from, x_to), hi = std::max(x_from, x_to);
  double covered = 0;
  if (hi > grid.front() && lo < grid.back()) {
    const size_t n_cells = grid.size() - 1;
    size_t first =
        static_cast<size_t>(std::upper_bound(grid.begin(), grid.end(), lo) - grid.begin());
    first = first > 0 ? first - 1 : 0;
    for (size_t c = first; c < n_cells && grid[c] < hi; ++c) {
      const double a = std::max(grid[c], lo), b = std::min(grid[c + 1], hi);
      if (b <= a) continue;
      const double dt = model.direction() > 0 ? travel_time(model, a, b) : travel_time(model, b, a);
      occ.cell_time[c] += dt;
      covered += dt;
    }
  }
  if (duration - covered > 0) occ.outside_time += duration - covered;
}

}  // namespace

Occupation occupation_measure(const Trajectory& traj, const PdmpModel& model,
                              const std::vector<double>& grid) {
  if (grid.size() < 2) throw ConfigError("occupation_measure: grid needs at least two nodes");
  Occupation occ;
  occ.cell_time.assign(grid.size() - 1, 0.0);
  occ.total = traj.horizon;

  double t = 0, x = traj.start_state;
  size_t ie = 0, ia = 0;
  while (t < traj.horizon) {
    const double t_event = ie < traj.events.size() ? traj.events[ie].time : kInf;
    const double t_atom = ia < traj.atom_intervals.size() ? traj.atom_intervals[ia].entry : kInf;
    if (t_atom <= t) {
      const AtomInterval& iv = traj.atom_intervals[ia++];
      occ.atom_time[iv.atom] += std::min(iv.exit, traj.horizon) - iv.entry;
      t = iv.exit;
      x = iv.atom;
      continue;
    }
    const double t_end = std::min({t_event, t_atom, traj.horizon});
    if (t_end > t) {
      double x_end;
      if (t_end == t_event)
        x_end = traj.events[ie].pre;
      else if (t_end == t_atom)
        x_end = traj.atom_intervals[ia].atom;
      else
        x_end = traj.end_state;
      add_flow_segment(model, grid, x, x_end, t_end - t, occ);
      x = x_end;
      t = t_end;
    }
    if (t_end == t_event) {
      x = traj.events[ie].post;
      ++ie;
    }
  }
  return occ;
}

namespace {

template <class MakeInit>
std::vector<Trajectory> run_batch(const PdmpModel& model, MakeInit make_init, double horizon,
                                  int n_paths, uint64_t seed, int threads,
                                  const SimulateOptions& opt) {
  if (n_paths <= 0) return {};
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n_paths));

  std::vector<Trajectory> out(static_cast<size_t>(n_paths));
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (int k = next.fetch_add(1); k < n_paths; k = next.fetch_add(1)) {
      try {
        RngStream rng(seed, static_cast<uint64_t>(k));
        const double init = make_init(rng);
        out[static_cast<size_t>(k)] =
            run_path(model, init, horizon, seed, rng, opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace

std::vector<Trajectory> simulate_batch(const PdmpModel& model, double init, double horizon,
                                       int n_paths, uint64_t seed, int threads,
                                       const SimulateOptions& opt) {
  return run_batch(
      model, [init](RngStream&) { return init; }, horizon, n_paths, seed, threads, opt);
}

std::vector<Trajectory> simulate_batch_stationary(const PdmpModel& model,
                                                  const GridDensity& stationary, double horizon,
                                                  int n_paths, uint64_t seed, int threads,
                                                  const SimulateOptions& opt) {
  return run_batch(
      model, [&stationary](RngStream& rng) { return stationary.sample(rng); }, horizon, n_paths,
      seed, threads, opt);
}

}  // namespace pdmp
