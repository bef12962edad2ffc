#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "pdmp/grid_density.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

struct JumpEvent {
  double time = 0;
  double pre = 0;   // state just before the jump (left limit)
  double post = 0;  // state just after
  bool forced = false;
};

struct AtomInterval {
  double atom = 0;
  double entry = 0;
  double exit = 0;
};

struct Trajectory {
  double start_state = 0;
  double end_state = 0;
  double horizon = 0;
  std::vector<JumpEvent> events;
  std::vector<AtomInterval> atom_intervals;
  uint64_t seed = 0;
};

struct FirstJump {
  double time = 0;
  bool forced = false;  // deterministic arrival at the exit endpoint
};

// Inverts P_x{T1 > t} = 1{t < tau(x)} exp(-H(t|x)) for one draw.
FirstJump sample_first_jump(const PdmpModel& model, double x, RngStream& rng);

struct SimulateOptions {
  uint64_t explosion_cap = 10'000'000;  // events per path
};

Trajectory simulate_path(const PdmpModel& model, double init, double horizon, uint64_t seed,
                         const SimulateOptions& opt = {});
// Draws the initial state from the stationary law first (atoms included).
Trajectory simulate_path_stationary(const PdmpModel& model, const GridDensity& stationary,
                                    double horizon, uint64_t seed,
                                    const SimulateOptions& opt = {});

// Time reversal X*_t = X_{(T-t)-}. `model_of_input` is the model the input
// trajectory follows; the reversed forced flag marks arrivals at that model's
// entry endpoint. Applying it twice with the matching models is the identity.
Trajectory reverse_path(const Trajectory& traj, const PdmpModel& model_of_input);

struct Occupation {
  std::vector<double> cell_time;       // per cell [grid[i], grid[i+1])
  std::map<double, double> atom_time;  // holding time per atom
  double outside_time = 0;             // time spent off the grid
  double total = 0;                    // == horizon
};

// Exact time-in-cell from flow segment crossings (no sampling).
Occupation occupation_measure(const Trajectory& traj, const PdmpModel& model,
                              const std::vector<double>& grid);

// Deterministic batch: path k uses stream index k of `seed`, whatever the
// thread count. threads <= 0 picks the hardware default.
std::vector<Trajectory> simulate_batch(const PdmpModel& model, double init, double horizon,
                                       int n_paths, uint64_t seed, int threads = 0,
                                       const SimulateOptions& opt = {});
std::vector<Trajectory> simulate_batch_stationary(const PdmpModel& model,
                                                  const GridDensity& stationary, double horizon,
                                                  int n_paths, uint64_t seed, int threads = 0,
                                                  const SimulateOptions& opt = {});

}  // namespace pdmp
