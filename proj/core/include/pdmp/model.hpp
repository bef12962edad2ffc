#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/rng.hpp"

namespace pdmp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Point mass of a measure.
struct MassAtom {
  double x;
  double mass;
};

/// Interval state space [lower, upper] with an optional active exit
/// boundary and optional holding atoms (reflection devices).
///
/// The flow exits at `upper` for increasing drift and at `lower` for
/// decreasing drift; `active_boundary` refers to that exit endpoint and
/// requires it to be finite.
struct StateSpace {
  double lower = 0.0;
  double upper = kInf;
  bool active_boundary = false;
  std::vector<double> atom_locations;
};

enum class Orientation { increasing, decreasing };

struct DriftField {
  std::function<double(double)> r;
  Orientation orientation = Orientation::increasing;
  /// Optional closed forms; generic ODE/rootfinding fallbacks otherwise.
  std::function<double(double, double)> closed_form_flow;        // (x, t) -> state
  std::function<double(double)> closed_form_hit_time;            // x -> time to exit (inf if never)
  std::function<double(double, double)> closed_form_travel_time; // (x, y downstream) -> time
};

/// Markov jump kernel x -> mu_x. `density` is the continuous part,
/// `atoms` the point masses; together they must sum to 1 for every state.
/// `cdf` is the cdf of the full law (atoms included). Samplers are
/// inverse-transform based so a fixed seed reproduces exact trajectories.
/// At a jump discontinuity of y -> density(x, y) (a support edge), `density`
/// should return the average of the one-sided limits: node-sampled quadrature
/// then integrates support cut-offs that land on grid nodes exactly, matching
/// a one-sided composite rule.
struct JumpKernel {
  std::function<double(double x, double y)> density;
  std::function<double(double x, double y)> cdf;
  std::function<std::vector<MassAtom>(double x)> atoms;  // may be null: none
  std::function<double(double x, RngStream&)> sample;
  std::string support_note;

  std::vector<MassAtom> atoms_at(double x) const {
    return atoms ? atoms(x) : std::vector<MassAtom>{};
  }
};

/// Exit mechanism of a holding atom: leave by a jump with the model kernel,
/// or resume the deterministic flow (time-reversed reflection).
enum class AtomExit { jump, flow };

struct HoldingAtom {
  double exit_rate = 0.0;
  AtomExit exit = AtomExit::jump;
};

struct PdmpModel {
  std::string name;
  StateSpace space;
  DriftField drift;
  std::function<double(double)> intensity;  // lambda(x); at atoms: exit rate
  JumpKernel kernel;                        // interior states and jump-exit atoms
  std::optional<JumpKernel> boundary_kernel;  // present iff space.active_boundary
  std::map<double, HoldingAtom> atoms;        // keyed by location

  /// Optional closed-form cumulative hazard along the flow and its inverse;
  /// used to accelerate exact jump-time sampling.
  std::function<double(double x, double t)> closed_form_hazard;      // H(t | x)
  std::function<double(double x, double e)> closed_form_hazard_inv;  // t with H(t|x) = e

  /// Hint for truncating unbounded state spaces when gridding (quantile
  /// window of the stationary law); set by the model zoo.
  std::optional<std::pair<double, double>> domain_hint;

  double exit_endpoint() const {
    return drift.orientation == Orientation::increasing ? space.upper : space.lower;
  }
  double entry_endpoint() const {
    return drift.orientation == Orientation::increasing ? space.lower : space.upper;
  }
  double direction() const {
    return drift.orientation == Orientation::increasing ? 1.0 : -1.0;
  }
  bool is_atom(double x) const { return atoms.find(x) != atoms.end(); }
};

/// Advance the flow from x by time t. Throws BoundaryCrossedError (carrying
/// the hit time) if the flow reaches a finite exit endpoint before t.
double flow_advance(const PdmpModel& model, double x, double t);

/// Time for the flow to reach the exit endpoint from x; +inf when the exit
/// is never reached.
double hit_time(const PdmpModel& model, double x);

/// Time for the flow to travel from x to a downstream state y;
/// +inf when y is not downstream of x.
double travel_time(const PdmpModel& model, double x, double y);

/// Cumulative intensity along the flow: int_0^t lambda(phi(x,u)) du.
/// Requires t <= hit time.
double cumulative_hazard(const PdmpModel& model, double x, double t);

/// Smallest t with cumulative_hazard(x, t) = e. Requires e below the hazard
/// accumulated at the exit (caller handles the forced-jump branch).
double hazard_inverse(const PdmpModel& model, double x, double e);

/// Cumulative intensity between two states along the flow direction,
/// int lambda(u)/|r(u)| du over [from, to] in state coordinates.
double hazard_between(const PdmpModel& model, double from, double to);

/// Point mass mu_x({target}) of a kernel (0 when none within tolerance).
double kernel_point_mass(const JumpKernel& k, double x, double target);

/// mu_x((-inf, y)): kernel mass strictly below y.
double kernel_mass_below(const JumpKernel& k, double x, double y);

/// Mirror image x -> -x: increasing models become decreasing ones and vice
/// versa, with all laws mapped accordingly.
PdmpModel mirror_model(const PdmpModel& model);

enum class Severity { info, warning, error };

struct Diagnostic {
  Severity severity;
  std::string code;
  std::string message;
};

/// Structural and numerical checks: space invariants, kernel normalization
/// to 1e-8, absence of self-atoms, flow property of closed forms, sampler
/// versus cdf, intensity integrability probes. Conditions that have no
/// finite test (existence of the stationary law, no cascading at the
/// boundary) are reported as assumptions.
std::vector<Diagnostic> validate_model(const PdmpModel& model);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace pdmp
