#include "pdmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "pdmp/quadrature.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {
namespace {

constexpr double kTiny = 1e-300;

double rk4_step(const std::function<double(double)>& r, double x, double h) {
  const double k1 = r(x);
  const double k2 = r(x + 0.5 * h * k1);
  const double k3 = r(x + 0.5 * h * k2);
  const double k4 = r(x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct OdeAdvance {
  double state;
  bool crossed = false;
  double hit = kInf;
};

/// Adaptive RK4 (step doubling) for dx/dt = r(x), watching for the exit
/// endpoint. On crossing, the hit time is refined by bisection on the
/// step fraction.
OdeAdvance advance_ode(const PdmpModel& model, double x, double t) {
  const auto& r = model.drift.r;
  const double dir = model.direction();
  const double exit = model.exit_endpoint();
  const bool exit_finite = std::isfinite(exit);

  auto reached_exit = [&](double state) { return exit_finite && dir * (state - exit) >= 0.0; };

  if (reached_exit(x)) return {exit, true, 0.0};

  double elapsed = 0.0;
  double h = std::min(t, 0.125 * std::max(t, 1e-6));
  int accepted_since_raise = 0;
  while (elapsed < t) {
    h = std::min(h, t - elapsed);
    const double full = rk4_step(r, x, h);
    const double half = rk4_step(r, rk4_step(r, x, 0.5 * h), 0.5 * h);
    const double err = std::abs(full - half) / 15.0;
    const double tol = h * (1e-13 + 1e-12 * (1.0 + std::abs(x)));
    if (err > tol && h > 1e-14 * (1.0 + elapsed)) {
      h *= std::max(0.2, 0.9 * std::pow(tol / (err + kTiny), 0.2));
      accepted_since_raise = 0;
      continue;
    }
    const double x_new = half + (half - full) / 15.0;  // local extrapolation
    if (reached_exit(x_new)) {
      // Refine the crossing instant within this step.
      double lo = 0.0, hi = h;
      for (int i = 0; i < 200 && (hi - lo) > 1e-15 * (1.0 + elapsed + hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double xm = rk4_step(r, rk4_step(r, x, 0.5 * mid), 0.5 * mid);
        if (reached_exit(xm))
          hi = mid;
        else
          lo = mid;
      }
      return {exit, true, elapsed + 0.5 * (lo + hi)};
    }
    x = x_new;
    elapsed += h;
    if (++accepted_since_raise >= 2) {
      h *= std::min(5.0, 0.9 * std::pow(tol / (err + kTiny), 0.2));
      accepted_since_raise = 0;
    }
  }
  return {x, false, kInf};
}

/// Minimum |r| over a coarse sample of [a, b]; used to detect stagnation
/// points that make a downstream state unreachable.
double min_abs_drift(const PdmpModel& model, double a, double b) {
  double m = kInf;
  const int n = 65;
  for (int i = 0; i <= n; ++i) {
    const double u = a + (b - a) * static_cast<double>(i) / n;
    m = std::min(m, std::abs(model.drift.r(u)));
  }
  return m;
}

}  // namespace

double flow_advance(const PdmpModel& model, double x, double t) {
  if (!(t >= 0)) throw PdmpError("flow_advance: negative time");
  if (t == 0.0) return x;
  if (model.drift.closed_form_flow) {
    const double tau = hit_time(model, x);
    if (t > tau) {
      std::ostringstream os;
      os << "flow_advance: flow from " << x << " crosses the boundary at " << tau << " < " << t;
      throw BoundaryCrossedError(os.str(), tau);
    }
    return model.drift.closed_form_flow(x, t);
  }
  const OdeAdvance res = advance_ode(model, x, t);
  if (res.crossed) {
    std::ostringstream os;
    os << "flow_advance: flow from " << x << " crosses the boundary at " << res.hit << " < " << t;
    throw BoundaryCrossedError(os.str(), res.hit);
  }
  return res.state;
}

double hit_time(const PdmpModel& model, double x) {
  if (model.drift.closed_form_hit_time) return model.drift.closed_form_hit_time(x);
  const double exit = model.exit_endpoint();
  if (!std::isfinite(exit)) return kInf;
  const double dir = model.direction();
  if (dir * (x - exit) >= 0.0) return 0.0;

  double elapsed = 0.0;
  double state = x;
  double chunk = 1.0;
  for (int k = 0; k < 48; ++k) {
    const OdeAdvance res = advance_ode(model, state, chunk);
    if (res.crossed) return elapsed + res.hit;
    state = res.state;
    elapsed += chunk;
    // Asymptotic approach: drift collapsing near the boundary.
    const double dist = std::abs(exit - state);
    const double speed = std::abs(model.drift.r(state));
    if (speed < 1e-14 * (1.0 + dist) || elapsed > 1e12) return kInf;
    chunk *= 2.0;
  }
  return kInf;
}

double travel_time(const PdmpModel& model, double x, double y) {
  if (x == y) return 0.0;
  const double dir = model.direction();
  if (dir * (y - x) < 0.0) return kInf;  // upstream
  if (model.drift.closed_form_travel_time) return model.drift.closed_form_travel_time(x, y);
  const double a = std::min(x, y), b = std::max(x, y);
  if (min_abs_drift(model, a, b) < 1e-14) return kInf;  // stagnation in between
  return integrate([&](double u) { return 1.0 / std::abs(model.drift.r(u)); }, a, b);
}

double hazard_between(const PdmpModel& model, double from, double to) {
  if (from == to) return 0.0;
  const double a = std::min(from, to), b = std::max(from, to);
  if (min_abs_drift(model, a, b) < 1e-14) return kInf;
  return integrate([&](double u) { return model.intensity(u) / std::abs(model.drift.r(u)); }, a,
                   b);
}

double cumulative_hazard(const PdmpModel& model, double x, double t) {
  if (t == 0.0) return 0.0;
  if (model.closed_form_hazard) return model.closed_form_hazard(x, t);
  const double y = flow_advance(model, x, t);  // throws past the boundary
  return hazard_between(model, x, y);
}

double hazard_inverse(const PdmpModel& model, double x, double e) {
  if (!(e >= 0)) throw PdmpError("hazard_inverse: negative target");
  if (e == 0.0) return 0.0;
  if (model.closed_form_hazard_inv) return model.closed_form_hazard_inv(x, e);

  const double dir = model.direction();
  const double exit = model.exit_endpoint();
  auto hazard_to = [&](double y) { return hazard_between(model, x, y); };

  // Bracket the target in state coordinates (monotone along the flow).
  double hi;
  if (std::isfinite(exit)) {
    hi = exit;
    if (hazard_to(hi) < e)
      throw PdmpError("hazard_inverse: target exceeds the hazard available before the boundary");
  } else {
    double step = 1.0 + 0.1 * std::abs(x);
    hi = x + dir * step;
    int grow = 0;
    while (hazard_to(hi) < e) {
      step *= 2.0;
      hi += dir * step;
      if (++grow > 80)
        throw PdmpError("hazard_inverse: cumulative hazard never reaches the requested level");
    }
  }
  const double lo = std::min(x, hi), up = std::max(x, hi);
  const double y = bisect_root([&](double u) { return hazard_to(u) - e; }, lo, up,
                               1e-13 * (1.0 + up - lo));
  return travel_time(model, x, y);
}

double kernel_point_mass(const JumpKernel& k, double x, double target) {
  double m = 0;
  for (const auto& a : k.atoms_at(x))
    if (std::abs(a.x - target) <= 1e-12 * (1.0 + std::abs(target))) m += a.mass;
  return m;
}

double kernel_mass_below(const JumpKernel& k, double x, double y) {
  if (!std::isfinite(y)) return y > 0 ? 1.0 : 0.0;
  double c = std::clamp(k.cdf(x, y), 0.0, 1.0) - kernel_point_mass(k, x, y);
  return std::clamp(c, 0.0, 1.0);
}

PdmpModel mirror_model(const PdmpModel& model) {
  auto base = std::make_shared<const PdmpModel>(model);
  PdmpModel m;
  m.name = model.name + "_mirrored";

  m.space.lower = -model.space.upper;
  m.space.upper = -model.space.lower;
  m.space.active_boundary = model.space.active_boundary;
  for (double a : model.space.atom_locations) m.space.atom_locations.push_back(-a);
  std::sort(m.space.atom_locations.begin(), m.space.atom_locations.end());

  m.drift.orientation = model.drift.orientation == Orientation::increasing
                            ? Orientation::decreasing
                            : Orientation::increasing;
  m.drift.r = [base](double y) { return -base->drift.r(-y); };
  if (model.drift.closed_form_flow)
    m.drift.closed_form_flow = [base](double y, double t) {
      return -base->drift.closed_form_flow(-y, t);
    };
  if (model.drift.closed_form_hit_time)
    m.drift.closed_form_hit_time = [base](double y) { return base->drift.closed_form_hit_time(-y); };
  if (model.drift.closed_form_travel_time)
    m.drift.closed_form_travel_time = [base](double y, double z) {
      return base->drift.closed_form_travel_time(-y, -z);
    };

  m.intensity = [base](double y) { return base->intensity(-y); };

  auto mirror_kernel = [base](const JumpKernel& k) {
    JumpKernel out;
    out.support_note = k.support_note.empty() ? "" : k.support_note + " (mirrored)";
    out.density = [k](double x, double y) { return k.density(-x, -y); };
    out.cdf = [k](double x, double y) {
      // P(-Y <= y) = 1 - P(Y < -y); remove any point mass at -y from the cdf.
      double mass_at = 0.0;
      if (k.atoms)
        for (const auto& a : k.atoms(-x))
          if (a.x == -y) mass_at += a.mass;
      return 1.0 - (k.cdf(-x, -y) - mass_at);
    };
    if (k.atoms)
      out.atoms = [k](double x) {
        auto list = k.atoms(-x);
        for (auto& a : list) a.x = -a.x;
        std::sort(list.begin(), list.end(), [](const MassAtom& p, const MassAtom& q) { return p.x < q.x; });
        return list;
      };
    if (k.sample)
      out.sample = [k](double x, RngStream& rng) { return -k.sample(-x, rng); };
    return out;
  };
  m.kernel = mirror_kernel(model.kernel);
  if (model.boundary_kernel) m.boundary_kernel = mirror_kernel(*model.boundary_kernel);

  for (const auto& [loc, atom] : model.atoms) m.atoms[-loc] = atom;

  if (model.closed_form_hazard)
    m.closed_form_hazard = [base](double y, double t) { return base->closed_form_hazard(-y, t); };
  if (model.closed_form_hazard_inv)
    m.closed_form_hazard_inv = [base](double y, double e) {
      return base->closed_form_hazard_inv(-y, e);
    };
  if (model.domain_hint)
    m.domain_hint = std::make_pair(-model.domain_hint->second, -model.domain_hint->first);
  return m;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

namespace {

void check_kernel_at(const PdmpModel& model, const JumpKernel& kernel, double x,
                     const std::string& tag, std::vector<Diagnostic>& out) {
  double lo = model.space.lower, hi = model.space.upper;
  if (model.domain_hint) {
    lo = std::isfinite(lo) ? lo : model.domain_hint->first - 10.0;
    hi = std::isfinite(hi) ? hi : model.domain_hint->second + 10.0;
  } else {
    const double scale = 1.0 + std::abs(x);
    if (!std::isfinite(lo)) lo = x - 60.0 * scale;
    if (!std::isfinite(hi)) hi = x + 60.0 * scale;
  }

  double mass = 0.0;
  const auto atoms = kernel.atoms_at(x);
  for (const auto& a : atoms) {
    mass += a.mass;
    if (a.x == x)
      out.push_back({Severity::error, "kernel.self_atom",
                     tag + ": jump law at x=" + std::to_string(x) + " has positive mass at x"});
  }
  // Split at x: jump densities routinely have a kink or support edge there.
  mass += integrate([&](double y) { return kernel.density(x, y); }, lo, std::min(std::max(x, lo), hi));
  mass += integrate([&](double y) { return kernel.density(x, y); }, std::min(std::max(x, lo), hi), hi);
  if (std::abs(mass - 1.0) > 1e-8)
    out.push_back({Severity::error, "kernel.normalization",
                   tag + ": jump law at x=" + std::to_string(x) + " has total mass " +
                       std::to_string(mass)});

  if (kernel.sample && kernel.cdf) {
    RngStream rng(0xBADC0FFEULL, 7);
    const std::size_t n = 4000;
    std::vector<double> draws(n);
    for (auto& d : draws) d = kernel.sample(x, rng);
    auto point_mass = [&](double y) {
      double m = 0.0;
      for (const auto& a : atoms)
        if (a.x == y) m += a.mass;
      return m;
    };
    const double d = ks_statistic(draws, [&](double y) { return kernel.cdf(x, y); }, point_mass);
    if (d > ks_critical(0.01, n))
      out.push_back({Severity::warning, "kernel.sampler_mismatch",
                     tag + ": sampler vs cdf KS=" + std::to_string(d) + " at x=" +
                         std::to_string(x)});
  }
}

}  // namespace

std::vector<Diagnostic> validate_model(const PdmpModel& model) {
  std::vector<Diagnostic> out;
  const auto& sp = model.space;

  if (!(sp.lower < sp.upper))
    out.push_back({Severity::error, "space.order", "state space requires lower < upper"});
  const double exit = model.exit_endpoint();
  if (sp.active_boundary && !std::isfinite(exit))
    out.push_back({Severity::error, "space.active_infinite",
                   "active boundary requires a finite exit endpoint"});
  if (sp.active_boundary && !model.boundary_kernel)
    out.push_back({Severity::error, "space.boundary_kernel_missing",
                   "active boundary requires a boundary jump law"});
  if (!sp.active_boundary && model.boundary_kernel)
    out.push_back({Severity::warning, "space.boundary_kernel_unused",
                   "boundary jump law present but the boundary is not active"});

  for (double a : sp.atom_locations) {
    if (a < sp.lower || a > sp.upper)
      out.push_back({Severity::error, "space.atom_outside",
                     "holding atom at " + std::to_string(a) + " outside the state space"});
    auto it = model.atoms.find(a);
    if (it == model.atoms.end())
      out.push_back({Severity::error, "space.atom_unspecified",
                     "holding atom at " + std::to_string(a) + " has no exit specification"});
    else if (!(it->second.exit_rate > 0))
      out.push_back({Severity::error, "space.atom_rate",
                     "holding atom at " + std::to_string(a) + " needs a positive exit rate"});
  }
  for (const auto& [loc, atom] : model.atoms)
    if (std::find(sp.atom_locations.begin(), sp.atom_locations.end(), loc) ==
        sp.atom_locations.end())
      out.push_back({Severity::error, "space.atom_unlisted",
                     "atom at " + std::to_string(loc) + " missing from the state space"});
  if (has_errors(out)) return out;  // structural problems make probes meaningless

  // Probe states across the (possibly truncated) interior.
  double plo = sp.lower, phi = sp.upper;
  if (model.domain_hint) {
    plo = std::max(plo, model.domain_hint->first);
    phi = std::min(phi, model.domain_hint->second);
  }
  if (!std::isfinite(phi)) phi = (std::isfinite(plo) ? plo : 0.0) + 20.0;
  if (!std::isfinite(plo)) plo = phi - 20.0;
  std::vector<double> probes;
  for (double q : {0.15, 0.35, 0.55, 0.8}) {
    const double x = plo + q * (phi - plo);
    if (!model.is_atom(x)) probes.push_back(x);
  }

  const double dir = model.direction();
  for (double x : probes) {
    const double r = model.drift.r(x);
    if (dir * r < 0)
      out.push_back({Severity::error, "drift.orientation",
                     "drift sign at x=" + std::to_string(x) + " contradicts the orientation"});
    if (model.intensity(x) < 0)
      out.push_back({Severity::error, "intensity.negative",
                     "negative intensity at x=" + std::to_string(x)});
  }

  // Flow property phi(phi(x,t),s) = phi(x,t+s) and closed-form consistency.
  for (double x : probes) {
    const double tau = hit_time(model, x);
    const double t_total = std::min(0.5 * (std::isfinite(tau) ? tau : 2.0), 1.0);
    if (t_total <= 0) continue;
    try {
      const double one = flow_advance(model, x, t_total);
      const double two = flow_advance(model, flow_advance(model, x, 0.4 * t_total), 0.6 * t_total);
      if (std::abs(one - two) > 1e-9 * (1.0 + std::abs(one)))
        out.push_back({Severity::error, "flow.semigroup",
                       "flow property fails at x=" + std::to_string(x) + ": " +
                           std::to_string(one) + " vs " + std::to_string(two)});
      if (model.drift.closed_form_flow) {
        PdmpModel numeric = model;
        numeric.drift.closed_form_flow = nullptr;
        numeric.drift.closed_form_hit_time = nullptr;
        const double ode = flow_advance(numeric, x, t_total);
        if (std::abs(one - ode) > 1e-7 * (1.0 + std::abs(one)))
          out.push_back({Severity::error, "flow.closed_form",
                         "closed-form flow disagrees with the ODE solution at x=" +
                             std::to_string(x)});
      }
    } catch (const BoundaryCrossedError&) {
      out.push_back({Severity::warning, "flow.hit_time",
                     "hit_time underestimates the boundary crossing near x=" + std::to_string(x)});
    }
    // Local integrability of the hazard along the flow.
    const double h_small = cumulative_hazard(model, x, std::min(0.1, 0.25 * t_total));
    if (!std::isfinite(h_small))
      out.push_back({Severity::error, "intensity.local_integrability",
                     "cumulative hazard blows up instantly at x=" + std::to_string(x)});
  }

  // Hazard must accumulate without bound when the flow never exits.
  if (!sp.active_boundary && !probes.empty()) {
    const double x = probes.front();
    if (!std::isfinite(hit_time(model, x))) {
      bool grows = false;
      try {
        grows = hazard_between(model, x, x + dir * std::max(1.0, 20.0 * (phi - plo))) > 5.0;
      } catch (...) {
      }
      if (!grows)
        out.push_back({Severity::warning, "intensity.growth",
                       "hazard along the flow grows slowly; survival past any horizon may "
                       "have positive mass"});
    }
  }

  for (double x : probes) check_kernel_at(model, model.kernel, x, "interior kernel", out);
  if (model.boundary_kernel)
    check_kernel_at(model, *model.boundary_kernel, exit, "boundary kernel", out);
  for (const auto& [loc, atom] : model.atoms)
    if (atom.exit == AtomExit::jump) check_kernel_at(model, model.kernel, loc, "atom exit law", out);

  out.push_back({Severity::info, "assumption.stationary_law",
                 "existence of a stationary law is assumed, not tested"});
  out.push_back({Severity::info, "assumption.no_boundary_cascade",
                 "absence of cascading jumps near the boundary is assumed, not tested"});
  return out;
}

}  // namespace pdmp
