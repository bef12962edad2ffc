#include "pdmp/zoo.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <memory>

#include "pdmp/errors.hpp"

namespace pdmp {
namespace {

const RealFn kZeroFn = [](double) { return 0.0; };
const Real2Fn kZero2Fn = [](double, double) { return 0.0; };

double safe_hazard(const Dist& d, double x) {
  const double s = d.sf(x);
  if (s <= 1e-290) return 1e12;  // past any mass the solver or sampler visits
  return d.pdf(x) / s;
}

// ---------------------------------------------------------------- renewal

void check_renewal(const RenewalAgeSpec& spec) {
  if (!(spec.lifetime.lo >= 0))
    throw ConfigError("renewal_age: lifetime law must live on [0, inf)");
  if (!(spec.lifetime.mean > 0) || !std::isfinite(spec.lifetime.mean))
    throw ConfigError("renewal_age: lifetime law needs a finite positive mean");
}

double renewal_window_hi(const Dist& F) {
  // Tail mass of the stationary age law: int_x^inf sf / mean = 1e-8.
  const double m = F.mean;
  auto tail = [&](double x) { return integrate_to_inf([&](double u) { return F.sf(u); }, x) / m; };
  double hi = std::max(m, 1.0);
  while (tail(hi) > 1e-8) hi *= 2.0;
  return bisect_root([&](double x) { return tail(x) - 1e-8; }, hi / 2.0, hi, 1e-9 * hi);
}

ClosedForms renewal_cf(const RenewalAgeSpec& spec) {
  const Dist F = spec.lifetime;
  const double m = F.mean;
  ClosedForms cf;
  cf.window_lo = 0.0;
  cf.window_hi = renewal_window_hi(F);
  cf.nu_pdf = [F, m](double x) { return x < 0 ? 0.0 : F.sf(x) / m; };
  cf.nu_cdf = [F, m](double x) {
    if (x <= 0) return 0.0;
    return integrate([&](double u) { return F.sf(u); }, 0.0, x) / m;
  };
  const double whi = cf.window_hi;
  auto cdf = cf.nu_cdf;
  cf.nu_quantile = [cdf, whi](double u) {
    double hi = whi;
    while (cdf(hi) < u) hi *= 2.0;
    return bisect_root([&](double x) { return cdf(x) - u; }, 0.0, hi, 1e-11 * (1.0 + hi));
  };
  cf.sigma_gamma = 0.0;
  cf.xi_norm = 1.0 / m;

  cf.lambda_star = kZeroFn;
  cf.kernel_star_pdf = kZero2Fn;
  cf.kernel_star_cdf = kZero2Fn;
  cf.kernel_star_exit_mass = kZeroFn;
  cf.kernel_star_atom_mass = kZeroFn;
  cf.sigma_star = {{0.0, 1.0 / m}};
  cf.boundary_law_star_pdf = [F](double y) { return F.pdf(y); };
  cf.boundary_law_star_cdf = [F](double y) { return F.cdf(y); };

  cf.pi_w_pdf = [F](double x) { return F.pdf(x); };
  cf.pi_w_cdf = [F](double x) { return F.cdf(x); };
  cf.pi_q_pdf = kZeroFn;
  cf.pi_q_cdf = [](double y) { return y >= 0 ? 1.0 : 0.0; };
  cf.pi_q_atoms = {{0.0, 1.0}};
  return cf;
}

PdmpModel build_renewal(const RenewalAgeSpec& spec) {
  check_renewal(spec);
  const Dist F = spec.lifetime;
  PdmpModel m;
  m.name = "renewal_age";
  m.space.lower = 0.0;
  m.space.upper = kInf;
  m.drift.orientation = Orientation::increasing;
  m.drift.r = [](double) { return 1.0; };
  m.drift.closed_form_flow = [](double x, double t) { return x + t; };
  m.drift.closed_form_hit_time = [](double) { return kInf; };
  m.drift.closed_form_travel_time = [](double x, double y) { return y - x; };
  m.intensity = [F](double x) { return safe_hazard(F, x); };

  m.kernel.support_note = "reset to zero";
  m.kernel.density = kZero2Fn;
  m.kernel.cdf = [](double, double y) { return y >= 0 ? 1.0 : 0.0; };
  m.kernel.atoms = [](double) { return std::vector<MassAtom>{{0.0, 1.0}}; };
  m.kernel.sample = [](double, RngStream&) { return 0.0; };

  // H(t | x) = ln sf(x) - ln sf(x+t): age survives while the lifetime does.
  m.closed_form_hazard = [F](double x, double t) {
    const double s1 = F.sf(x + t);
    if (s1 <= 0) return kInf;
    return std::log(F.sf(x)) - std::log(s1);
  };
  m.closed_form_hazard_inv = [F](double x, double e) {
    const double target = std::max(F.sf(x) * std::exp(-e), 5e-324);
    return F.quantile_tail(target) - x;
  };

  const ClosedForms cf = renewal_cf(spec);
  m.domain_hint = std::make_pair(cf.window_lo, cf.window_hi);
  return m;
}

// -------------------------------------------------------------------- tcp

struct TcpDerived {
  double p, q, s, C;
};

TcpDerived tcp_derived(const TcpSpec& t) {
  TcpDerived d;
  d.p = t.beta_exp - t.alpha + 1.0;
  d.q = t.lambda0 / (t.r0 * d.p);
  d.s = t.g - t.alpha + 1.0;
  d.C = d.p * std::pow(d.q, d.s / d.p) / boost::math::tgamma(d.s / d.p);
  return d;
}

void check_tcp(const TcpSpec& t) {
  if (!(t.lambda0 > 0) || !(t.r0 > 0) || !(t.g > 0))
    throw ConfigError("tcp: lambda0, r0 and g must be > 0");
  if (!(t.beta_exp > t.alpha - 1.0))
    throw ConfigError("tcp: requires beta_exp > alpha - 1 (stationarity)");
  if (!(t.g > t.alpha - 1.0))
    throw ConfigError("tcp: requires g > alpha - 1 (integrable stationary density)");
  if (!(t.alpha >= 0) || !(t.alpha <= 1))
    throw ConfigError("tcp: alpha outside [0, 1] (finite-time blow-up of the flow)");
}

ClosedForms tcp_cf(const TcpSpec& t) {
  const TcpDerived d = tcp_derived(t);
  const double p = d.p, q = d.q, s = d.s, C = d.C;
  const double r0 = t.r0, l0 = t.lambda0, g = t.g, alpha = t.alpha, beta = t.beta_exp;

  ClosedForms cf;
  cf.window_lo =
      t.g >= t.alpha ? 0.0 : std::pow(boost::math::gamma_p_inv(s / p, 1e-8) / q, 1.0 / p);
  cf.window_hi = std::pow(boost::math::gamma_q_inv(s / p, 1e-8) / q, 1.0 / p);

  cf.nu_pdf = [C, s, q, p](double x) {
    if (x < 0) return 0.0;
    if (x == 0) return s > 1 ? 0.0 : (s == 1 ? C : kInf);
    return C * std::pow(x, s - 1.0) * std::exp(-q * std::pow(x, p));
  };
  cf.nu_cdf = [s, q, p](double x) {
    return x <= 0 ? 0.0 : boost::math::gamma_p(s / p, q * std::pow(x, p));
  };
  cf.nu_quantile = [s, q, p](double u) {
    return std::pow(boost::math::gamma_p_inv(s / p, u) / q, 1.0 / p);
  };
  cf.sigma_gamma = 0.0;
  // ||xi|| = int lambda d nu = lambda0 C Gamma(g/p + 1) / (p q^{g/p + 1}).
  cf.xi_norm = l0 * C * boost::math::tgamma(g / p + 1.0) / (p * std::pow(q, g / p + 1.0));

  cf.lambda_star = [r0, g, alpha](double x) { return x <= 0 ? kInf : r0 * g * std::pow(x, alpha - 1.0); };
  cf.kernel_star_pdf = [l0, r0, beta, alpha, q, p](double x, double y) {
    if (y <= x) return 0.0;
    return l0 / r0 * std::pow(y, beta - alpha) *
           std::exp(-q * (std::pow(y, p) - std::pow(x, p)));
  };
  cf.kernel_star_cdf = [q, p](double x, double y) {
    if (y <= x) return 0.0;
    return -std::expm1(-q * (std::pow(y, p) - std::pow(x, p)));
  };
  cf.kernel_star_exit_mass = kZeroFn;
  cf.kernel_star_atom_mass = kZeroFn;

  const double xi = cf.xi_norm;
  cf.pi_w_pdf = [l0, C, beta, s, q, p, xi](double x) {
    return x <= 0 ? 0.0 : l0 * C * std::pow(x, beta + s - 1.0) * std::exp(-q * std::pow(x, p)) / xi;
  };
  cf.pi_w_cdf = [g, q, p](double x) {
    return x <= 0 ? 0.0 : boost::math::gamma_p(g / p + 1.0, q * std::pow(x, p));
  };
  cf.pi_q_pdf = [r0, g, C, q, p, xi](double x) {
    return x <= 0 ? 0.0 : r0 * g * C * std::pow(x, g - 1.0) * std::exp(-q * std::pow(x, p)) / xi;
  };
  cf.pi_q_cdf = [g, q, p](double x) {
    return x <= 0 ? 0.0 : boost::math::gamma_p(g / p, q * std::pow(x, p));
  };
  return cf;
}

PdmpModel build_tcp(const TcpSpec& t) {
  check_tcp(t);
  const TcpDerived d = tcp_derived(t);
  const double alpha = t.alpha, g = t.g, l0 = t.lambda0, r0 = t.r0, beta = t.beta_exp;
  const double p = d.p, q = d.q;

  PdmpModel m;
  m.name = "tcp";
  m.space.lower = 0.0;
  m.space.upper = kInf;
  m.drift.orientation = Orientation::increasing;
  m.drift.r = [r0, alpha](double x) { return x <= 0 ? 0.0 : r0 * std::pow(x, alpha); };
  if (alpha == 1.0) {
    m.drift.closed_form_flow = [r0](double x, double tt) { return x * std::exp(r0 * tt); };
    m.drift.closed_form_travel_time = [r0](double x, double y) { return std::log(y / x) / r0; };
  } else {
    m.drift.closed_form_flow = [r0, alpha](double x, double tt) {
      return std::pow(std::pow(x, 1.0 - alpha) + r0 * (1.0 - alpha) * tt, 1.0 / (1.0 - alpha));
    };
    m.drift.closed_form_travel_time = [r0, alpha](double x, double y) {
      return (std::pow(y, 1.0 - alpha) - std::pow(x, 1.0 - alpha)) / (r0 * (1.0 - alpha));
    };
  }
  m.drift.closed_form_hit_time = [](double) { return kInf; };
  m.intensity = [l0, beta](double x) { return x <= 0 ? (beta > 0 ? 0.0 : (beta == 0 ? l0 : kInf)) : l0 * std::pow(x, beta); };

  m.kernel.support_note = "multiplicative down-jumps, cdf (y/x)^g";
  m.kernel.density = [g](double x, double y) {
    // The interior support edge y == x uses the nodal midpoint convention
    // (half the one-sided limit): node-sampled quadrature then treats a
    // cut-off landing exactly on a grid node the same way a one-sided
    // composite rule would. The y == 0 edge coincides with the state-space
    // boundary, where grid endpoints already carry one-sided weights, so it
    // keeps the full limit.
    if (x <= 0 || y < 0 || y > x) return 0.0;
    const double v = g * std::pow(y, g - 1.0) / std::pow(x, g);
    return y == x ? 0.5 * v : v;
  };
  m.kernel.cdf = [g](double x, double y) {
    if (y <= 0) return 0.0;
    if (y >= x) return 1.0;
    return std::pow(y / x, g);
  };
  m.kernel.sample = [g](double x, RngStream& rng) { return x * std::pow(rng.uniform01(), 1.0 / g); };

  const auto travel = m.drift.closed_form_travel_time;
  m.closed_form_hazard = [q, p, flow = m.drift.closed_form_flow](double x, double tt) {
    return q * (std::pow(flow(x, tt), p) - std::pow(x, p));
  };
  m.closed_form_hazard_inv = [q, p, travel](double x, double e) {
    const double y = std::pow(std::pow(x, p) + e / q, 1.0 / p);
    return travel(x, y);
  };

  const ClosedForms cf = tcp_cf(t);
  m.domain_hint = std::make_pair(cf.window_lo, cf.window_hi);
  return m;
}

// ------------------------------------------------------------ indep_jumps

void check_indep(const IndepJumpsSpec& spec) {
  if (!spec.jump.pdf || !spec.jump.cdf) throw ConfigError("indep_jumps: jump law needs a density");
  if (!std::isfinite(spec.jump.lo))
    throw ConfigError("indep_jumps: jump law support must be bounded below");
}

// int_{lo}^{x} e^u f(u) du; closed form for the uniform family.
RealFn indep_inner_integral(const Dist& mu) {
  if (mu.family == DistFamily::uniform) {
    const double a = mu.param1, b = mu.param2;
    return [a, b](double x) {
      if (x <= a) return 0.0;
      return (std::exp(std::min(x, b)) - std::exp(a)) / (b - a);
    };
  }
  return [mu](double x) {
    if (x <= mu.lo) return 0.0;
    const double top = std::min(x, mu.hi);
    return integrate([&](double u) { return std::exp(u) * mu.pdf(u); }, mu.lo, top);
  };
}

ClosedForms indep_cf(const IndepJumpsSpec& spec) {
  const Dist mu = spec.jump;
  const RealFn inner = indep_inner_integral(mu);
  const double lo = mu.lo;
  const bool active = std::isfinite(mu.hi);
  const double gamma = mu.hi;

  auto unnorm = [inner, lo](double x) { return x <= lo ? 0.0 : std::exp(-x) * inner(x); };
  const double Z = active ? integrate(unnorm, lo, gamma)
                          : integrate_to_inf(unnorm, lo);

  ClosedForms cf;
  cf.window_lo = lo;
  if (active) {
    cf.window_hi = gamma;
  } else {
    double hi = lo + std::max(1.0, mu.mean - lo);
    while (integrate_to_inf(unnorm, hi) > 1e-8 * Z) hi *= 2.0;
    cf.window_hi = hi;
  }

  cf.nu_pdf = [unnorm, Z](double x) { return unnorm(x) / Z; };
  cf.nu_cdf = [unnorm, Z, lo](double x) {
    return x <= lo ? 0.0 : integrate(unnorm, lo, x) / Z;
  };
  {
    auto cdf = cf.nu_cdf;
    const double qlo = cf.window_lo, qhi = cf.window_hi;
    cf.nu_quantile = [cdf, qlo, qhi](double u) {
      return bisect_root([&](double x) { return cdf(x) - u; }, qlo, qhi,
                         1e-11 * (1.0 + qhi - qlo));
    };
  }
  cf.xi_norm = 1.0 / Z;
  cf.sigma_gamma = active ? cf.nu_pdf(gamma) : 0.0;

  const double xi = cf.xi_norm;
  auto nu_pdf = cf.nu_pdf;
  auto nu_cdf = cf.nu_cdf;
  cf.lambda_star = [mu, unnorm](double x) {
    const double u = unnorm(x);
    return u <= 0 ? kInf : mu.pdf(x) / u;
  };
  cf.kernel_star_pdf = [nu_pdf, xi](double, double y) { return nu_pdf(y) / xi; };
  cf.kernel_star_cdf = [nu_cdf, xi](double, double y) { return nu_cdf(y) / xi; };
  cf.kernel_star_exit_mass =
      active ? RealFn([sg = cf.sigma_gamma, xi](double) { return sg / xi; }) : kZeroFn;
  cf.kernel_star_atom_mass = kZeroFn;

  cf.pi_w_pdf = [nu_pdf, xi](double x) { return nu_pdf(x) / xi; };
  cf.pi_w_cdf = [nu_cdf, xi](double x) { return nu_cdf(x) / xi; };
  if (active) cf.pi_w_atoms = {{gamma, cf.sigma_gamma / xi}};
  cf.pi_q_pdf = [mu](double y) { return mu.pdf(y); };
  cf.pi_q_cdf = [mu](double y) { return mu.cdf(y); };
  return cf;
}

PdmpModel build_indep(const IndepJumpsSpec& spec) {
  check_indep(spec);
  const Dist mu = spec.jump;
  const bool active = std::isfinite(mu.hi);

  PdmpModel m;
  m.name = "indep_jumps";
  m.space.lower = mu.lo;
  m.space.upper = active ? mu.hi : kInf;
  m.space.active_boundary = active;
  m.drift.orientation = Orientation::increasing;
  m.drift.r = [](double) { return 1.0; };
  m.drift.closed_form_flow = [](double x, double t) { return x + t; };
  m.drift.closed_form_hit_time = [active, hi = mu.hi](double x) { return active ? hi - x : kInf; };
  m.drift.closed_form_travel_time = [](double x, double y) { return y - x; };
  m.intensity = [](double) { return 1.0; };

  JumpKernel k;
  k.support_note = "state-independent targets ~ " + mu.name;
  k.density = [mu](double, double y) { return mu.pdf(y); };
  k.cdf = [mu](double, double y) { return mu.cdf(y); };
  k.sample = [mu](double, RngStream& rng) { return mu.sample(rng); };
  m.kernel = k;
  if (active) m.boundary_kernel = k;

  m.closed_form_hazard = [](double, double t) { return t; };
  m.closed_form_hazard_inv = [](double, double e) { return e; };

  const ClosedForms cf = indep_cf(spec);
  m.domain_hint = std::make_pair(cf.window_lo, cf.window_hi);
  return m;
}

// ---------------------------------------------------------- reflected_mg1

void check_mg1(const ReflectedMg1Spec& spec) {
  if (!(spec.lambda0 > 0)) throw ConfigError("reflected_mg1: lambda0 must be > 0");
  if (!(spec.service.lo >= 0))
    throw ConfigError("reflected_mg1: service law must live on [0, inf)");
  const double rho = spec.lambda0 * spec.service.mean;
  if (!(rho < 1))
    throw ConfigError("reflected_mg1: utilization lambda0 * mean service = " +
                      std::to_string(rho) + " must be < 1");
}

double mg1_window_hi(const ReflectedMg1Spec& spec) {
  const double l0 = spec.lambda0;
  const Dist& F = spec.service;
  const double rho = l0 * F.mean;
  if (F.family == DistFamily::exponential) {
    const double D = F.param1 - l0;
    return std::max(std::log(std::max(rho, 1e-6) * 1e8) / D, 2.0 * F.mean);
  }
  // Light-tail decay exponent: smallest theta with
  // lambda0 int e^{theta u} sf(u) du = 1.
  auto transform = [&](double theta) {
    const double v =
        l0 * integrate_to_inf(
                 [&](double u) {
                   const double s = F.sf(u);
                   return s == 0.0 ? 0.0 : std::exp(theta * u) * s;
                 },
                 0.0);
    return std::isfinite(v) ? v : 1e30;
  };
  double theta_hi = (1.0 - rho) / F.mean;
  int grow = 0;
  while (transform(theta_hi) < 1.0 && grow++ < 60) theta_hi *= 2.0;
  if (transform(theta_hi) < 1.0) return 200.0 * F.mean / (1.0 - rho);  // heavy tail fallback
  const double theta =
      bisect_root([&](double th) { return transform(th) - 1.0; }, 0.0, theta_hi, 1e-10 * theta_hi);
  if (!(theta > 0)) return 200.0 * F.mean / (1.0 - rho);
  return std::max(21.0 / theta, 2.0 * F.mean);
}

std::optional<ClosedForms> mg1_cf(const ReflectedMg1Spec& spec) {
  if (spec.service.family != DistFamily::exponential) return std::nullopt;
  const double l0 = spec.lambda0;
  const double mu_rate = spec.service.param1;
  const double D = mu_rate - l0;
  const double rho = l0 / mu_rate;
  const double m0 = 1.0 - rho;
  // ||xi|| = int lambda d nu over the full law (atom included) = lambda0.
  const double xi = l0;

  ClosedForms cf;
  cf.window_lo = 0.0;
  cf.window_hi = mg1_window_hi(spec);
  cf.nu_pdf = [l0, m0, D](double x) { return x < 0 ? 0.0 : l0 * m0 * std::exp(-D * x); };
  cf.nu_atoms = {{0.0, m0}};
  cf.nu_cdf = [m0, rho, D](double x) {
    if (x < 0) return 0.0;
    return m0 + rho * (-std::expm1(-D * x));
  };
  cf.nu_quantile = [m0, rho, D](double u) {
    if (u <= m0) return 0.0;
    return -std::log1p(-(u - m0) / rho) / D;
  };
  cf.sigma_gamma = 0.0;
  cf.xi_norm = xi;

  cf.lambda_star = [mu_rate](double) { return mu_rate; };
  cf.lambda_star_atoms = {{0.0, l0}};
  cf.kernel_star_pdf = [l0](double x, double y) {
    if (y <= 0 || y >= x) return 0.0;
    return l0 * std::exp(-l0 * (x - y));
  };
  cf.kernel_star_cdf = [l0](double x, double y) {
    if (y <= 0 || x <= 0) return 0.0;
    const double top = std::min(y, x);
    return std::exp(-l0 * (x - top)) - std::exp(-l0 * x);
  };
  cf.kernel_star_exit_mass = kZeroFn;
  cf.kernel_star_atom_mass = [l0](double x) { return x <= 0 ? 1.0 : std::exp(-l0 * x); };

  // PASTA: constant arrival intensity, so pi_W = nu exactly.
  cf.pi_w_pdf = cf.nu_pdf;
  cf.pi_w_cdf = cf.nu_cdf;
  cf.pi_w_atoms = {{0.0, m0}};
  // Landings z + Exp(mu_rate) under nu collapse to Exp(D), no atom.
  cf.pi_q_pdf = [mu_rate, m0, D](double x) {
    return x < 0 ? 0.0 : mu_rate * m0 * std::exp(-D * x);
  };
  cf.pi_q_cdf = [D](double x) { return x < 0 ? 0.0 : -std::expm1(-D * x); };
  return cf;
}

PdmpModel build_mg1(const ReflectedMg1Spec& spec) {
  check_mg1(spec);
  const double l0 = spec.lambda0;
  const Dist F = spec.service;

  PdmpModel m;
  m.name = "reflected_mg1";
  m.space.lower = 0.0;
  m.space.upper = kInf;
  m.space.atom_locations = {0.0};
  m.atoms[0.0] = HoldingAtom{l0, AtomExit::jump};
  m.drift.orientation = Orientation::decreasing;
  m.drift.r = [](double x) { return x <= 0 ? 0.0 : -1.0; };
  m.drift.closed_form_flow = [](double x, double t) { return x - t; };
  m.drift.closed_form_hit_time = [](double x) { return std::max(x, 0.0); };
  m.drift.closed_form_travel_time = [](double x, double y) { return x - y; };
  m.intensity = [l0](double) { return l0; };

  m.kernel.support_note = "service-sized up-jumps ~ " + F.name;
  // The interior support edge y == x uses the nodal midpoint convention (half
  // of F.pdf(0)); jumps from the boundary atom x == 0 keep the full limit
  // since the state-space edge already carries a one-sided grid weight.
  m.kernel.density = [F](double x, double y) {
    if (y < x) return 0.0;
    const double v = F.pdf(y - x);
    return (y == x && x > 0.0) ? 0.5 * v : v;
  };
  m.kernel.cdf = [F](double x, double y) { return y <= x ? 0.0 : F.cdf(y - x); };
  m.kernel.sample = [F](double x, RngStream& rng) { return x + F.sample(rng); };

  m.closed_form_hazard = [l0](double, double t) { return l0 * t; };
  m.closed_form_hazard_inv = [l0](double, double e) { return e / l0; };

  m.domain_hint = std::make_pair(0.0, mg1_window_hi(spec));
  return m;
}

// ------------------------------------------------------------ linear_decay

void check_linear_decay(const LinearDecaySpec& d) {
  if (!(d.pull > 0)) throw ConfigError("linear_decay: pull must be > 0");
  if (!(d.gamma < d.level)) throw ConfigError("linear_decay: requires gamma < level");
  if (!(d.intensity > 0)) throw ConfigError("linear_decay: intensity must be > 0");
  if (!(d.jump_rate > 0)) throw ConfigError("linear_decay: jump_rate must be > 0");
}

PdmpModel build_linear_decay(const LinearDecaySpec& d) {
  check_linear_decay(d);
  const double level = d.level, pull = d.pull, gamma = d.gamma;
  const double lam = d.intensity, eta = d.jump_rate;

  PdmpModel m;
  m.name = "linear_decay";
  m.space.lower = -kInf;
  m.space.upper = gamma;
  m.space.active_boundary = true;
  m.drift.orientation = Orientation::increasing;
  m.drift.r = [level, pull](double x) { return pull * (level - x); };
  m.drift.closed_form_flow = [level, pull](double x, double t) {
    return level - (level - x) * std::exp(-pull * t);
  };
  m.drift.closed_form_hit_time = [level, pull, gamma](double x) {
    if (x >= gamma) return 0.0;
    return std::log((level - x) / (level - gamma)) / pull;
  };
  m.drift.closed_form_travel_time = [level, pull](double x, double y) {
    return std::log((level - x) / (level - y)) / pull;
  };
  m.intensity = [lam](double) { return lam; };

  JumpKernel k;
  k.support_note = "exponential down-jumps";
  // The interior support edge y == x uses the nodal midpoint convention
  // (eta / 2); forced jumps from gamma (the state-space edge, whose grid node
  // already carries a one-sided weight) keep the full limit. See the tcp
  // kernel for the rationale.
  k.density = [eta, gamma](double x, double y) {
    if (y > x) return 0.0;
    const double v = eta * std::exp(-eta * (x - y));
    return (y == x && x < gamma) ? 0.5 * v : v;
  };
  k.cdf = [eta](double x, double y) { return y >= x ? 1.0 : std::exp(-eta * (x - y)); };
  k.sample = [eta](double x, RngStream& rng) { return x + std::log(rng.uniform01()) / eta; };
  m.kernel = k;
  m.boundary_kernel = k;

  m.closed_form_hazard = [lam](double, double t) { return lam * t; };
  m.closed_form_hazard_inv = [lam](double, double e) { return e / lam; };
  return m;
}

}  // namespace

std::string zoo_name(const ZooSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RenewalAgeSpec>) return "renewal_age";
        if constexpr (std::is_same_v<T, TcpSpec>) return "tcp";
        if constexpr (std::is_same_v<T, IndepJumpsSpec>) return "indep_jumps";
        if constexpr (std::is_same_v<T, ReflectedMg1Spec>) return "reflected_mg1";
        if constexpr (std::is_same_v<T, LinearDecaySpec>) return "linear_decay";
      },
      spec);
}

PdmpModel zoo_build(const ZooSpec& spec) {
  return std::visit(
      [](const auto& s) -> PdmpModel {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RenewalAgeSpec>) return build_renewal(s);
        if constexpr (std::is_same_v<T, TcpSpec>) return build_tcp(s);
        if constexpr (std::is_same_v<T, IndepJumpsSpec>) return build_indep(s);
        if constexpr (std::is_same_v<T, ReflectedMg1Spec>) return build_mg1(s);
        if constexpr (std::is_same_v<T, LinearDecaySpec>) return build_linear_decay(s);
      },
      spec);
}

std::optional<ClosedForms> zoo_closed_forms(const ZooSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::optional<ClosedForms> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RenewalAgeSpec>) {
          check_renewal(s);
          return renewal_cf(s);
        }
        if constexpr (std::is_same_v<T, TcpSpec>) {
          check_tcp(s);
          return tcp_cf(s);
        }
        if constexpr (std::is_same_v<T, IndepJumpsSpec>) {
          check_indep(s);
          return indep_cf(s);
        }
        if constexpr (std::is_same_v<T, ReflectedMg1Spec>) {
          check_mg1(s);
          return mg1_cf(s);
        }
        if constexpr (std::is_same_v<T, LinearDecaySpec>) {
          check_linear_decay(s);
          return std::nullopt;
        }
      },
      spec);
}

}  // namespace pdmp
