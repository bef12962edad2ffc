#pragma once

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "pdmp/dist.hpp"
#include "pdmp/model.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp {

using Real2Fn = std::function<double(double, double)>;

/// Age of a renewal process: unit upward drift, jumps reset to 0 at the
/// hazard rate of the lifetime law.
struct RenewalAgeSpec {
  Dist lifetime;
};

/// Additive-increase multiplicative-decrease throughput: drift r0 x^alpha,
/// intensity lambda0 x^beta (beta > alpha - 1), multiplicative down-jumps
/// with cdf (y/x)^g.
struct TcpSpec {
  double alpha = 0.0;
  double beta_exp = 0.0;
  double g = 1.0;
  double lambda0 = 1.0;
  double r0 = 1.0;
};

/// Unit drift, unit intensity, jump targets drawn from a fixed law mu
/// independent of the pre-jump state. When mu has bounded support the upper
/// endpoint is an active boundary with the same jump law.
struct IndepJumpsSpec {
  Dist jump;
};

/// M/G/1 workload: unit downward drift, arrivals at rate lambda0 with
/// service-time upward jumps, idle state held at 0 (exponential holding,
/// exit by a jump). Requires utilization lambda0 * mean service < 1.
struct ReflectedMg1Spec {
  double lambda0 = 1.0;
  Dist service;
};

/// Mean-reverting drift pull*(level - x) on (-inf, gamma] with a forced
/// jump at gamma, constant intensity, exponential down-jumps.
struct LinearDecaySpec {
  double level = 4.0;
  double pull = 1.0;
  double gamma = 2.0;
  double intensity = 1.0;
  double jump_rate = 1.0;
};

using ZooSpec =
    std::variant<RenewalAgeSpec, TcpSpec, IndepJumpsSpec, ReflectedMg1Spec, LinearDecaySpec>;

std::string zoo_name(const ZooSpec& spec);

/// Build the model, including closed-form flow/hazard accelerators and the
/// stationary-window hint. Throws ConfigError on invalid parameters.
PdmpModel zoo_build(const ZooSpec& spec);

/// Analytic stationary and reversed-process quantities, where the model has
/// them (all models except linear_decay, and reflected_mg1 only with
/// exponential service). Unavailable component functions are left null.
struct ClosedForms {
  // stationary law
  RealFn nu_pdf;       // continuous part
  RealFn nu_cdf;       // full law, atoms included
  RealFn nu_quantile;  // generalized inverse of nu_cdf
  std::vector<MassAtom> nu_atoms;
  double sigma_gamma = 0.0;  // forced-jump rate at the active exit
  double xi_norm = 0.0;      // total embedded transition rate
  double window_lo = 0.0, window_hi = 0.0;  // mass 1e-8 cut from unbounded tails

  // reversed process
  RealFn lambda_star;
  std::map<double, double> lambda_star_atoms;  // holding-atom exit rates, reversed
  Real2Fn kernel_star_pdf;                     // continuous part of mu*_x
  Real2Fn kernel_star_cdf;                     // cdf of that continuous part
  RealFn kernel_star_exit_mass;  // x -> reversed jump mass into the forward exit point
  RealFn kernel_star_atom_mass;  // x -> reversed jump mass into the holding atom
  std::vector<MassAtom> sigma_star;  // reversed boundary measure
  RealFn boundary_law_star_pdf;      // jump law at the reversed active boundary
  RealFn boundary_law_star_cdf;

  // embedded chain laws (pre-jump and post-jump state laws)
  RealFn pi_w_pdf, pi_w_cdf;
  std::vector<MassAtom> pi_w_atoms;
  RealFn pi_q_pdf, pi_q_cdf;
  std::vector<MassAtom> pi_q_atoms;
};

std::optional<ClosedForms> zoo_closed_forms(const ZooSpec& spec);

}  // namespace pdmp
