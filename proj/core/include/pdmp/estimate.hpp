#pragma once

#include <string>
#include <vector>

#include "pdmp/grid_density.hpp"
#include "pdmp/model.hpp"
#include "pdmp/reversal.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

// One cell of the intensity estimate: voluntary jumps over exact occupation.
struct IntensityCell {
  double lo = 0, hi = 0;
  long long jumps = 0;
  double occupation = 0;
  double rate = 0;
  double ci_lo = 0, ci_hi = 0;
  bool reported = false;  // false when the cell was never occupied
};

struct IntensityEstimate {
  std::vector<double> edges;         // cell boundaries
  std::vector<IntensityCell> cells;  // size edges.size() - 1
  double level = 0.01;               // two-sided CI significance level
};

// lambda-hat per cell = (# voluntary jumps with pre-state in the cell) /
// (occupation time in the cell), with exact Poisson intervals. Jumps out of
// holding atoms are excluded (they are exit events, not state-dependent
// intensity), as is atom holding time.
IntensityEstimate estimate_intensity(const std::vector<Trajectory>& trajs, const PdmpModel& model,
                                     const std::vector<double>& edges, double level = 0.01);

// Row-normalized 2-D histogram of voluntary jumps (pre-cell x post-cell).
struct KernelHistogram {
  std::vector<double> from_edges;
  std::vector<double> to_edges;
  std::vector<std::vector<double>> rows;  // [from][to]; rows with counts sum to 1
  std::vector<long long> row_counts;
};

KernelHistogram estimate_kernel(const std::vector<Trajectory>& trajs,
                                const std::vector<double>& from_edges,
                                const std::vector<double>& to_edges);

struct RateEstimate {
  long long count = 0;
  double total_time = 0;
  double rate = 0;
  double ci_lo = 0, ci_hi = 0;
  double level = 0.01;
};

// Forced-jump rate (# forced jumps / total horizon) with a Poisson interval.
RateEstimate estimate_boundary_rate(const std::vector<Trajectory>& trajs, double level = 0.01);

// One statistical check of reversed-path behavior against the analytic
// reversed process.
struct ComparisonReport {
  std::string target;
  std::string statistic;  // "KS" | "L1" | "rate_z_score"
  double value = 0;
  double critical_value = 0;  // at the Bonferroni-split level
  long long n_effective = 0;
  bool pass = false;          // value <= critical_value
};

struct CompareConfig {
  double level = 0.01;             // family-wise level, Bonferroni-split
  int intensity_cells = 5;
  double perturb_intensity = 1.0;  // scales the analytic intensity (must-fail control)
};

// Reverses each forward trajectory, estimates intensity / kernel / boundary
// behavior on the reversed paths, and checks each against the analytic
// reversed process; also checks the reversed pre-jump law against the
// forward post-jump law. One report per check.
std::vector<ComparisonReport> compare_reversed(const std::vector<Trajectory>& trajs_forward,
                                               const PdmpModel& model,
                                               const ReversedPdmp& reversed,
                                               const GridDensity& density,
                                               const CompareConfig& config = {});

}  // namespace pdmp
