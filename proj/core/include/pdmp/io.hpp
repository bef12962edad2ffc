#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pdmp/estimate.hpp"
#include "pdmp/grid_density.hpp"
#include "pdmp/reversal.hpp"
#include "pdmp/simulate.hpp"

namespace pdmp {

/// Shortest round-trip decimal; nan/inf spelled out. Every emitter below goes
/// through this, so identical data produces identical bytes run to run.
std::string format_double(double v);

/// Columns t,kind,pre,post with kind in {jump, forced, atom_enter, atom_exit}.
/// Holding-atom entry/exit rows carry the atom location in both state columns;
/// ties at equal t order as atom_exit < jump/forced < atom_enter.
std::string trajectory_csv(const Trajectory& traj);

/// Columns x,nu_prime over the density grid (atoms and sigma_gamma belong in
/// the JSON sidecar the caller writes).
std::string density_csv(const GridDensity& g);

/// Columns lo,hi,jumps,occupation,rate,ci_lo,ci_hi,reported (reported 0/1).
std::string intensity_csv(const IntensityEstimate& est);

/// Columns from_lo,from_hi,to_lo,to_hi,value,row_count (row-normalized value).
std::string kernel_histogram_csv(const KernelHistogram& h);

/// Columns x,lambda_star,flagged over the reversal grid.
std::string lambda_star_csv(const ReversedPdmp& rev);

/// Columns x,y,density for the reversed kernel, decimated to at most
/// max_per_axis nodes per axis (stride-sampled, last node kept).
std::string kernel_star_csv(const ReversedPdmp& rev, std::size_t max_per_axis = 128);

/// Columns x,density for the reversed boundary law (empty string when the
/// reversed process has no forced jumps).
std::string boundary_law_star_csv(const ReversedPdmp& rev);

/// JSON object {level, bonferroni:{tests, per_test_level}, all_pass, reports:[...]}.
std::string comparison_json(const std::vector<ComparisonReport>& reports, double level);

/// Atomic-ish write (open, write, flush); throws PdmpError with the path on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace pdmp
