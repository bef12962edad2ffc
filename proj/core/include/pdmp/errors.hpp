#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

struct PdmpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic flow reached the active boundary before the requested time.
struct BoundaryCrossedError : PdmpError {
  BoundaryCrossedError(const std::string& what, double hit)
      : PdmpError(what), hit_time(hit) {}
  double hit_time;
};

struct SolverError : PdmpError {
  using PdmpError::PdmpError;
};

/// Solver produced a solution outside the physical cone (negative density).
struct NonphysicalSolutionError : SolverError {
  using SolverError::SolverError;
};

struct IterationLimitError : SolverError {
  using SolverError::SolverError;
};

/// Simulated path exceeded the configured event cap.
struct ExplosionError : PdmpError {
  using PdmpError::PdmpError;
};

/// Malformed user input (CLI config, bad parameters).
struct ConfigError : PdmpError {
  using PdmpError::PdmpError;
};

}  // namespace pdmp
