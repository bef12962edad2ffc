#pragma once

#include <array>
#include <cstdint>

namespace pdmp {

/// Counter-based splittable random stream.
///
/// xoshiro256++ core seeded through splitmix64, so that
///   - a (seed, stream_index) pair fully determines the variate sequence,
///   - child streams (one per simulated path) are statistically independent,
///   - results are bit-identical across platforms and thread counts.
/// Variates are derived from raw bits here instead of std::*_distribution,
/// whose output is implementation-defined.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_index);

  /// Child stream with its own independent state; used per path / per task.
  RngStream child(std::uint64_t index) const { return RngStream(root_seed_, mix_index(index)); }

  std::uint64_t next_u64();

  /// Uniform on (0,1): 53-bit mantissa, never 0 or 1.
  double uniform01();

  /// Uniform on (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Exponential with given rate (mean 1/rate).
  double exponential(double rate);

  /// Standard normal via Box-Muller on two fresh uniforms (no cached spare,
  /// so the consumed-variate count per call is fixed).
  double normal01();

  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

 private:
  std::uint64_t mix_index(std::uint64_t index) const;

  std::uint64_t root_seed_ = 0;
  std::uint64_t stream_index_ = 0;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace pdmp
