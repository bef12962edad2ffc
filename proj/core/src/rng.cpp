#include "pdmp/rng.hpp"

#include <cmath>

namespace pdmp {
namespace {

// splitmix64 (Steele/Lea/Flood); used only to expand seeds into state.
std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_index)
    : root_seed_(seed), stream_index_(stream_index) {
  // Decorrelate (seed, stream) pairs before expanding; splitmix64 of the
  // mixed value seeds all four xoshiro words.
  std::uint64_t m = seed ^ (0x9e3779b97f4a7c15ULL * (stream_index + 1));
  m ^= m >> 33;
  m *= 0xff51afd7ed558ccdULL;
  m ^= m >> 33;
  for (auto& w : s_) w = splitmix64(m);
  // xoshiro forbids the all-zero state.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ULL;
}

std::uint64_t RngStream::mix_index(std::uint64_t index) const {
  // Children of a child stay distinct: fold the parent stream index in.
  std::uint64_t m = stream_index_ * 0xda942042e4dd58b5ULL + index + 1;
  m ^= m >> 29;
  m *= 0x94d049bb133111ebULL;
  m ^= m >> 32;
  return m;
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++ (Blackman/Vigna).
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() {
  // Top 53 bits -> (0,1): offset by 0.5 before scaling so 0 is impossible.
  const std::uint64_t bits = next_u64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::exponential(double rate) { return -std::log(uniform01()) / rate; }

double RngStream::normal01() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace pdmp
