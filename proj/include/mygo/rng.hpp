#pragma once
#include <cstdint>
#include <span>
#include <vector>

namespace mygo {

// Deterministic xoshiro256++ stream seeded through splitmix64.
// The integer stream is identical for a given seed on every platform;
// the floating-point derivations (uniform, Box-Muller normal) are identical
// across runs of the same build.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Unbiased draw in [0, n) by rejection sampling.
  uint64_t bounded(uint64_t n);
  // [0, 1) built from the top 53 bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; the second deviate of a pair is cached.
  double normal();
  void fill_normal(std::span<double> out);
  void fill_uniform(std::span<double> out, double lo, double hi);
  // Fisher-Yates shuffle of the identity permutation on [0, n).
  std::vector<size_t> permutation(size_t n);
  // Derived independent stream; advances this generator by one draw.
  Rng fork(uint64_t stream_id);

 private:
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mygo
