#include "mygo/rng.hpp"

#include <cmath>
#include <numbers>

namespace mygo {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
  uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

uint64_t Rng::bounded(uint64_t n) {
  if (n == 0) return 0;
  const uint64_t threshold = (0 - n) % n;
  uint64_t r = next_u64();
  while (r < threshold) r = next_u64();
  return r % n;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u in (0, 1] keeps the log argument positive.
  const double u = 1.0 - uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void Rng::fill_normal(std::span<double> out) {
  for (auto& v : out) v = normal();
}

void Rng::fill_uniform(std::span<double> out, double lo, double hi) {
  for (auto& v : out) v = uniform(lo, hi);
}

std::vector<size_t> Rng::permutation(size_t n) {
  std::vector<size_t> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = i;
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(bounded(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Rng Rng::fork(uint64_t stream_id) {
  return Rng(next_u64() ^ (stream_id * 0xA24BAED4963EE407ull + 0x9FB21C651E98DF25ull));
}

}  // namespace mygo
