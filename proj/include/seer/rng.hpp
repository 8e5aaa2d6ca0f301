#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace seer {

// Deterministic random source. mt19937_64 output is pinned by the standard;
// the std::* distributions are not, so the mappings live here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), n > 0
  uint64_t uniform_int(uint64_t n) { return gen_() % n; }

  // exponential with the given mean
  double exponential(double mean) {
    double u = uniform();
    return -mean * std::log(1.0 - u);
  }

 private:
  std::mt19937_64 gen_;
};

// Stable way to derive per-agent / per-epoch streams from one run seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace seer
