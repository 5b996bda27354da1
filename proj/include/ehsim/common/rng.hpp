#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ehsim {

// Portable RNG. std::mt19937_64 is fully specified by the standard, but the
// standard distributions are not, so all draws are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection, n > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (one value per call, no caching so the
  // stream position is a pure function of the call count).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Seed split scheme: child = splitmix64(parent ^ fnv1a64(label)). Every
// sub-run derives its seed from the root seed and a label such as
// "amser/S3" so that it is reproducible in isolation.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace ehsim
