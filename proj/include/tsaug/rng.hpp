#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tsaug {

// Seeded generator with platform-independent draws. std::mt19937_64 is fully
// specified by the standard, but the std distributions are not, so the
// conversions to uniform/normal values live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; the spare variate is cached.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // -1 or +1 with equal probability.
  double sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a root seed and a stage tag, so
// adding a stage never shifts the randomness of existing ones.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace tsaug
