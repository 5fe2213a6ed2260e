#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace via {

// splitmix64 step; used to derive independent stream seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t s = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  splitmix64(s);
  return splitmix64(s);
}

// mt19937_64 with portable uniform/gaussian draws. The std engine is
// bit-exact across platforms; std distributions are not, so the mappings
// from raw bits to doubles are done here.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (deterministic, pairwise).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double a = 1.0 - uniform();  // (0, 1]
    const double b = uniform();
    const double radius = std::sqrt(-2.0 * std::log(a));
    const double angle = 2.0 * 3.14159265358979323846 * b;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace via
