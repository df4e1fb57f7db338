#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ego {

// Counter-based deterministic RNG. Every consumer derives its own stream from
// (seed, label, counter) so modules never share hidden generator state; the
// same inputs always yield the same values regardless of call order elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(splitmix(state)) {}

  // Derive an independent stream from a seed and a textual label plus
  // optional counters (clip index, frame index, ...).
  static Rng stream(std::uint64_t seed, std::string_view label,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = seed;
    for (char c : label) h = splitmix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    h = splitmix(h ^ (a * 0x9e3779b97f4a7c15ULL + 1));
    h = splitmix(h ^ (b * 0xbf58476d1ce4e5b9ULL + 1));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix(state_);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // [0, n)
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  static std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ego
