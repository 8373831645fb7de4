#pragma once

// Deterministic random source. std::mt19937_64 is bit-exact across
// implementations, but the std distributions are not, so every draw we
// need (uniform, normal, gumbel, integer) is derived here from raw
// engine output. Child streams are split off via splitmix64 so the
// per-purpose streams (identity shapes, blinks, gumbel noise, ...)
// stay independent of each other and of draw order elsewhere.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace speechmesh {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_tag(const std::string& tag) {
  // FNV-1a, enough to decorrelate stream tags.
  uint64_t h = 1469598103934665603ull;
  for (char c : tag) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(uint64_t seed)
      : engine_(splitmix64(seed)), mix_(splitmix64(seed ^ 0xabcdef0123456789ull)) {}

  // Independent child stream for a named purpose.
  Rng child(const std::string& tag) const { return Rng(mix_ ^ hash_tag(tag)); }
  Rng child(uint64_t index) const { return Rng(mix_ ^ (splitmix64(index) | 1ull)); }

  // Uniform in (0, 1); never returns 0 or 1 so log() is always safe.
  double uniform() {
    const uint64_t r = engine_();
    return (static_cast<double>(r >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; uses one pair of uniforms per two draws.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  // Standard Gumbel(0,1).
  double gumbel() { return -std::log(-std::log(uniform())); }

  // Uniform integer in [0, n). Lemire multiply-shift: platform
  // independent, bias immaterial at our scales.
  uint64_t uniform_index(uint64_t n) {
    const uint64_t r = engine_();
    return static_cast<uint64_t>((static_cast<__uint128_t>(r) * n) >> 64);
  }

  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  uint64_t mix_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace speechmesh
