#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every random quantity in the simulator is
// derived from an explicit key (seed, replication, purpose, indices...), so
// replications are independent of execution order and thread count, and the
// same patient stream is seen by every design within a replication.

namespace escalate::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t hash_one(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kGolden + v);
}

template <typename... Parts>
constexpr std::uint64_t hash_key(std::uint64_t first, Parts... rest) {
  std::uint64_t h = mix64(first + kGolden);
  ((h = hash_one(h, static_cast<std::uint64_t>(rest))), ...);
  return h;
}

// uniform in the open interval (0,1)
constexpr double to_u01(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

template <typename... Parts>
constexpr double hash_u01(Parts... parts) {
  return to_u01(hash_key(parts...));
}

// Purposes keep independently keyed sub-streams from colliding.
enum Purpose : std::uint64_t {
  kPatientZ = 0x5a01,
  kComboAux = 0x5a02,
  kDesignFit = 0x5a03,
  kOracle = 0x5a04,
  kTest = 0x5aff,
};

/// Sequential stream (splitmix64) for consumers that draw many variates,
/// e.g. MCMC chains. Seeded from a hashed key; fully deterministic.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(mix64(key + kGolden)) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  double u01() { return to_u01(next_u64()); }

  // standard normal, Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = u01();
    double v = u01();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape < 1 handled by the boost identity.
  double gamma(double shape, double scale = 1.0) {
    if (shape < 1.0) {
      double u = u01();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = u01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  // inverse-gamma(shape, rate-parameterised scale)
  double inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

  int uniform_int(int n) {  // 0..n-1
    return static_cast<int>(u01() * n) % n;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace escalate::rng
