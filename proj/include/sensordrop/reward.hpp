#pragma once

#include <cmath>

#include <cstddef>
#include <string>
#include <utility>

#include "sensordrop/error.hpp"

namespace sensordrop {

enum class RewardKind {
  // correct: k1 - k2 * (d_active / N)^2, incorrect: -zeta
  Quadratic,
  // correct: K + (1 - K) / d_active, incorrect: -zeta_prime
  Harmonic,
};

inline const char* reward_kind_name(RewardKind k) {
  return k == RewardKind::Quadratic ? "quadratic" : "harmonic";
}

struct RewardConfig {
  RewardKind kind = RewardKind::Quadratic;
  double k1 = 200.0;
  double k2 = 100.0;
  double zeta = 100.0;
  double K = 0.4;
  double zeta_prime = 0.75;
  // Reporting scale: normalized = (raw - centre) / normalizer, with centre
  // the midpoint of the raw reward range. <= 0 selects half the range, which
  // maps the raw range onto [-1, 1].
  double normalizer = 0.0;

  void validate() const {
    if (k1 < 0 || k2 < 0 || zeta < 0 || zeta_prime < 0) {
      throw ConfigError("reward: k1, k2, zeta, zeta_prime must be nonnegative");
    }
    if (K < 0.0 || K > 1.0) throw ConfigError("reward: K must lie in [0, 1]");
  }
};

// Quotient (a + b + c) / d rounded once, for small positive integer d and
// an exact unevaluated sum a + b + c whose b, c are tiny next to a. The
// residual of the naive quotient is exact via fma, which decides whether the
// result must move one ulp.
namespace detail {
inline double divide_sum(double a, double b, double c, double d) {
  double q = a / d;
  const double residual = std::fma(-q, d, a) + (b + c);  // (a+b+c) - q*d
  const double up = std::nextafter(q, INFINITY);
  const double down = std::nextafter(q, -INFINITY);
  // Move q if a neighbour is closer to the exact quotient.
  if (residual > 0.0 && residual > 0.5 * (up - q) * d) q = up;
  if (residual < 0.0 && -residual > 0.5 * (q - down) * d) q = down;
  return q;
}
}  // namespace detail

// Raw reward of one decision, correctly rounded from the exact value of the
// inputs: the quadratic numerator k1*N^2 - k2*d^2 is exact for integer
// constants, and the harmonic numerator K*d + (1 - K) is carried exactly as
// an unevaluated sum before the single division.
inline double reward(const RewardConfig& cfg, bool correct, std::size_t d_active,
                     std::size_t num_sensors) {
  if (num_sensors == 0) throw ContractViolation("reward: N must be positive");
  if (d_active > num_sensors) throw ContractViolation("reward: d_active > N");
  const double d = static_cast<double>(d_active);
  const double n = static_cast<double>(num_sensors);
  switch (cfg.kind) {
    case RewardKind::Quadratic:
      if (!correct) return -cfg.zeta;
      return (cfg.k1 * (n * n) - cfg.k2 * (d * d)) / (n * n);
    case RewardKind::Harmonic:
      if (!correct) return -cfg.zeta_prime;
      if (d_active == 0) {
        throw ContractViolation("reward: a correct prediction needs d_active >= 1");
      }
      {
        // K*(d-1) + 1 == p + e1 + 1 == hi + e2 + e1 exactly
        const double p = cfg.K * (d - 1.0);
        const double e1 = std::fma(cfg.K, d - 1.0, -p);
        const double hi = p + 1.0;
        const double bb = hi - p;
        const double e2 = (p - (hi - bb)) + (1.0 - bb);
        return detail::divide_sum(hi, e2, e1, d);
      }
  }
  return 0.0;
}

// [lowest, highest] raw reward for N sensors.
inline std::pair<double, double> reward_range(const RewardConfig& cfg, std::size_t n) {
  if (cfg.kind == RewardKind::Quadratic) {
    return {-cfg.zeta, reward(cfg, true, 1, n)};
  }
  return {-cfg.zeta_prime, reward(cfg, true, 1, n)};
}

inline double normalize_reward(const RewardConfig& cfg, double raw, std::size_t n) {
  const auto [lo, hi] = reward_range(cfg, n);
  const double centre = 0.5 * (lo + hi);
  const double scale = cfg.normalizer > 0.0 ? cfg.normalizer : 0.5 * (hi - lo);
  return scale > 0.0 ? (raw - centre) / scale : 0.0;
}

struct AdvantageRecord {
  double reward = 0.0;      // R
  double value = 0.0;       // V(s)
  double next_value = 0.0;  // V(s')
  double gamma = 0.0;
  double advantage = 0.0;   // R + gamma * V(s') - V(s)
};

inline AdvantageRecord advantage(double reward, double value, double next_value, double gamma) {
  AdvantageRecord r{reward, value, next_value, gamma, 0.0};
  r.advantage = reward + gamma * next_value - value;
  return r;
}

}  // namespace sensordrop
