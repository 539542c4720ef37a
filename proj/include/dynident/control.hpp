#pragma once

#include <Eigen/Dense>

#include "dynident/errors.hpp"
#include "dynident/scara.hpp"

// Per-joint PD control law v = kp*kv*(qr - q) - kv*qd, drive-chain mapping
// tau = g * v, and gain tuning that places the closed-loop poles of the
// decoupled double-integrator approximation at a desired (omega_n, zeta).

namespace dynident {

struct LoopTuning {
  Vec2 omega_n = Vec2::Ones();  // rad/s, desired natural frequency
  Vec2 zeta = Vec2::Ones();     // desired damping
};

struct PdGains {
  Vec2 kp = Vec2::Zero();  // 1/s
  Vec2 kv = Vec2::Zero();  // control units per rad/s
};

// Composite drive gain per joint (gear ratio x amplifier x torque constant,
// folded). g_actual drives the plant; g_apriori is what the identification
// side believes.
struct DriveChain {
  Vec2 g_actual = Vec2::Ones();
  Vec2 g_apriori = Vec2::Ones();
};

enum class GainSet { Actual, Apriori };

inline Vec2 pd_control(const Vec2& qr, const Vec2& q, const Vec2& qd,
                       const PdGains& gains) {
  return gains.kp.cwiseProduct(gains.kv).cwiseProduct(qr - q) -
         gains.kv.cwiseProduct(qd);
}

inline Vec2 drive_torque(const Vec2& v, const DriveChain& chain,
                         GainSet which) {
  const Vec2& g = which == GainSet::Actual ? chain.g_actual : chain.g_apriori;
  return g.cwiseProduct(v);
}

// kp = omega_n / (2 zeta), kv = 2 zeta omega_n J / g. kp does not depend on
// the inertia or the drive gain.
inline PdGains tune_gains(const LoopTuning& tuning, const Vec2& inertia,
                          const Vec2& g) {
  PdGains gains;
  gains.kp = tuning.omega_n.cwiseQuotient(2.0 * tuning.zeta);
  gains.kv = 2.0 * tuning.zeta.cwiseProduct(tuning.omega_n)
                       .cwiseProduct(inertia)
                       .cwiseQuotient(g);
  return gains;
}

// Gains of the simulated loop for the current parameter iterate: kv is
// retuned with the iterate's effective inertia so the simulated closed loop
// keeps the desired poles; kp is untouched.
inline PdGains update_simulated_gains(const LoopTuning& tuning,
                                      const BaseParameters& chi,
                                      const DriveChain& chain) {
  const Vec2 j = effective_inertia(chi);
  if (!(j[0] > 0.0) || !(j[1] > 0.0)) {
    throw NonPositiveInertia("effective inertia (" + std::to_string(j[0]) +
                             ", " + std::to_string(j[1]) +
                             ") not strictly positive");
  }
  return tune_gains(tuning, j, chain.g_apriori);
}

// Ratio between the achieved and desired bandwidth (equal for the damping)
// when gains tuned with a priori values run on the actual plant:
// sqrt((J_ap / J_a) * (g_a / g_ap)) per joint.
inline Vec2 bandwidth_ratio(const Vec2& j_apriori, const Vec2& j_actual,
                            const Vec2& g_actual, const Vec2& g_apriori) {
  return (j_apriori.cwiseQuotient(j_actual)
              .cwiseProduct(g_actual.cwiseQuotient(g_apriori)))
      .cwiseSqrt();
}

} // namespace dynident
