#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "dynident/errors.hpp"

// Minimal rigid-body dynamics of a 2-DOF planar SCARA arm (direct drive, no
// gravity), expressed over its 8 base parameters
//   chi = [ZZ1R, Fv1, Fc1, ZZ2R, LMX2, LMY2, Fv2, Fc2]
// so that the joint torque is linear in chi: tau = idm_regressor(state) * chi.

namespace dynident {

template <typename Scalar>
using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat2T = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using RegressorMatrixT = Eigen::Matrix<Scalar, 2, 8>;

using Vec2 = Vec2T<double>;
using Mat2 = Mat2T<double>;
using RegressorMatrix = RegressorMatrixT<double>;

inline constexpr int kNumBaseParams = 8;

// Smoothed replacement for sign(velocity) used by both the simulator and the
// regressor, so the torque identity between the direct and inverse models
// holds exactly. epsilon is the velocity scale in rad/s.
template <typename Scalar = double>
struct SmoothSignConfigT {
  Scalar epsilon = Scalar(1e-2);

  Scalar operator()(Scalar v) const { return std::tanh(v / epsilon); }
};

using SmoothSignConfig = SmoothSignConfigT<double>;

template <typename Scalar = double>
struct JointStateT {
  Vec2T<Scalar> q = Vec2T<Scalar>::Zero();    // rad
  Vec2T<Scalar> qd = Vec2T<Scalar>::Zero();   // rad/s
  Vec2T<Scalar> qdd = Vec2T<Scalar>::Zero();  // rad/s^2
};

using JointState = JointStateT<double>;

// Base parameter vector of the arm. zz1r folds the rotor inertia of joint 1
// and the point-mass term of link 2 (zz1r = zz1 + ia1 + m2*L^2); zz2r folds
// the rotor inertia of joint 2. lmx2/lmy2 are the link-length-weighted first
// moments of link 2.
//
// ia1/ia2 hold *unregrouped* diagonal actuator inertia. They are zero for any
// identified vector and exist only so the identity-inertia initialization of
// the DIDIM loop is representable (all base entries zero, ia = 1 per joint,
// which makes the inertia matrix the identity). They are not identifiable and
// never appear in the regressor.
template <typename Scalar = double>
struct BaseParametersT {
  Scalar zz1r = 0;  // kg m^2
  Scalar fv1 = 0;   // N m s/rad
  Scalar fc1 = 0;   // N m
  Scalar zz2r = 0;  // kg m^2
  Scalar lmx2 = 0;  // kg m^2
  Scalar lmy2 = 0;  // kg m^2
  Scalar fv2 = 0;   // N m s/rad
  Scalar fc2 = 0;   // N m

  Scalar ia1 = 0;  // kg m^2, initialization aid only
  Scalar ia2 = 0;  // kg m^2, initialization aid only

  using Vector = Eigen::Matrix<Scalar, kNumBaseParams, 1>;

  Vector vector() const {
    Vector v;
    v << zz1r, fv1, fc1, zz2r, lmx2, lmy2, fv2, fc2;
    return v;
  }

  static BaseParametersT from_vector(const Eigen::Ref<const Vector>& v) {
    BaseParametersT p;
    p.zz1r = v[0];
    p.fv1 = v[1];
    p.fc1 = v[2];
    p.zz2r = v[3];
    p.lmx2 = v[4];
    p.lmy2 = v[5];
    p.fv2 = v[6];
    p.fc2 = v[7];
    return p;
  }

  bool has_rotor_extra() const { return ia1 != Scalar(0) || ia2 != Scalar(0); }

  // Checkable but deliberately unenforced: the identity-inertia
  // initialization has zz1r = zz2r = 0.
  bool physically_plausible() const {
    return zz1r > 0 && zz2r > 0 && fv1 >= 0 && fc1 >= 0 && fv2 >= 0 &&
           fc2 >= 0;
  }
};

using BaseParameters = BaseParametersT<double>;

inline const char* base_parameter_name(int i) {
  static const char* names[kNumBaseParams] = {"zz1r", "fv1",  "fc1", "zz2r",
                                              "lmx2", "lmy2", "fv2", "fc2"};
  return names[i];
}

// 2x8 matrix of torque basis functions evaluated at a joint state. Columns
// follow the base parameter ordering; rows are joints. Entries (2,1), (2,2),
// (2,3), (1,7), (1,8) are structurally zero.
template <typename Scalar>
RegressorMatrixT<Scalar> idm_regressor(const JointStateT<Scalar>& s,
                                       const SmoothSignConfigT<Scalar>& ssign) {
  const Scalar c2 = std::cos(s.q[1]);
  const Scalar s2 = std::sin(s.q[1]);
  const Scalar qd1 = s.qd[0], qd2 = s.qd[1];
  const Scalar qdd1 = s.qdd[0], qdd2 = s.qdd[1];

  RegressorMatrixT<Scalar> m = RegressorMatrixT<Scalar>::Zero();
  m(0, 0) = qdd1;
  m(0, 1) = qd1;
  m(0, 2) = ssign(qd1);
  m(0, 3) = qdd1 + qdd2;
  m(0, 4) = (2 * qdd1 + qdd2) * c2 - qd2 * (2 * qd1 + qd2) * s2;
  m(0, 5) = -(2 * qdd1 + qdd2) * s2 - qd2 * (2 * qd1 + qd2) * c2;

  m(1, 3) = qdd1 + qdd2;
  m(1, 4) = qdd1 * c2 + qd1 * qd1 * s2;
  m(1, 5) = qd1 * qd1 * c2 - qdd1 * s2;
  m(1, 6) = qd2;
  m(1, 7) = ssign(qd2);
  return m;
}

template <typename Scalar>
Vec2T<Scalar> inverse_dynamics(const JointStateT<Scalar>& s,
                               const BaseParametersT<Scalar>& chi,
                               const SmoothSignConfigT<Scalar>& ssign) {
  Vec2T<Scalar> tau = idm_regressor(s, ssign) * chi.vector();
  if (chi.has_rotor_extra()) {
    tau[0] += chi.ia1 * s.qdd[0];
    tau[1] += chi.ia2 * s.qdd[1];
  }
  return tau;
}

template <typename Scalar>
Mat2T<Scalar> inertia_matrix(const Vec2T<Scalar>& q,
                             const BaseParametersT<Scalar>& chi) {
  const Scalar c2 = std::cos(q[1]);
  const Scalar s2 = std::sin(q[1]);
  const Scalar coupling = chi.zz2r + chi.lmx2 * c2 - chi.lmy2 * s2;
  Mat2T<Scalar> m;
  m(0, 0) = chi.zz1r + chi.zz2r + 2 * (chi.lmx2 * c2 - chi.lmy2 * s2) + chi.ia1;
  m(0, 1) = coupling;
  m(1, 0) = coupling;
  m(1, 1) = chi.zz2r + chi.ia2;
  return m;
}

// Accelerations from torque: solves M(q) qdd = tau - N(q, qd), where N is the
// inverse dynamics at zero acceleration (friction included).
template <typename Scalar>
Vec2T<Scalar> forward_dynamics(const Vec2T<Scalar>& q, const Vec2T<Scalar>& qd,
                               const Vec2T<Scalar>& tau,
                               const BaseParametersT<Scalar>& chi,
                               const SmoothSignConfigT<Scalar>& ssign,
                               Scalar det_floor = Scalar(1e-12)) {
  const Mat2T<Scalar> m = inertia_matrix(q, chi);
  const Scalar det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (!(std::abs(det) >= det_floor)) {
    throw SingularInertia("inertia matrix determinant " +
                          std::to_string(static_cast<double>(det)) +
                          " below floor");
  }
  JointStateT<Scalar> rest;
  rest.q = q;
  rest.qd = qd;
  const Vec2T<Scalar> bias = inverse_dynamics(rest, chi, ssign);
  const Vec2T<Scalar> rhs = tau - bias;
  Vec2T<Scalar> qdd;
  qdd[0] = (m(1, 1) * rhs[0] - m(0, 1) * rhs[1]) / det;
  qdd[1] = (m(0, 0) * rhs[1] - m(1, 0) * rhs[0]) / det;
  return qdd;
}

// Worst-case diagonal inertia per joint used for PD gain tuning:
// J1 = zz1r + zz2r + 2*lmx2 (lmy2 neglected), J2 = zz2r.
template <typename Scalar>
Vec2T<Scalar> effective_inertia(const BaseParametersT<Scalar>& chi) {
  Vec2T<Scalar> j;
  j[0] = chi.zz1r + chi.zz2r + 2 * chi.lmx2 + chi.ia1;
  j[1] = chi.zz2r + chi.ia2;
  return j;
}

// Regrouping of standard inertial parameters into the base inertia entries:
// zz1r = zz1 + ia1 + m2 L^2, zz2r = zz2 + ia2. Friction and moment fields of
// the result are left at zero for the caller to fill.
template <typename Scalar>
BaseParametersT<Scalar> standard_to_base(Scalar zz1, Scalar ia1, Scalar zz2,
                                         Scalar ia2, Scalar m2,
                                         Scalar link_length) {
  BaseParametersT<Scalar> p;
  p.zz1r = zz1 + ia1 + m2 * link_length * link_length;
  p.zz2r = zz2 + ia2;
  return p;
}

// Nominal parameters of the synthetic testbed arm (SI units, link length
// 0.5 m). Used as ground truth by the experiment scenarios.
inline BaseParameters nominal_parameters() {
  BaseParameters p;
  p.zz1r = 3.44;
  p.fv1 = 0.03;
  p.fc1 = 0.82;
  p.zz2r = 0.062;
  p.lmx2 = 0.121;
  p.lmy2 = 0.007;
  p.fv2 = 0.013;
  p.fc2 = 0.137;
  return p;
}

// Identity-inertia start: all base entries zero, unit actuator inertia on
// each joint, so M(q) = I for every q.
inline BaseParameters regular_ia_init() {
  BaseParameters p;
  p.ia1 = 1.0;
  p.ia2 = 1.0;
  return p;
}

// Unit-ZZ start: zz1r = zz2r = 1. M(q) is no longer the identity but stays
// well conditioned for every q.
inline BaseParameters regular_zz_init() {
  BaseParameters p;
  p.zz1r = 1.0;
  p.zz2r = 1.0;
  return p;
}

} // namespace dynident
