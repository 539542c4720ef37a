#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "dynident/control.hpp"
#include "dynident/scara.hpp"
#include "dynident/trajectory.hpp"

namespace dynident {

using Series2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct SimConfig {
  double fm = 200.0;       // record sampling rate, Hz
  double rel_tol = 1e-8;   // integrator relative tolerance
  double abs_tol = 1e-10;  // integrator absolute tolerance
  double det_floor = 1e-12;
  Vec2 q0 = Vec2::Zero();
  Vec2 qd0 = Vec2::Zero();
};

// Time series sampled from one closed-loop run: uniform grid t_k = k / fm,
// n = duration * fm samples. qdd comes from the direct dynamic model at each
// sample instant, tau from the drive chain, v from the control law evaluated
// on the continuous state.
struct SimRecord {
  Eigen::VectorXd times;
  Series2 q;
  Series2 qd;
  Series2 qdd;
  Series2 tau;
  Series2 v;

  Eigen::Index rows() const { return times.size(); }
  bool has_kinematics() const { return qd.rows() == times.size(); }
};

struct NoiseConfig {
  Vec2 torque_sigma = Vec2::Zero();  // N m, std per joint
  double torque_band_hz = 0;         // >0 shapes torque noise below this band
  double position_sigma = 0;         // rad
  std::uint64_t seed = 0;
};

SimRecord integrate_closed_loop(const BaseParameters& chi,
                                const PdGains& gains, const DriveChain& chain,
                                GainSet which_gain,
                                const ReferenceTrajectory& traj,
                                const SimConfig& cfg,
                                const SmoothSignConfig& ssign);

// Turns a noise-free run into synthetic measurements: additive Gaussian noise
// on q and tau, v recomputed as tau / g_actual, velocity and acceleration
// series cleared (a controller provides only q and v).
SimRecord synthesize_measurements(const SimRecord& record,
                                  const NoiseConfig& noise,
                                  const DriveChain& chain);

// Drops all samples with t < 5 / omega_n_min (closed-loop transient window).
SimRecord trim_transient(const SimRecord& record, double omega_n_min);

// Keeps every factor-th sample. No anti-alias filtering.
SimRecord downsample_record(const SimRecord& record, int factor);

void write_record_csv(const SimRecord& record, const std::string& path);
SimRecord read_record_csv(const std::string& path);

} // namespace dynident
