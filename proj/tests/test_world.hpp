#pragma once

// Shared fixtures for the simulation and estimation tests: a compact exciting
// trajectory and the matched actual/simulated loop setup around the nominal
// testbed parameters.

#include "dynident/control.hpp"
#include "dynident/estimators.hpp"
#include "dynident/scara.hpp"
#include "dynident/simulate.hpp"
#include "dynident/trajectory.hpp"

namespace testworld {

using namespace dynident;

inline ReferenceTrajectory short_trajectory() {
  return ReferenceTrajectory::quintic(
      {Vec2(0.0, 0.0), Vec2(0.8, -1.4), Vec2(-0.5, 1.1), Vec2(0.6, -0.8),
       Vec2(0.0, 0.0)},
      {2.0, 2.0, 2.0, 2.0});
}

inline LoopTuning full_tuning() {
  LoopTuning t;
  t.omega_n = Vec2(1, 10);
  t.zeta = Vec2(1, 1);
  return t;
}

inline DriveChain unit_chain() { return DriveChain{}; }

inline DriveChain testbed_chain() {
  DriveChain c;
  c.g_actual = Vec2(2.0, 1.5);
  c.g_apriori = Vec2(2.0, 1.5);
  return c;
}

inline SimConfig default_sim() { return SimConfig{}; }

// the actual robot: gains tuned from the nominal effective inertia
inline SimRecord run_actual(const ReferenceTrajectory& traj,
                            const BaseParameters& chi, const DriveChain& chain,
                            const LoopTuning& tuning,
                            const Vec2& initial_offset = Vec2::Zero(),
                            SimConfig cfg = SimConfig{}) {
  const PdGains gains =
      tune_gains(tuning, effective_inertia(chi), chain.g_apriori);
  const auto start = traj.at(0.0);
  cfg.q0 = start.q + initial_offset;
  cfg.qd0 = start.qd;
  return integrate_closed_loop(chi, gains, chain, GainSet::Actual, traj, cfg,
                               SmoothSignConfig{});
}

} // namespace testworld
