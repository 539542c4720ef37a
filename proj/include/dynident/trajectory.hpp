#pragma once

#include <Eigen/Dense>

#include <vector>

#include "dynident/errors.hpp"
#include "dynident/scara.hpp"

namespace dynident {

// Twice-differentiable reference (q_r, qd_r, qdd_r) built from fifth-degree
// polynomial segments between waypoints, at rest (zero velocity and
// acceleration) at every waypoint. Outside [0, duration] the trajectory holds
// the nearest endpoint.
class ReferenceTrajectory {
 public:
  struct Sample {
    Vec2 q = Vec2::Zero();
    Vec2 qd = Vec2::Zero();
    Vec2 qdd = Vec2::Zero();
  };

  ReferenceTrajectory() = default;

  static ReferenceTrajectory quintic(const std::vector<Vec2>& waypoints,
                                     const std::vector<double>& durations);

  Sample at(double t) const;

  double duration() const { return total_; }

 private:
  struct Segment {
    double t0 = 0;
    double dt = 1;
    Vec2 from = Vec2::Zero();
    Vec2 delta = Vec2::Zero();
  };

  std::vector<Segment> segments_;
  double total_ = 0;
};

inline ReferenceTrajectory ReferenceTrajectory::quintic(
    const std::vector<Vec2>& waypoints, const std::vector<double>& durations) {
  if (waypoints.size() < 2) {
    throw DimensionMismatch("quintic reference needs at least 2 waypoints");
  }
  if (durations.size() != waypoints.size() - 1) {
    throw DimensionMismatch("need one duration per waypoint segment");
  }
  ReferenceTrajectory traj;
  double t = 0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (!(durations[i] > 0)) {
      throw DimensionMismatch("segment durations must be positive");
    }
    Segment seg;
    seg.t0 = t;
    seg.dt = durations[i];
    seg.from = waypoints[i];
    seg.delta = waypoints[i + 1] - waypoints[i];
    traj.segments_.push_back(seg);
    t += durations[i];
  }
  traj.total_ = t;
  return traj;
}

inline ReferenceTrajectory::Sample ReferenceTrajectory::at(double t) const {
  Sample out;
  if (segments_.empty()) return out;
  if (t <= 0) {
    out.q = segments_.front().from;
    return out;
  }
  if (t >= total_) {
    out.q = segments_.back().from + segments_.back().delta;
    return out;
  }
  // linear scan; segment counts are small
  std::size_t i = 0;
  while (i + 1 < segments_.size() && t >= segments_[i].t0 + segments_[i].dt) {
    ++i;
  }
  const Segment& seg = segments_[i];
  const double s = (t - seg.t0) / seg.dt;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double shape = s3 * (10.0 + s * (-15.0 + 6.0 * s));
  const double dshape = s2 * (30.0 + s * (-60.0 + 30.0 * s));
  const double ddshape = s * (60.0 + s * (-180.0 + 120.0 * s));
  out.q = seg.from + shape * seg.delta;
  out.qd = (dshape / seg.dt) * seg.delta;
  out.qdd = (ddshape / (seg.dt * seg.dt)) * seg.delta;
  return out;
}

} // namespace dynident
