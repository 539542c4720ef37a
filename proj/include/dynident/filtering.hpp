#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

#include "dynident/errors.hpp"

// Off-line estimation of joint kinematics from sampled positions: zero-phase
// Butterworth lowpass, central differences, parallel decimation of a stacked
// measurement vector and observation matrix, and raw downsampling.

namespace dynident {

struct FilterSpec {
  double cutoff_hz = 20.0;
  int order = 4;          // per pass
  bool zero_phase = true; // forward then backward pass
};

struct DecimationSpec {
  int nd = 20;           // keep one sample in nd
  double cutoff_hz = 0;  // 0 selects the default 0.8 * fm / (2 * nd)

  double effective_cutoff(double fm) const {
    return cutoff_hz > 0 ? cutoff_hz : 0.8 * fm / (2.0 * nd);
  }
};

// Lowpass with zero net phase shift: one causal Butterworth pass forward and
// one over the reversed series, with odd-reflection padding of 3 x order
// samples at each end. Output length equals input length.
Eigen::VectorXd zero_phase_lowpass(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double fm, const FilterSpec& spec);

// Variance gain of the two-pass filter on white noise (sum of squared
// impulse response), used to scale shaped noise to a target std.
double zero_phase_noise_gain(double fm, const FilterSpec& spec, int probe_len);

// d[k] = (x[k+1] - x[k-1]) * fm / 2 inside, one-sided first-order at the ends.
Eigen::VectorXd central_difference(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   double fm);

struct KinematicsEstimate {
  Eigen::MatrixXd q;
  Eigen::MatrixXd qd;
  Eigen::MatrixXd qdd;
};

// Filtered mode: q_hat = zero-phase lowpass of q, derivatives by repeated
// central differencing. Raw mode (no spec): differentiate the samples as-is.
KinematicsEstimate estimate_kinematics(
    const Eigen::Ref<const Eigen::MatrixXd>& q_samples, double fm,
    const std::optional<FilterSpec>& spec);

using BlockBounds = std::vector<std::pair<Eigen::Index, Eigen::Index>>;

// Lowpasses Y and every column of W with the same zero-phase filter, then
// keeps one sample in nd, independently inside each joint block. Preserves an
// exact linear relation Y = W chi.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> parallel_decimate(
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::Ref<const Eigen::MatrixXd>& w, const BlockBounds& blocks,
    double fm, const DecimationSpec& spec);

// Filter-and-subsample of a single series (one block of the parallel form).
Eigen::VectorXd decimate_series(const Eigen::Ref<const Eigen::VectorXd>& x,
                                double fm, const DecimationSpec& spec);

Eigen::VectorXd downsample(const Eigen::Ref<const Eigen::VectorXd>& x,
                           int factor);

} // namespace dynident
