#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "dynident/control.hpp"
#include "dynident/filtering.hpp"
#include "dynident/scara.hpp"
#include "dynident/simulate.hpp"
#include "dynident/trajectory.hpp"

namespace dynident {

// Stacked linear system Y = W chi + rho with the rows of each joint grouped
// into one contiguous block.
struct ObservationSystem {
  Eigen::VectorXd y;
  Eigen::MatrixXd w;
  BlockBounds joint_blocks;
  double condition_number = 0;
  bool condition_warning = false;
};

struct EstimationReport {
  BaseParameters chi_hat;
  Eigen::Matrix<double, kNumBaseParams, 1> sigma;          // std per parameter
  Eigen::Matrix<double, kNumBaseParams, 1> rel_sigma_pct;  // NaN where chi_i = 0
  double sigma_rho = 0;   // residual std estimate
  double rel_error = 0;   // |Y - W chi_hat| / |Y|
  double condition_number = 0;
};

enum class InitMode { RegularIa, RegularZz, Explicit };

struct DidimOptions {
  double tol1 = 1e-2;  // residual-norm plateau tolerance
  double tol2 = 1e-2;  // max relative parameter change tolerance
  int max_iterations = 15;
  InitMode init_mode = InitMode::RegularIa;
  BaseParameters chi0;  // used when init_mode == Explicit
  bool use_wls = false;
  // relative parameter change below tol2 is required for stopping; entries
  // with |chi_i| < small_param_floor are judged by absolute change instead
  double small_param_floor = 1e-6;
};

struct OeOptions {
  double tol1 = 1e-2;
  double tol2 = 1e-2;
  int max_iterations = 15;
  BaseParameters chi0;
  double fd_rel_step = 1e-4;
  double fd_abs_floor = 1e-6;
  int max_step_halvings = 5;
  double small_param_floor = 1e-6;
  // inertia pair fixing the simulated controller gains (the actual
  // controller's tuning); the loop gains are never updated between iterates
  Vec2 controller_inertia = Vec2::Ones();
};

struct IterationEntry {
  int k = 0;
  BaseParameters chi;
  Vec2 rel_output_error = Vec2::Zero();  // per-joint |Y_j - Ysim_j| / |Y_j|
  Vec2 kv = Vec2::Zero();
  double delta_chi_norm = 0;
};

using IterationHistory = std::vector<IterationEntry>;

enum class SolveStatus { Converged, MaxIterations };

struct IterativeResult {
  EstimationReport report;
  IterationHistory history;
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;  // number of least-squares solves performed
};

// Stacks per-joint regressor rows against the torque series and optionally
// applies parallel decimation per joint block.
ObservationSystem build_observation(
    const Eigen::Ref<const Eigen::MatrixXd>& q,
    const Eigen::Ref<const Eigen::MatrixXd>& qd,
    const Eigen::Ref<const Eigen::MatrixXd>& qdd,
    const Eigen::Ref<const Eigen::MatrixXd>& torques, double fm,
    const std::optional<DecimationSpec>& decimation,
    const SmoothSignConfig& ssign);

EstimationReport ols_solve(const ObservationSystem& sys);

// Per-joint residual stds from block-wise OLS, rows reweighted by their
// inverse, then an ordinary solve on the scaled system.
EstimationReport wls_solve(const ObservationSystem& sys);

// Full measured-data pipeline: kinematics estimation (filtered or raw),
// observation stacking, decimation, weighted least squares.
EstimationReport idim_identify(const SimRecord& measured,
                               const std::optional<FilterSpec>& filter,
                               const std::optional<DecimationSpec>& decimation,
                               const SmoothSignConfig& ssign);

// Torque-output-error Gauss-Newton: each iterate simulates the closed loop at
// the current parameters (simulated kv retuned to keep the desired poles),
// rebuilds the observation matrix from the simulated trajectory against the
// measured torque, and solves one linear least-squares step. Only the torque
// measurement is consumed.
IterativeResult didim_identify(const Series2& tau_measured,
                               const ReferenceTrajectory& traj,
                               const LoopTuning& tuning,
                               const DriveChain& chain,
                               const DidimOptions& opts,
                               const std::optional<DecimationSpec>& decimation,
                               const SimConfig& cfg,
                               const SmoothSignConfig& ssign);

// Position-output-error Gauss-Newton baseline. The jacobian of the simulated
// position with respect to the parameters is approximated by central finite
// differences, two closed-loop simulations per parameter per iteration.
IterativeResult oe_position_identify(const Series2& q_measured,
                                     const ReferenceTrajectory& traj,
                                     const LoopTuning& tuning,
                                     const DriveChain& chain,
                                     const OeOptions& opts,
                                     const SimConfig& cfg,
                                     const SmoothSignConfig& ssign);

std::string report_to_json(const EstimationReport& report,
                           const std::string& method);
EstimationReport report_from_json(const std::string& text);
std::string report_to_csv(const EstimationReport& report);
std::string history_to_csv(const IterationHistory& history);

} // namespace dynident
