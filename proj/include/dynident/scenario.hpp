#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynident/estimators.hpp"

// Declarative experiment scenarios: a synthetic actual robot is simulated,
// measurements are synthesized from it, and the selected estimators are run
// against them. Every emitted file is deterministic for a fixed config and
// seed and is listed with a content hash in the bundle manifest.

namespace dynident {

struct ScenarioConfig {
  std::string name = "scenario";
  std::string description;
  std::uint64_t seed = 0;

  BaseParameters chi_nominal = nominal_parameters();
  std::optional<Vec2> apriori_inertia;  // defaults to the nominal effective one

  LoopTuning tuning_actual;
  LoopTuning tuning_simulated;
  DriveChain chain;

  std::vector<Vec2> waypoints;
  std::vector<double> durations;
  int trajectory_repeat = 1;

  SimConfig sim;
  Vec2 initial_offset = Vec2::Zero();

  std::optional<Vec2> torque_sigma;  // absolute, N m
  double torque_sigma_rel = 0.02;    // x per-joint torque RMS when no absolute
  double torque_band_hz = 4.0;       // 0 = white
  double position_sigma = 0.0;

  std::vector<std::string> estimators;  // idim, didim, oe, mc-stats

  bool filter_raw = false;
  FilterSpec filter;
  int decimation_nd = 20;
  double decimation_cutoff_hz = 0;  // 0 = 0.8 * fm / (2 nd)
  int downsample_factor = 1;

  DidimOptions didim;
  std::string didim_init = "regular-ia";  // regular-ia, regular-zz, idim, explicit

  OeOptions oe;
  std::string oe_init = "idim";  // idim, scaled, explicit
  double oe_init_scale = 0.8;

  SmoothSignConfig ssign;

  int mc_replicates = 200;
  double mc_sigma_rel = 0.02;

  std::string out_dir;
};

ScenarioConfig parse_scenario_file(const std::string& path);
ScenarioConfig parse_scenario_text(const std::string& text,
                                   const std::string& origin = "<config>");

struct EstimatorOutcome {
  std::string method;
  std::string status;  // converged, max_iterations, ok, or error:<type>
  std::string detail;
  int iterations = 0;
  bool has_report = false;
  EstimationReport report;
};

struct ScenarioOutcome {
  std::string name;
  std::string bundle_dir;
  std::vector<EstimatorOutcome> estimators;
  std::vector<std::string> files;  // manifest order
  bool manifest_matched_previous = true;

  const EstimatorOutcome* find(const std::string& method) const;
};

// Runs the full scenario pipeline and writes the artifact bundle under
// out_dir/<name>. Estimator failures are recorded in the outcome and in
// run_result.json rather than thrown; configuration and IO problems throw.
ScenarioOutcome run_scenario(const ScenarioConfig& config,
                             const std::string& out_dir_override = "");

// Side-by-side table of parameter estimates, 2 sigma bounds and relative
// sigmas, one column group per report.
std::string compare_reports_csv(
    const std::vector<std::pair<std::string, EstimationReport>>& reports);

std::uint64_t fnv1a_hash_file(const std::string& path);

// config transforms used by the sweep verb
ScenarioConfig with_simulated_bandwidth_scale(ScenarioConfig cfg,
                                              double factor);
ScenarioConfig with_torque_noise_scale(ScenarioConfig cfg, double factor);

ReferenceTrajectory build_trajectory(const ScenarioConfig& config);

} // namespace dynident
