#include "dynident/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dynident {

namespace fs = std::filesystem;

namespace {

struct RawConfig {
  std::map<std::string, std::string> values;
  std::string origin;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    auto it = values.find(key);
    if (it == values.end()) return out;
    std::stringstream ss(it->second);
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw ConfigInvalid(origin + ": key '" + key +
                            "' has non-numeric token '" + tok + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto v = numbers(key);
    if (v.size() != 1) {
      throw ConfigInvalid(origin + ": key '" + key + "' expects one number");
    }
    return v[0];
  }

  Vec2 pair(const std::string& key, const Vec2& fallback) const {
    if (!has(key)) return fallback;
    const auto v = numbers(key);
    if (v.size() != 2) {
      throw ConfigInvalid(origin + ": key '" + key + "' expects two numbers");
    }
    return Vec2(v[0], v[1]);
  }
};

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "name", "description", "seed", "out_dir",
      "chi_nominal", "apriori_inertia",
      "tuning.actual.omega_n", "tuning.actual.zeta",
      "tuning.simulated.omega_n", "tuning.simulated.zeta",
      "chain.g_actual", "chain.g_apriori",
      "trajectory.waypoints", "trajectory.durations", "trajectory.repeat",
      "sim.fm", "sim.rel_tol", "sim.abs_tol", "sim.det_floor",
      "sim.initial_offset",
      "noise.torque_sigma", "noise.torque_sigma_rel", "noise.torque_band_hz",
      "noise.position_sigma",
      "estimators",
      "filter.mode", "filter.cutoff_hz", "filter.order",
      "decimation.nd", "decimation.cutoff_hz",
      "downsample.factor",
      "didim.init", "didim.chi0", "didim.tol1", "didim.tol2",
      "didim.max_iterations", "didim.solver",
      "oe.init", "oe.chi0", "oe.scale", "oe.fd_rel_step", "oe.fd_abs_floor",
      "oe.tol1", "oe.tol2", "oe.max_iterations",
      "ssign.epsilon",
      "monte_carlo.replicates", "monte_carlo.sigma_rel",
  };
  return keys;
}

BaseParameters params_from_numbers(const std::vector<double>& v,
                                   const std::string& what) {
  if (v.size() != kNumBaseParams) {
    throw ConfigInvalid(what + " expects " + std::to_string(kNumBaseParams) +
                        " values");
  }
  Eigen::Matrix<double, kNumBaseParams, 1> vec;
  for (int i = 0; i < kNumBaseParams; ++i) vec[i] = v[i];
  return BaseParameters::from_vector(vec);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) {
    throw ConfigInvalid("cannot open " + path.string() + " for writing");
  }
  f << text;
}

nlohmann::json config_echo(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["chi_nominal"] = std::vector<double>(
      c.chi_nominal.vector().data(), c.chi_nominal.vector().data() + 8);
  j["tuning_actual"] = {{"omega_n", {c.tuning_actual.omega_n[0],
                                     c.tuning_actual.omega_n[1]}},
                        {"zeta", {c.tuning_actual.zeta[0],
                                  c.tuning_actual.zeta[1]}}};
  j["tuning_simulated"] = {{"omega_n", {c.tuning_simulated.omega_n[0],
                                        c.tuning_simulated.omega_n[1]}},
                           {"zeta", {c.tuning_simulated.zeta[0],
                                     c.tuning_simulated.zeta[1]}}};
  j["chain"] = {{"g_actual", {c.chain.g_actual[0], c.chain.g_actual[1]}},
                {"g_apriori", {c.chain.g_apriori[0], c.chain.g_apriori[1]}}};
  j["sim"] = {{"fm", c.sim.fm},
              {"rel_tol", c.sim.rel_tol},
              {"abs_tol", c.sim.abs_tol},
              {"initial_offset", {c.initial_offset[0], c.initial_offset[1]}}};
  j["noise"] = {{"torque_sigma_rel", c.torque_sigma_rel},
                {"torque_band_hz", c.torque_band_hz},
                {"position_sigma", c.position_sigma}};
  j["estimators"] = c.estimators;
  j["filter"] = c.filter_raw
                    ? nlohmann::json("raw")
                    : nlohmann::json{{"cutoff_hz", c.filter.cutoff_hz},
                                     {"order", c.filter.order}};
  j["decimation_nd"] = c.decimation_nd;
  j["downsample_factor"] = c.downsample_factor;
  j["didim_init"] = c.didim_init;
  return j;
}

} // namespace

ScenarioConfig parse_scenario_text(const std::string& text,
                                   const std::string& origin) {
  RawConfig raw;
  raw.origin = origin;
  std::stringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (!blank) {
        throw ConfigInvalid(origin + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigInvalid(origin + ":" + std::to_string(line_no) +
                          ": empty key");
    }
    const auto& known = known_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigInvalid(origin + ":" + std::to_string(line_no) +
                          ": unknown key '" + key + "'");
    }
    raw.values[key] = value;
  }

  ScenarioConfig c;
  c.name = raw.str("name", "scenario");
  c.description = raw.str("description", "");
  c.seed = static_cast<std::uint64_t>(raw.number("seed", 0));
  c.out_dir = raw.str("out_dir", "");

  if (raw.has("chi_nominal")) {
    c.chi_nominal = params_from_numbers(raw.numbers("chi_nominal"),
                                        "chi_nominal");
  }
  if (raw.has("apriori_inertia")) {
    c.apriori_inertia = raw.pair("apriori_inertia", Vec2::Ones());
  }

  c.tuning_actual.omega_n = raw.pair("tuning.actual.omega_n", Vec2(1, 10));
  c.tuning_actual.zeta = raw.pair("tuning.actual.zeta", Vec2(1, 1));
  c.tuning_simulated.omega_n =
      raw.pair("tuning.simulated.omega_n", c.tuning_actual.omega_n);
  c.tuning_simulated.zeta =
      raw.pair("tuning.simulated.zeta", c.tuning_actual.zeta);
  c.chain.g_actual = raw.pair("chain.g_actual", Vec2(1, 1));
  c.chain.g_apriori = raw.pair("chain.g_apriori", c.chain.g_actual);

  const auto wp = raw.numbers("trajectory.waypoints");
  if (wp.size() % 2 != 0) {
    throw ConfigInvalid("trajectory.waypoints expects joint pairs");
  }
  for (std::size_t i = 0; i + 1 < wp.size(); i += 2) {
    c.waypoints.emplace_back(wp[i], wp[i + 1]);
  }
  c.durations = raw.numbers("trajectory.durations");
  c.trajectory_repeat =
      static_cast<int>(raw.number("trajectory.repeat", 1));

  c.sim.fm = raw.number("sim.fm", 200.0);
  c.sim.rel_tol = raw.number("sim.rel_tol", 1e-8);
  c.sim.abs_tol = raw.number("sim.abs_tol", 1e-10);
  c.sim.det_floor = raw.number("sim.det_floor", 1e-12);
  c.initial_offset = raw.pair("sim.initial_offset", Vec2::Zero());

  if (raw.has("noise.torque_sigma")) {
    c.torque_sigma = raw.pair("noise.torque_sigma", Vec2::Zero());
  }
  c.torque_sigma_rel = raw.number("noise.torque_sigma_rel", 0.02);
  c.torque_band_hz = raw.number("noise.torque_band_hz", 4.0);
  c.position_sigma = raw.number("noise.position_sigma", 0.0);

  {
    std::stringstream ss(raw.str("estimators", "idim didim"));
    std::string tok;
    while (ss >> tok) c.estimators.push_back(tok);
  }

  const std::string filter_mode = raw.str("filter.mode", "butterworth");
  if (filter_mode == "raw") {
    c.filter_raw = true;
  } else if (filter_mode != "butterworth") {
    throw ConfigInvalid("filter.mode must be butterworth or raw");
  }
  c.filter.cutoff_hz = raw.number("filter.cutoff_hz", 20.0);
  c.filter.order = static_cast<int>(raw.number("filter.order", 4));
  c.decimation_nd = static_cast<int>(raw.number("decimation.nd", 20));
  c.decimation_cutoff_hz = raw.number("decimation.cutoff_hz", 0.0);
  c.downsample_factor =
      static_cast<int>(raw.number("downsample.factor", 1));

  c.didim_init = raw.str("didim.init", "regular-ia");
  if (raw.has("didim.chi0")) {
    c.didim.chi0 = params_from_numbers(raw.numbers("didim.chi0"),
                                       "didim.chi0");
  }
  c.didim.tol1 = raw.number("didim.tol1", 1e-2);
  c.didim.tol2 = raw.number("didim.tol2", 1e-2);
  c.didim.max_iterations =
      static_cast<int>(raw.number("didim.max_iterations", 15));
  const std::string solver = raw.str("didim.solver", "ols");
  if (solver == "wls") {
    c.didim.use_wls = true;
  } else if (solver != "ols") {
    throw ConfigInvalid("didim.solver must be ols or wls");
  }

  c.oe_init = raw.str("oe.init", "idim");
  if (raw.has("oe.chi0")) {
    c.oe.chi0 = params_from_numbers(raw.numbers("oe.chi0"), "oe.chi0");
  }
  c.oe_init_scale = raw.number("oe.scale", 0.8);
  c.oe.fd_rel_step = raw.number("oe.fd_rel_step", 1e-4);
  c.oe.fd_abs_floor = raw.number("oe.fd_abs_floor", 1e-6);
  c.oe.tol1 = raw.number("oe.tol1", 1e-2);
  c.oe.tol2 = raw.number("oe.tol2", 1e-2);
  c.oe.max_iterations = static_cast<int>(raw.number("oe.max_iterations", 15));

  c.ssign.epsilon = raw.number("ssign.epsilon", 1e-2);
  c.mc_replicates = static_cast<int>(raw.number("monte_carlo.replicates", 200));
  c.mc_sigma_rel = raw.number("monte_carlo.sigma_rel", 0.02);

  // cross-field checks
  if (c.waypoints.size() < 2) {
    throw ConfigInvalid(origin + ": trajectory needs at least 2 waypoints");
  }
  if (c.durations.size() != c.waypoints.size() - 1) {
    throw ConfigInvalid(origin + ": trajectory.durations must have one entry "
                        "per segment");
  }
  if (c.trajectory_repeat < 1) {
    throw ConfigInvalid(origin + ": trajectory.repeat must be >= 1");
  }
  if (c.trajectory_repeat > 1 &&
      (c.waypoints.front() - c.waypoints.back()).norm() > 0) {
    throw ConfigInvalid(origin + ": repeated trajectories must close their "
                        "waypoint cycle");
  }
  const double fm_low = c.sim.fm / std::max(1, c.downsample_factor);
  if (c.decimation_nd > 1) {
    DecimationSpec d;
    d.nd = c.decimation_nd;
    d.cutoff_hz = c.decimation_cutoff_hz;
    if (!(d.effective_cutoff(fm_low) < fm_low / 2)) {
      throw ConfigInvalid(origin + ": decimation cutoff must stay below the "
                          "half sampling rate");
    }
  }
  const bool has_noise = c.position_sigma > 0 || c.torque_sigma_rel > 0 ||
                         (c.torque_sigma && c.torque_sigma->norm() > 0);
  if (has_noise && !raw.has("seed")) {
    throw ConfigInvalid(origin + ": noise-bearing scenarios must pin a seed");
  }
  for (const std::string& est : c.estimators) {
    if (est != "idim" && est != "didim" && est != "oe" && est != "mc-stats") {
      throw ConfigInvalid(origin + ": unknown estimator '" + est + "'");
    }
  }
  if (c.didim_init == "idim" &&
      std::find(c.estimators.begin(), c.estimators.end(), "idim") ==
          c.estimators.end()) {
    throw ConfigInvalid(origin + ": didim.init = idim needs the idim "
                        "estimator enabled");
  }
  return c;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw ConfigInvalid("cannot open config " + path);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario_text(ss.str(), path);
}

ReferenceTrajectory build_trajectory(const ScenarioConfig& config) {
  std::vector<Vec2> wp = config.waypoints;
  std::vector<double> durations = config.durations;
  for (int rep = 1; rep < config.trajectory_repeat; ++rep) {
    for (std::size_t i = 1; i < config.waypoints.size(); ++i) {
      wp.push_back(config.waypoints[i]);
      durations.push_back(config.durations[i - 1]);
    }
  }
  return ReferenceTrajectory::quintic(wp, durations);
}

std::uint64_t fnv1a_hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw ConfigInvalid("cannot hash missing file " + path);
  }
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (f) {
    f.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

const EstimatorOutcome* ScenarioOutcome::find(const std::string& method) const {
  for (const auto& e : estimators) {
    if (e.method == method) return &e;
  }
  return nullptr;
}

namespace {

// per-iteration relative errors of the simulated trajectory against the
// measured (filtered) one and against the reference, for plotting
std::string tracking_error_csv(const ScenarioConfig& c,
                               const ReferenceTrajectory& traj,
                               const IterationHistory& history,
                               const SimRecord& measurements, double fm_low) {
  std::optional<FilterSpec> filt;
  if (!c.filter_raw) filt = c.filter;
  const KinematicsEstimate meas_kin =
      estimate_kinematics(measurements.q, fm_low, filt);

  const double omega_n_min = c.tuning_simulated.omega_n.minCoeff();
  SimConfig cfg = c.sim;
  cfg.fm = fm_low;
  const auto start = traj.at(0.0);
  cfg.q0 = start.q;
  cfg.qd0 = start.qd;

  std::ostringstream out;
  out << "iteration,joint,pos_err_vs_meas,vel_err_vs_meas,acc_err_vs_meas,"
         "pos_err_vs_ref,vel_err_vs_ref,acc_err_vs_ref\n";

  for (const IterationEntry& entry : history) {
    PdGains gains;
    try {
      gains = update_simulated_gains(c.tuning_simulated, entry.chi, c.chain);
    } catch (const NonPositiveInertia&) {
      continue;
    }
    SimRecord sim;
    try {
      sim = trim_transient(
          integrate_closed_loop(entry.chi, gains, c.chain, GainSet::Apriori,
                                traj, cfg, c.ssign),
          omega_n_min);
    } catch (const Error&) {
      continue;
    }
    const Eigen::Index cut = measurements.rows() - sim.rows();
    Eigen::MatrixXd ref_q(sim.rows(), 2), ref_qd(sim.rows(), 2),
        ref_qdd(sim.rows(), 2);
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      const auto ref = traj.at(sim.times[i]);
      ref_q.row(i) = ref.q.transpose();
      ref_qd.row(i) = ref.qd.transpose();
      ref_qdd.row(i) = ref.qdd.transpose();
    }
    for (int j = 0; j < 2; ++j) {
      auto rel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return b.norm() > 0 ? (a - b).norm() / b.norm() : 0.0;
      };
      const Eigen::VectorXd mq = meas_kin.q.col(j).tail(sim.rows());
      const Eigen::VectorXd mqd = meas_kin.qd.col(j).tail(sim.rows());
      const Eigen::VectorXd mqdd = meas_kin.qdd.col(j).tail(sim.rows());
      (void)cut;
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", entry.k, j + 1,
                    rel(sim.q.col(j), mq), rel(sim.qd.col(j), mqd),
                    rel(sim.qdd.col(j), mqdd),
                    rel(sim.q.col(j), ref_q.col(j)),
                    rel(sim.qd.col(j), ref_qd.col(j)),
                    rel(sim.qdd.col(j), ref_qdd.col(j)));
      out << buf;
    }
  }
  return out.str();
}

// measured against reconstructed torque at the final iterate, full rate
std::string torque_fit_csv(const ScenarioConfig& c,
                           const ReferenceTrajectory& traj,
                           const BaseParameters& chi_final,
                           const SimRecord& measurements, double fm_low) {
  const double omega_n_min = c.tuning_simulated.omega_n.minCoeff();
  SimConfig cfg = c.sim;
  cfg.fm = fm_low;
  const auto start = traj.at(0.0);
  cfg.q0 = start.q;
  cfg.qd0 = start.qd;
  const PdGains gains =
      update_simulated_gains(c.tuning_simulated, chi_final, c.chain);
  const SimRecord sim = trim_transient(
      integrate_closed_loop(chi_final, gains, c.chain, GainSet::Apriori, traj,
                            cfg, c.ssign),
      omega_n_min);
  const Eigen::Index cut = measurements.rows() - sim.rows();

  std::ostringstream out;
  out << "time,tau1_measured,tau2_measured,tau1_model,tau2_model\n";
  char buf[256];
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  sim.times[i], measurements.tau(cut + i, 0),
                  measurements.tau(cut + i, 1), sim.tau(i, 0), sim.tau(i, 1));
    out << buf;
  }
  return out.str();
}

std::string mc_stats_csv(const ScenarioConfig& c,
                         const ReferenceTrajectory& traj,
                         const SimRecord& actual, double fm_low) {
  std::optional<DecimationSpec> dec;
  if (c.decimation_nd > 1) {
    DecimationSpec d;
    d.nd = c.decimation_nd;
    d.cutoff_hz = c.decimation_cutoff_hz;
    dec = d;
  }
  (void)traj;
  const ObservationSystem sys = build_observation(
      actual.q, actual.qd, actual.qdd, actual.tau, fm_low, dec, c.ssign);
  const Eigen::VectorXd chi_true = c.chi_nominal.vector();
  const Eigen::VectorXd y0 = sys.w * chi_true;  // exactly consistent
  const double sigma_inj =
      c.mc_sigma_rel * std::sqrt(y0.squaredNorm() / double(y0.size()));

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd estimates(c.mc_replicates, kNumBaseParams);
  Eigen::MatrixXd predicted(c.mc_replicates, kNumBaseParams);
  Eigen::VectorXd sigma_rho_hat(c.mc_replicates);
  ObservationSystem noisy = sys;
  for (int rep = 0; rep < c.mc_replicates; ++rep) {
    noisy.y = y0;
    for (Eigen::Index i = 0; i < noisy.y.size(); ++i) {
      noisy.y[i] += sigma_inj * gauss(rng);
    }
    const EstimationReport r = ols_solve(noisy);
    estimates.row(rep) = r.chi_hat.vector().transpose();
    predicted.row(rep) = r.sigma.transpose();
    sigma_rho_hat[rep] = r.sigma_rho;
  }

  std::ostringstream out;
  out << "parameter,true_value,mean_estimate,empirical_std,mean_predicted_std,"
         "ratio\n";
  char buf[256];
  for (int i = 0; i < kNumBaseParams; ++i) {
    const double mean = estimates.col(i).mean();
    const double emp_std = std::sqrt(
        (estimates.col(i).array() - mean).square().sum() /
        double(c.mc_replicates - 1));
    const double pred = predicted.col(i).mean();
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.6g\n",
                  base_parameter_name(i), chi_true[i], mean, emp_std, pred,
                  pred > 0 ? emp_std / pred : 0.0);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "sigma_rho,%.17g,%.17g,,,%.6g\n", sigma_inj,
                sigma_rho_hat.mean(),
                sigma_inj > 0 ? sigma_rho_hat.mean() / sigma_inj : 0.0);
  out << buf;
  return out.str();
}

} // namespace

ScenarioOutcome run_scenario(const ScenarioConfig& config,
                             const std::string& out_dir_override) {
  ScenarioOutcome outcome;
  outcome.name = config.name;

  const ReferenceTrajectory traj = build_trajectory(config);
  const Vec2 apriori_inertia = config.apriori_inertia
                                   ? *config.apriori_inertia
                                   : effective_inertia(config.chi_nominal);

  // the synthetic actual robot: gains tuned from a priori values, plant
  // driven by the actual drive gains
  const PdGains actual_gains =
      tune_gains(config.tuning_actual, apriori_inertia, config.chain.g_apriori);
  SimConfig actual_cfg = config.sim;
  const auto start = traj.at(0.0);
  actual_cfg.q0 = start.q + config.initial_offset;
  actual_cfg.qd0 = start.qd;
  const SimRecord actual =
      integrate_closed_loop(config.chi_nominal, actual_gains, config.chain,
                            GainSet::Actual, traj, actual_cfg, config.ssign);

  NoiseConfig noise;
  noise.seed = config.seed;
  noise.position_sigma = config.position_sigma;
  noise.torque_band_hz = config.torque_band_hz;
  if (config.torque_sigma) {
    noise.torque_sigma = *config.torque_sigma;
  } else {
    for (int j = 0; j < 2; ++j) {
      const double rms = std::sqrt(actual.tau.col(j).squaredNorm() /
                                   double(actual.rows()));
      noise.torque_sigma[j] = config.torque_sigma_rel * rms;
    }
  }
  SimRecord measurements =
      synthesize_measurements(actual, noise, config.chain);
  double fm_low = config.sim.fm;
  if (config.downsample_factor > 1) {
    measurements = downsample_record(measurements, config.downsample_factor);
    fm_low = config.sim.fm / config.downsample_factor;
  }

  std::optional<FilterSpec> filter;
  if (!config.filter_raw) filter = config.filter;
  std::optional<DecimationSpec> decimation;
  if (config.decimation_nd > 1) {
    DecimationSpec d;
    d.nd = config.decimation_nd;
    d.cutoff_hz = config.decimation_cutoff_hz;
    decimation = d;
  }

  // bundle directory
  fs::path dir = out_dir_override.empty()
                     ? (config.out_dir.empty() ? fs::path("out")
                                               : fs::path(config.out_dir))
                     : fs::path(out_dir_override);
  dir /= config.name;
  fs::create_directories(dir);
  outcome.bundle_dir = dir.string();

  std::vector<std::string> emitted;
  auto emit_file = [&](const std::string& name, const std::string& text) {
    write_text_file(dir / name, text);
    emitted.push_back(name);
  };

  write_record_csv(actual, (dir / "actual_record.csv").string());
  emitted.push_back("actual_record.csv");
  write_record_csv(measurements, (dir / "measurements.csv").string());
  emitted.push_back("measurements.csv");

  std::vector<std::pair<std::string, EstimationReport>> comparable;
  std::optional<EstimationReport> idim_report;

  const SimConfig low_cfg = [&] {
    SimConfig s = config.sim;
    s.fm = fm_low;
    return s;
  }();

  for (const std::string& method : config.estimators) {
    EstimatorOutcome eo;
    eo.method = method;
    try {
      if (method == "idim") {
        const EstimationReport rep =
            idim_identify(measurements, filter, decimation, config.ssign);
        eo.status = "ok";
        eo.has_report = true;
        eo.report = rep;
        idim_report = rep;
        emit_file("idim_report.json", report_to_json(rep, "idim"));
        emit_file("idim_report.csv", report_to_csv(rep));
        comparable.emplace_back("idim", rep);
      } else if (method == "didim") {
        DidimOptions opts = config.didim;
        if (config.didim_init == "regular-ia") {
          opts.init_mode = InitMode::RegularIa;
        } else if (config.didim_init == "regular-zz") {
          opts.init_mode = InitMode::RegularZz;
        } else if (config.didim_init == "idim") {
          if (!idim_report) {
            throw ConfigInvalid("didim.init = idim needs a successful idim "
                                "run first");
          }
          opts.init_mode = InitMode::Explicit;
          opts.chi0 = idim_report->chi_hat;
        } else if (config.didim_init == "explicit") {
          opts.init_mode = InitMode::Explicit;
        } else {
          throw ConfigInvalid("unknown didim.init '" + config.didim_init +
                              "'");
        }
        const IterativeResult res = didim_identify(
            measurements.tau, traj, config.tuning_simulated, config.chain,
            opts, decimation, low_cfg, config.ssign);
        eo.status = res.status == SolveStatus::Converged ? "converged"
                                                         : "max_iterations";
        eo.iterations = res.iterations;
        eo.has_report = true;
        eo.report = res.report;
        emit_file("didim_report.json", report_to_json(res.report, "didim"));
        emit_file("didim_report.csv", report_to_csv(res.report));
        emit_file("didim_history.csv", history_to_csv(res.history));
        {
          std::ostringstream it;
          it << "iteration,err_joint1,err_joint2\n";
          for (const auto& e : res.history) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g\n", e.k,
                          e.rel_output_error[0], e.rel_output_error[1]);
            it << buf;
          }
          emit_file("iteration_error.csv", it.str());
        }
        emit_file("tracking_error.csv",
                  tracking_error_csv(config, traj, res.history, measurements,
                                     fm_low));
        emit_file("torque_fit.csv",
                  torque_fit_csv(config, traj, res.report.chi_hat,
                                 measurements, fm_low));
        comparable.emplace_back("didim", res.report);
      } else if (method == "oe") {
        OeOptions opts = config.oe;
        opts.controller_inertia = apriori_inertia;
        if (config.oe_init == "idim") {
          if (!idim_report) {
            throw ConfigInvalid("oe.init = idim needs a successful idim run "
                                "first");
          }
          opts.chi0 = idim_report->chi_hat;
        } else if (config.oe_init == "scaled") {
          opts.chi0 = BaseParameters::from_vector(
              (config.chi_nominal.vector() * config.oe_init_scale).eval());
        } else if (config.oe_init != "explicit") {
          throw ConfigInvalid("unknown oe.init '" + config.oe_init + "'");
        }
        const IterativeResult res =
            oe_position_identify(measurements.q, traj,
                                 config.tuning_simulated, config.chain, opts,
                                 low_cfg, config.ssign);
        eo.status = res.status == SolveStatus::Converged ? "converged"
                                                         : "max_iterations";
        eo.iterations = res.iterations;
        eo.has_report = true;
        eo.report = res.report;
        emit_file("oe_report.json", report_to_json(res.report, "oe"));
        emit_file("oe_report.csv", report_to_csv(res.report));
        emit_file("oe_history.csv", history_to_csv(res.history));
        comparable.emplace_back("oe", res.report);
      } else if (method == "mc-stats") {
        emit_file("mc_stats.csv", mc_stats_csv(config, traj, actual, fm_low));
        eo.status = "ok";
      }
    } catch (const Error& err) {
      eo.status = std::string("error:") + typeid(err).name();
      eo.detail = err.what();
    }
    outcome.estimators.push_back(eo);
  }

  if (comparable.size() >= 2) {
    emit_file("comparison.csv", compare_reports_csv(comparable));
  }

  // run summary, config echo included
  nlohmann::json result;
  result["name"] = config.name;
  result["config"] = config_echo(config);
  result["torque_sigma"] = {noise.torque_sigma[0], noise.torque_sigma[1]};
  nlohmann::json ests = nlohmann::json::array();
  for (const auto& eo : outcome.estimators) {
    nlohmann::json e;
    e["method"] = eo.method;
    e["status"] = eo.status;
    if (!eo.detail.empty()) e["detail"] = eo.detail;
    if (eo.iterations > 0) e["iterations"] = eo.iterations;
    if (eo.has_report) {
      e["rel_error"] = eo.report.rel_error;
      e["condition_number"] = eo.report.condition_number;
    }
    ests.push_back(e);
  }
  result["estimators"] = ests;
  emit_file("run_result.json", result.dump(2) + "\n");

  // manifest with content hashes; a previous manifest, if present, is
  // checked against the fresh hashes to witness determinism
  nlohmann::json old_manifest;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream f(manifest_path);
    try {
      f >> old_manifest;
    } catch (...) {
      old_manifest = nlohmann::json();
    }
  }
  nlohmann::json manifest;
  manifest["scenario"] = config.name;
  nlohmann::json files = nlohmann::json::object();
  for (const std::string& name : emitted) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a_hash_file((dir / name).string())));
    files[name] = buf;
  }
  manifest["files"] = files;
  if (old_manifest.contains("files")) {
    outcome.manifest_matched_previous = old_manifest["files"] == files;
  }
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  emitted.push_back("manifest.json");
  outcome.files = emitted;
  return outcome;
}

std::string compare_reports_csv(
    const std::vector<std::pair<std::string, EstimationReport>>& reports) {
  if (reports.empty()) {
    throw ConfigInvalid("no reports to compare");
  }
  std::ostringstream out;
  out << "parameter";
  for (const auto& [name, rep] : reports) {
    out << ',' << name << "_chi," << name << "_2sigma," << name
        << "_pct_sigma";
  }
  out << '\n';
  for (int i = 0; i < kNumBaseParams; ++i) {
    out << base_parameter_name(i);
    for (const auto& [name, rep] : reports) {
      const auto v = rep.chi_hat.vector();
      out << ',' << format_double(v[i]) << ','
          << format_double(2.0 * rep.sigma[i]) << ',';
      if (std::isnan(rep.rel_sigma_pct[i])) {
        out << "n/a";
      } else {
        out << format_double(rep.rel_sigma_pct[i]);
      }
    }
    out << '\n';
  }
  out << "rel_error";
  for (const auto& [name, rep] : reports) {
    out << ',' << format_double(rep.rel_error) << ",,";
  }
  out << '\n';
  return out.str();
}

ScenarioConfig with_simulated_bandwidth_scale(ScenarioConfig cfg,
                                              double factor) {
  cfg.tuning_simulated.omega_n *= factor;
  return cfg;
}

ScenarioConfig with_torque_noise_scale(ScenarioConfig cfg, double factor) {
  if (cfg.torque_sigma) {
    *cfg.torque_sigma *= factor;
  } else {
    cfg.torque_sigma_rel *= factor;
  }
  return cfg;
}

} // namespace dynident
