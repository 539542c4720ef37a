#include "dynident/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace dynident {

namespace {

constexpr double kConditionWarnLevel = 200.0;
constexpr double kConditionCap = 1e8;

double require_condition(const Eigen::MatrixXd& w) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  const double cond = smin > 0 ? sv[0] / smin
                               : std::numeric_limits<double>::infinity();
  return cond;
}

// Core least squares with statistics on an (r x b) system.
EstimationReport solve_core(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                            double condition_number) {
  const Eigen::Index r = w.rows();
  const Eigen::Index b = w.cols();
  if (y.size() != r) {
    throw DimensionMismatch("Y and W row counts differ");
  }
  if (r < b) {
    throw RankDeficient("system has " + std::to_string(r) +
                        " rows for " + std::to_string(b) + " parameters");
  }
  if (condition_number <= 0) {
    condition_number = require_condition(w);
  }
  if (!std::isfinite(condition_number) || condition_number > kConditionCap) {
    throw RankDeficient("observation matrix condition number " +
                        std::to_string(condition_number) + " above cap");
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd chi = svd.solve(y);
  const Eigen::VectorXd residual = y - w * chi;
  // a square system leaves no degrees of freedom for residual statistics
  const double sigma_rho2 =
      r > b ? residual.squaredNorm() / double(r - b)
            : std::numeric_limits<double>::quiet_NaN();

  const Eigen::VectorXd inv_sv2 = svd.singularValues().array().square().inverse();
  const Eigen::MatrixXd cov =
      sigma_rho2 * svd.matrixV() * inv_sv2.asDiagonal() *
      svd.matrixV().transpose();

  EstimationReport rep;
  rep.chi_hat = BaseParameters::from_vector(chi);
  for (int i = 0; i < kNumBaseParams; ++i) {
    rep.sigma[i] = r > b ? std::sqrt(std::max(0.0, cov(i, i)))
                         : std::numeric_limits<double>::quiet_NaN();
    rep.rel_sigma_pct[i] =
        chi[i] != 0.0 ? 100.0 * rep.sigma[i] / std::abs(chi[i])
                      : std::numeric_limits<double>::quiet_NaN();
  }
  rep.sigma_rho = std::sqrt(sigma_rho2);
  const double ynorm = y.norm();
  rep.rel_error = ynorm > 0 ? residual.norm() / ynorm : 0.0;
  rep.condition_number = condition_number;
  return rep;
}

Vec2 per_joint_rel_error(const Eigen::VectorXd& y,
                         const Eigen::VectorXd& y_model,
                         const BlockBounds& blocks) {
  Vec2 err = Vec2::Zero();
  for (std::size_t j = 0; j < blocks.size() && j < 2; ++j) {
    const auto [begin, end] = blocks[j];
    const auto yj = y.segment(begin, end - begin);
    const auto mj = y_model.segment(begin, end - begin);
    err[int(j)] = yj.norm() > 0 ? (yj - mj).norm() / yj.norm() : 0.0;
  }
  return err;
}

// Stacks one series per joint, decimated or raw, matching the row layout of
// build_observation.
Eigen::VectorXd stack_blocks(const Eigen::Ref<const Eigen::MatrixXd>& series,
                             double fm,
                             const std::optional<DecimationSpec>& decimation,
                             BlockBounds* blocks_out = nullptr) {
  std::vector<Eigen::VectorXd> parts;
  for (Eigen::Index j = 0; j < series.cols(); ++j) {
    if (decimation && decimation->nd > 1) {
      parts.push_back(decimate_series(series.col(j), fm, *decimation));
    } else {
      parts.push_back(series.col(j));
    }
  }
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  BlockBounds blocks;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    blocks.emplace_back(at, at + p.size());
    at += p.size();
  }
  if (blocks_out) *blocks_out = blocks;
  return out;
}

int trim_cut_index(double fm, Eigen::Index n, double omega_n_min) {
  const double t_cut = 5.0 / omega_n_min;
  const Eigen::Index first =
      static_cast<Eigen::Index>(std::floor(t_cut * fm));
  if (first >= n) {
    throw RecordTooShort("no samples past the " + std::to_string(t_cut) +
                         " s closed-loop transient");
  }
  return static_cast<int>(first);
}

BaseParameters initial_iterate(const DidimOptions& opts) {
  switch (opts.init_mode) {
    case InitMode::RegularIa:
      return regular_ia_init();
    case InitMode::RegularZz:
      return regular_zz_init();
    case InitMode::Explicit:
      return opts.chi0;
  }
  return regular_ia_init();
}

double max_relative_change(const BaseParameters& from, const BaseParameters& to,
                           double small_floor) {
  const auto a = from.vector();
  const auto b = to.vector();
  double worst = 0;
  for (int i = 0; i < kNumBaseParams; ++i) {
    const double change = std::abs(b[i] - a[i]);
    const double rel =
        std::abs(a[i]) >= small_floor ? change / std::abs(a[i])
                                      : (change < small_floor ? 0.0 : 1.0);
    worst = std::max(worst, rel);
  }
  return worst;
}

} // namespace

ObservationSystem build_observation(
    const Eigen::Ref<const Eigen::MatrixXd>& q,
    const Eigen::Ref<const Eigen::MatrixXd>& qd,
    const Eigen::Ref<const Eigen::MatrixXd>& qdd,
    const Eigen::Ref<const Eigen::MatrixXd>& torques, double fm,
    const std::optional<DecimationSpec>& decimation,
    const SmoothSignConfig& ssign) {
  const Eigen::Index n = q.rows();
  if (qd.rows() != n || qdd.rows() != n || torques.rows() != n) {
    throw DimensionMismatch("kinematics and torque series lengths differ");
  }
  if (n < 1) {
    throw DimensionMismatch("empty series");
  }

  Eigen::MatrixXd w_full(2 * n, kNumBaseParams);
  Eigen::VectorXd y_full(2 * n);
  JointState s;
  for (Eigen::Index k = 0; k < n; ++k) {
    s.q = q.row(k).transpose();
    s.qd = qd.row(k).transpose();
    s.qdd = qdd.row(k).transpose();
    const RegressorMatrix m = idm_regressor(s, ssign);
    w_full.row(k) = m.row(0);
    w_full.row(n + k) = m.row(1);
    y_full[k] = torques(k, 0);
    y_full[n + k] = torques(k, 1);
  }
  BlockBounds blocks{{0, n}, {n, 2 * n}};

  ObservationSystem sys;
  if (decimation && decimation->nd > 1) {
    auto [y_dec, w_dec] = parallel_decimate(y_full, w_full, blocks, fm,
                                            *decimation);
    const Eigen::Index m = y_dec.size() / 2;
    sys.y = std::move(y_dec);
    sys.w = std::move(w_dec);
    sys.joint_blocks = {{0, m}, {m, 2 * m}};
  } else {
    sys.y = std::move(y_full);
    sys.w = std::move(w_full);
    sys.joint_blocks = blocks;
  }

  sys.condition_number = require_condition(sys.w);
  if (!std::isfinite(sys.condition_number) ||
      sys.condition_number > kConditionCap) {
    throw RankDeficient("observation matrix condition number " +
                        std::to_string(sys.condition_number) + " above cap");
  }
  if (sys.condition_number > kConditionWarnLevel) {
    sys.condition_warning = true;
    std::cerr << "warning: observation matrix condition number "
              << sys.condition_number << " above " << kConditionWarnLevel
              << "\n";
  }
  return sys;
}

EstimationReport ols_solve(const ObservationSystem& sys) {
  return solve_core(sys.y, sys.w, sys.condition_number);
}

EstimationReport wls_solve(const ObservationSystem& sys) {
  const Eigen::Index b = sys.w.cols();
  const double sigma_floor =
      1e-12 * (sys.y.norm() / std::sqrt(double(std::max<Eigen::Index>(
                                 1, sys.y.size()))) +
               1.0);
  Eigen::VectorXd y_scaled = sys.y;
  Eigen::MatrixXd w_scaled = sys.w;
  for (const auto& [begin, end] : sys.joint_blocks) {
    const Eigen::Index len = end - begin;
    // a joint block only sees the parameters present in its regressor row;
    // the per-joint residual std comes from a solve over those columns
    std::vector<Eigen::Index> active;
    for (Eigen::Index c = 0; c < b; ++c) {
      if (sys.w.col(c).segment(begin, len).cwiseAbs().maxCoeff() > 0) {
        active.push_back(c);
      }
    }
    const Eigen::Index ba = static_cast<Eigen::Index>(active.size());
    if (ba == 0 || len <= ba) {
      throw RankDeficient("joint block too short for per-joint weighting");
    }
    Eigen::MatrixXd wj(len, ba);
    for (Eigen::Index c = 0; c < ba; ++c) {
      wj.col(c) = sys.w.col(active[c]).segment(begin, len);
    }
    const auto yj = sys.y.segment(begin, len);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wj);
    if (qr.rank() < ba) {
      throw RankDeficient("joint block rank deficient");
    }
    const Eigen::VectorXd chi_j = qr.solve(yj);
    const double sigma_j = std::max(
        sigma_floor,
        std::sqrt((yj - wj * chi_j).squaredNorm() / double(len - ba)));
    y_scaled.segment(begin, len) /= sigma_j;
    w_scaled.middleRows(begin, len) /= sigma_j;
  }
  EstimationReport rep = solve_core(y_scaled, w_scaled, 0.0);
  // residual figures reported on the original scale
  const Eigen::VectorXd residual = sys.y - sys.w * rep.chi_hat.vector();
  rep.rel_error = sys.y.norm() > 0 ? residual.norm() / sys.y.norm() : 0.0;
  rep.sigma_rho =
      std::sqrt(residual.squaredNorm() / double(sys.y.size() - b));
  rep.condition_number = sys.condition_number;
  return rep;
}

EstimationReport idim_identify(const SimRecord& measured,
                               const std::optional<FilterSpec>& filter,
                               const std::optional<DecimationSpec>& decimation,
                               const SmoothSignConfig& ssign) {
  if (measured.rows() < 2) {
    throw DimensionMismatch("measured record too short");
  }
  const double fm = 1.0 / (measured.times[1] - measured.times[0]);
  const KinematicsEstimate kin =
      estimate_kinematics(measured.q, fm, filter);
  const ObservationSystem sys = build_observation(
      kin.q, kin.qd, kin.qdd, measured.tau, fm, decimation, ssign);
  return wls_solve(sys);
}

IterativeResult didim_identify(const Series2& tau_measured,
                               const ReferenceTrajectory& traj,
                               const LoopTuning& tuning,
                               const DriveChain& chain,
                               const DidimOptions& opts,
                               const std::optional<DecimationSpec>& decimation,
                               const SimConfig& cfg,
                               const SmoothSignConfig& ssign) {
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::lround(traj.duration() * cfg.fm));
  if (tau_measured.rows() != n) {
    throw DimensionMismatch("torque series has " +
                            std::to_string(tau_measured.rows()) +
                            " rows, trajectory sampling needs " +
                            std::to_string(n));
  }

  const double omega_n_min = tuning.omega_n.minCoeff();
  const int cut = trim_cut_index(cfg.fm, n, omega_n_min);
  const Eigen::Index m = n - cut;
  const Series2 tau_meas_trimmed = tau_measured.middleRows(cut, m);

  SimConfig sim_cfg = cfg;
  const ReferenceTrajectory::Sample start = traj.at(0.0);
  sim_cfg.q0 = start.q;
  sim_cfg.qd0 = start.qd;

  BlockBounds meas_blocks;
  const Eigen::VectorXd y =
      stack_blocks(tau_meas_trimmed, cfg.fm, decimation, &meas_blocks);

  IterativeResult result;
  BaseParameters chi = initial_iterate(opts);
  double prev_residual_norm = 0;
  bool have_prev = false;
  double best_residual = std::numeric_limits<double>::infinity();
  EstimationReport best_report;

  auto simulate_at = [&](const BaseParameters& p, PdGains* gains_out) {
    const PdGains gains = update_simulated_gains(tuning, p, chain);
    if (gains_out) *gains_out = gains;
    SimRecord rec =
        integrate_closed_loop(p, gains, chain, GainSet::Apriori, traj,
                              sim_cfg, ssign);
    return trim_transient(rec, omega_n_min);
  };

  for (int k = 0; k < opts.max_iterations; ++k) {
    PdGains gains;
    const SimRecord sim = simulate_at(chi, &gains);

    const ObservationSystem sys = build_observation(
        sim.q, sim.qd, sim.qdd, tau_meas_trimmed, cfg.fm, decimation, ssign);
    const Eigen::VectorXd y_sim =
        stack_blocks(sim.tau, cfg.fm, decimation, nullptr);

    IterationEntry entry;
    entry.k = k;
    entry.chi = chi;
    entry.rel_output_error = per_joint_rel_error(y, y_sim, sys.joint_blocks);
    entry.kv = gains.kv;
    entry.delta_chi_norm =
        result.history.empty()
            ? 0.0
            : (chi.vector() - result.history.back().chi.vector()).norm();
    result.history.push_back(entry);

    const EstimationReport rep = opts.use_wls ? wls_solve(sys) : ols_solve(sys);
    result.iterations = k + 1;
    const Eigen::VectorXd residual = sys.y - sys.w * rep.chi_hat.vector();
    const double residual_norm = residual.norm();

    if (residual_norm < best_residual) {
      best_residual = residual_norm;
      best_report = rep;
    }

    const double rel_change =
        max_relative_change(chi, rep.chi_hat, opts.small_param_floor);
    const bool residual_settled =
        have_prev && prev_residual_norm > 0 &&
        (residual_norm - prev_residual_norm) / prev_residual_norm <= opts.tol1;
    const bool params_settled = rel_change <= opts.tol2;

    chi = rep.chi_hat;
    prev_residual_norm = residual_norm;
    have_prev = true;

    if (residual_settled && params_settled) {
      result.report = rep;
      result.status = SolveStatus::Converged;

      // validation pass at the converged iterate for the final history entry
      PdGains final_gains;
      const SimRecord final_sim = simulate_at(chi, &final_gains);
      const Eigen::VectorXd y_final =
          stack_blocks(final_sim.tau, cfg.fm, decimation, nullptr);
      IterationEntry last;
      last.k = k + 1;
      last.chi = chi;
      last.rel_output_error = per_joint_rel_error(y, y_final, meas_blocks);
      last.kv = final_gains.kv;
      last.delta_chi_norm =
          (chi.vector() - result.history.back().chi.vector()).norm();
      result.history.push_back(last);
      result.report.rel_error =
          y.norm() > 0 ? (y - y_final).norm() / y.norm() : 0.0;
      return result;
    }
  }

  result.status = SolveStatus::MaxIterations;
  result.report = best_report;
  return result;
}

IterativeResult oe_position_identify(const Series2& q_measured,
                                     const ReferenceTrajectory& traj,
                                     const LoopTuning& tuning,
                                     const DriveChain& chain,
                                     const OeOptions& opts,
                                     const SimConfig& cfg,
                                     const SmoothSignConfig& ssign) {
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::lround(traj.duration() * cfg.fm));
  if (q_measured.rows() != n) {
    throw DimensionMismatch("position series not aligned to the trajectory "
                            "sampling");
  }
  const double omega_n_min = tuning.omega_n.minCoeff();
  const int cut = trim_cut_index(cfg.fm, n, omega_n_min);
  const Eigen::Index m = n - cut;

  const PdGains gains =
      tune_gains(tuning, opts.controller_inertia, chain.g_apriori);

  SimConfig sim_cfg = cfg;
  const ReferenceTrajectory::Sample start = traj.at(0.0);
  sim_cfg.q0 = start.q;
  sim_cfg.qd0 = start.qd;

  BlockBounds blocks{{0, m}, {m, 2 * m}};
  Eigen::VectorXd y(2 * m);
  y.segment(0, m) = q_measured.col(0).segment(cut, m);
  y.segment(m, m) = q_measured.col(1).segment(cut, m);

  auto simulated_positions = [&](const BaseParameters& p) {
    const SimRecord rec = trim_transient(
        integrate_closed_loop(p, gains, chain, GainSet::Apriori, traj,
                              sim_cfg, ssign),
        omega_n_min);
    Eigen::VectorXd ys(2 * m);
    ys.segment(0, m) = rec.q.col(0);
    ys.segment(m, m) = rec.q.col(1);
    return ys;
  };

  IterativeResult result;
  result.status = SolveStatus::MaxIterations;
  BaseParameters chi = opts.chi0;
  Eigen::VectorXd y_sim = simulated_positions(chi);
  double residual_norm = (y - y_sim).norm();
  int consecutive_increases = 0;

  Eigen::MatrixXd jac(2 * m, kNumBaseParams);

  for (int k = 0; k < opts.max_iterations; ++k) {
    IterationEntry entry;
    entry.k = k;
    entry.chi = chi;
    entry.rel_output_error = per_joint_rel_error(y, y_sim, blocks);
    entry.kv = gains.kv;
    entry.delta_chi_norm =
        result.history.empty()
            ? 0.0
            : (chi.vector() - result.history.back().chi.vector()).norm();
    result.history.push_back(entry);

    // sensitivity of the simulated position to each parameter, by central
    // differences (two extra simulations per parameter)
    const auto chi_vec = chi.vector();
    for (int i = 0; i < kNumBaseParams; ++i) {
      const double h =
          std::max(std::abs(chi_vec[i]) * opts.fd_rel_step, opts.fd_abs_floor);
      Eigen::Matrix<double, kNumBaseParams, 1> v_plus = chi_vec;
      Eigen::Matrix<double, kNumBaseParams, 1> v_minus = chi_vec;
      v_plus[i] += h;
      v_minus[i] -= h;
      BaseParameters p_plus = BaseParameters::from_vector(v_plus);
      BaseParameters p_minus = BaseParameters::from_vector(v_minus);
      p_plus.ia1 = p_minus.ia1 = chi.ia1;
      p_plus.ia2 = p_minus.ia2 = chi.ia2;
      jac.col(i) = (simulated_positions(p_plus) - simulated_positions(p_minus)) /
                   (2.0 * h);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    if (qr.rank() < kNumBaseParams) {
      throw RankDeficient("output-error jacobian rank deficient");
    }
    const Eigen::VectorXd step = qr.solve(y - y_sim);

    // full Gauss-Newton step, halved while the residual grows
    double alpha = 1.0;
    BaseParameters chi_next = chi;
    Eigen::VectorXd y_next = y_sim;
    double next_norm = std::numeric_limits<double>::infinity();
    for (int half = 0; half <= opts.max_step_halvings; ++half) {
      BaseParameters cand = BaseParameters::from_vector(chi_vec + alpha * step);
      cand.ia1 = chi.ia1;
      cand.ia2 = chi.ia2;
      try {
        Eigen::VectorXd y_cand = simulated_positions(cand);
        const double cand_norm = (y - y_cand).norm();
        if (cand_norm < next_norm) {
          next_norm = cand_norm;
          chi_next = cand;
          y_next = std::move(y_cand);
        }
        if (cand_norm < residual_norm) break;
      } catch (const SingularInertia&) {
        // iterate stepped through a degenerate inertia; shorten and retry
      }
      alpha /= 2.0;
    }
    if (!std::isfinite(next_norm)) {
      throw NonConvergence("no usable Gauss-Newton step");
    }

    const double rel_change =
        max_relative_change(chi, chi_next, opts.small_param_floor);
    const double prev_norm = residual_norm;
    chi = chi_next;
    y_sim = y_next;
    residual_norm = next_norm;
    result.iterations = k + 1;

    if (residual_norm > prev_norm) {
      if (++consecutive_increases >= 2) {
        throw NonConvergence("output-error residual increased twice in a row");
      }
    } else {
      consecutive_increases = 0;
    }

    const bool residual_settled =
        (residual_norm - prev_norm) / std::max(prev_norm, 1e-300) <= opts.tol1;
    if (residual_settled && rel_change <= opts.tol2) {
      result.status = SolveStatus::Converged;
      break;
    }
  }

  IterationEntry last;
  last.k = result.iterations;
  last.chi = chi;
  last.rel_output_error = per_joint_rel_error(y, y_sim, blocks);
  last.kv = gains.kv;
  last.delta_chi_norm =
      (chi.vector() - result.history.back().chi.vector()).norm();
  result.history.push_back(last);

  // Gauss-Newton covariance at the final iterate: sigma_rho^2 (J^T J)^-1
  EstimationReport rep;
  rep.chi_hat = chi;
  const double dof = double(2 * m - kNumBaseParams);
  const double sigma_rho2 = residual_norm * residual_norm / dof;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
  const Eigen::VectorXd inv_sv2 =
      svd.singularValues().array().square().inverse();
  const Eigen::MatrixXd cov = sigma_rho2 * svd.matrixV() *
                              inv_sv2.asDiagonal() * svd.matrixV().transpose();
  const auto v = chi.vector();
  for (int i = 0; i < kNumBaseParams; ++i) {
    rep.sigma[i] = std::sqrt(std::max(0.0, cov(i, i)));
    rep.rel_sigma_pct[i] =
        v[i] != 0.0 ? 100.0 * rep.sigma[i] / std::abs(v[i])
                    : std::numeric_limits<double>::quiet_NaN();
  }
  rep.sigma_rho = std::sqrt(sigma_rho2);
  rep.rel_error = y.norm() > 0 ? residual_norm / y.norm() : 0.0;
  const auto& sv = svd.singularValues();
  rep.condition_number =
      sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1]
                            : std::numeric_limits<double>::infinity();
  result.report = rep;
  return result;
}

namespace {

nlohmann::json vector_to_json(
    const Eigen::Matrix<double, kNumBaseParams, 1>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < kNumBaseParams; ++i) {
    if (std::isnan(v[i])) {
      arr.push_back(nullptr);
    } else {
      arr.push_back(v[i]);
    }
  }
  return arr;
}

} // namespace

std::string report_to_json(const EstimationReport& report,
                           const std::string& method) {
  nlohmann::json j;
  j["method"] = method;
  nlohmann::json chi;
  const auto v = report.chi_hat.vector();
  for (int i = 0; i < kNumBaseParams; ++i) {
    chi[base_parameter_name(i)] = v[i];
  }
  j["chi_hat"] = chi;
  j["sigma"] = vector_to_json(report.sigma);
  j["rel_sigma_pct"] = vector_to_json(report.rel_sigma_pct);
  j["sigma_rho"] = report.sigma_rho;
  j["rel_error"] = report.rel_error;
  j["condition_number"] = report.condition_number;
  return j.dump(2) + "\n";
}

EstimationReport report_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  EstimationReport rep;
  Eigen::Matrix<double, kNumBaseParams, 1> v;
  for (int i = 0; i < kNumBaseParams; ++i) {
    v[i] = j.at("chi_hat").at(base_parameter_name(i)).get<double>();
  }
  rep.chi_hat = BaseParameters::from_vector(v);
  for (int i = 0; i < kNumBaseParams; ++i) {
    rep.sigma[i] = j.at("sigma")[i].is_null()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : j.at("sigma")[i].get<double>();
    rep.rel_sigma_pct[i] = j.at("rel_sigma_pct")[i].is_null()
                               ? std::numeric_limits<double>::quiet_NaN()
                               : j.at("rel_sigma_pct")[i].get<double>();
  }
  rep.sigma_rho = j.at("sigma_rho").get<double>();
  rep.rel_error = j.at("rel_error").get<double>();
  rep.condition_number = j.at("condition_number").get<double>();
  return rep;
}

std::string report_to_csv(const EstimationReport& report) {
  std::ostringstream out;
  out << "parameter,value,two_sigma,pct_sigma\n";
  const auto v = report.chi_hat.vector();
  char buf[128];
  for (int i = 0; i < kNumBaseParams; ++i) {
    if (std::isnan(report.rel_sigma_pct[i])) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,n/a\n",
                    base_parameter_name(i), v[i], 2.0 * report.sigma[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n",
                    base_parameter_name(i), v[i], 2.0 * report.sigma[i],
                    report.rel_sigma_pct[i]);
    }
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "rel_error,%.17g,,\n", report.rel_error);
  out << buf;
  std::snprintf(buf, sizeof(buf), "condition_number,%.17g,,\n",
                report.condition_number);
  out << buf;
  return out.str();
}

std::string history_to_csv(const IterationHistory& history) {
  std::ostringstream out;
  out << "iteration";
  for (int i = 0; i < kNumBaseParams; ++i) {
    out << ',' << base_parameter_name(i);
  }
  out << ",err_joint1,err_joint2,kv1,kv2,delta_chi_norm\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    out << buf;
  };
  for (const IterationEntry& e : history) {
    out << e.k;
    const auto v = e.chi.vector();
    for (int i = 0; i < kNumBaseParams; ++i) {
      out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << buf;
    }
    out << ',';
    put(e.rel_output_error[0], ',');
    put(e.rel_output_error[1], ',');
    put(e.kv[0], ',');
    put(e.kv[1], ',');
    std::snprintf(buf, sizeof(buf), "%.17g\n", e.delta_chi_norm);
    out << buf;
  }
  return out.str();
}

} // namespace dynident
