#include <doctest.h>

#include <chrono>
#include <random>

#include "test_world.hpp"

using namespace dynident;

namespace {

// independent least-squares oracle: explicit normal equations
struct NormalEquationsFit {
  Eigen::VectorXd chi;
  Eigen::VectorXd sigma;
  double sigma_rho;
};

NormalEquationsFit normal_equations_oracle(const Eigen::MatrixXd& w,
                                           const Eigen::VectorXd& y) {
  const Eigen::MatrixXd wtw = w.transpose() * w;
  const Eigen::MatrixXd wtw_inv = wtw.ldlt().solve(
      Eigen::MatrixXd::Identity(w.cols(), w.cols()));
  NormalEquationsFit fit;
  fit.chi = wtw_inv * (w.transpose() * y);
  const double s2 =
      (y - w * fit.chi).squaredNorm() / double(w.rows() - w.cols());
  fit.sigma_rho = std::sqrt(s2);
  fit.sigma = (s2 * wtw_inv.diagonal()).cwiseSqrt();
  return fit;
}

ObservationSystem random_system(int rows_per_joint, unsigned seed,
                                Vec2 block_noise = Vec2::Zero(),
                                Eigen::VectorXd* chi_out = nullptr) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  const int n = rows_per_joint;
  ObservationSystem sys;
  sys.w.resize(2 * n, kNumBaseParams);
  for (Eigen::Index i = 0; i < sys.w.rows(); ++i) {
    for (int c = 0; c < kNumBaseParams; ++c) {
      sys.w(i, c) = gauss(rng);
    }
  }
  Eigen::VectorXd chi(kNumBaseParams);
  for (int i = 0; i < kNumBaseParams; ++i) chi[i] = gauss(rng);
  sys.y = sys.w * chi;
  for (int j = 0; j < 2; ++j) {
    if (block_noise[j] > 0) {
      for (int i = 0; i < n; ++i) {
        sys.y[j * n + i] += block_noise[j] * gauss(rng);
      }
    }
  }
  sys.joint_blocks = {{0, n}, {n, 2 * n}};
  if (chi_out) *chi_out = chi;
  return sys;
}

} // namespace

TEST_CASE("observation stacking groups rows per joint") {
  const auto traj = testworld::short_trajectory();
  const SimRecord rec = testworld::run_actual(traj, nominal_parameters(),
                                              testworld::unit_chain(),
                                              testworld::full_tuning());
  const SmoothSignConfig ssign;
  const ObservationSystem sys = build_observation(
      rec.q, rec.qd, rec.qdd, rec.tau, 200.0, std::nullopt, ssign);
  CHECK(sys.y.size() == 2 * rec.rows());
  CHECK(sys.w.rows() == 2 * rec.rows());
  REQUIRE(sys.joint_blocks.size() == 2);
  CHECK(sys.joint_blocks[0].second == rec.rows());

  // second-joint block carries the structural zeros of the second row
  CHECK(sys.w.col(0).segment(rec.rows(), rec.rows()).cwiseAbs().maxCoeff() ==
        0.0);

  // torque generated as W chi exactly: OLS residual vanishes
  const EstimationReport rep = ols_solve(sys);
  CHECK(rep.rel_error < 1e-9);
  CHECK((rep.chi_hat.vector() - nominal_parameters().vector()).norm() < 1e-7);

  SUBCASE("decimated row count") {
    DecimationSpec dec;
    dec.nd = 20;
    const ObservationSystem small = build_observation(
        rec.q, rec.qd, rec.qdd, rec.tau, 200.0, dec, ssign);
    CHECK(small.y.size() == 2 * (rec.rows() / 20));
  }
  SUBCASE("length mismatch throws") {
    CHECK_THROWS_AS(
        build_observation(rec.q.topRows(10), rec.qd, rec.qdd, rec.tau, 200.0,
                          std::nullopt, ssign),
        DimensionMismatch);
  }
}

TEST_CASE("ols matches the normal-equations oracle") {
  Eigen::VectorXd chi_true;
  ObservationSystem sys = random_system(40, 123, Vec2(0.3, 0.3), &chi_true);
  const EstimationReport rep = ols_solve(sys);
  const NormalEquationsFit oracle = normal_equations_oracle(sys.w, sys.y);
  CHECK((rep.chi_hat.vector() - oracle.chi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((rep.sigma - oracle.sigma).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rep.sigma_rho == doctest::Approx(oracle.sigma_rho).epsilon(1e-12));
}

TEST_CASE("ols on a square identity system returns the measurements") {
  ObservationSystem sys;
  sys.w = Eigen::MatrixXd::Identity(kNumBaseParams, kNumBaseParams);
  sys.y.resize(kNumBaseParams);
  sys.y << 3.3, -1.2, 0.5, 0.01, 2.2, -0.7, 1.1, 0.0;
  sys.joint_blocks = {{0, 4}, {4, 8}};
  const EstimationReport rep = ols_solve(sys);
  CHECK((rep.chi_hat.vector() - sys.y).cwiseAbs().maxCoeff() < 1e-14);
  // no degrees of freedom left: residual statistics are undefined
  CHECK(std::isnan(rep.sigma_rho));
}

TEST_CASE("relative sigma is undefined only at exactly zero estimates") {
  ObservationSystem sys;
  sys.w.resize(16, kNumBaseParams);
  sys.w << Eigen::MatrixXd::Identity(8, 8), Eigen::MatrixXd::Identity(8, 8);
  sys.y.resize(16);
  sys.y << 1, 2, 3, 4, 5, 6, 7, 1, 1, 2, 3, 4, 5, 6, 7, -1;
  sys.joint_blocks = {{0, 8}, {8, 16}};
  const EstimationReport rep = ols_solve(sys);
  CHECK(rep.chi_hat.fc2 == 0.0);
  CHECK(std::isnan(rep.rel_sigma_pct[7]));
  CHECK_FALSE(std::isnan(rep.rel_sigma_pct[0]));
}

TEST_CASE("rank-deficient and ill-conditioned systems are rejected") {
  ObservationSystem sys = random_system(30, 5);
  sys.w.col(3) = sys.w.col(0);  // exact collinearity
  sys.condition_number = 0;     // force recomputation
  CHECK_THROWS_AS(ols_solve(sys), RankDeficient);

  ObservationSystem thin = random_system(3, 6);
  thin.y.conservativeResize(6);
  thin.w.conservativeResize(6, kNumBaseParams);
  CHECK_THROWS_AS(ols_solve(thin), RankDeficient);
}

TEST_CASE("scaling measurements scales the estimate and residual std") {
  Eigen::VectorXd chi_true;
  ObservationSystem sys = random_system(50, 321, Vec2(0.2, 0.2), &chi_true);
  const EstimationReport base = ols_solve(sys);
  ObservationSystem scaled = sys;
  const double s = 3.7;
  scaled.y *= s;
  const EstimationReport rep = ols_solve(scaled);
  CHECK((rep.chi_hat.vector() - s * base.chi_hat.vector()).cwiseAbs()
            .maxCoeff() < 1e-10);
  CHECK(rep.sigma_rho == doctest::Approx(s * base.sigma_rho).epsilon(1e-10));
  // relative figures are scale-free
  CHECK(rep.rel_error == doctest::Approx(base.rel_error).epsilon(1e-10));
}

TEST_CASE("identical data in rescaled drive units leaves the estimate "
          "unchanged") {
  // same physical torque presented as (v, g) and as (v / s, g * s)
  const auto traj = testworld::short_trajectory();
  DriveChain chain = testworld::testbed_chain();
  const SimRecord rec = testworld::run_actual(traj, nominal_parameters(),
                                              chain,
                                              testworld::full_tuning());
  const SmoothSignConfig ssign;
  SimRecord meas = synthesize_measurements(rec, NoiseConfig{}, chain);

  DriveChain rescaled = chain;
  rescaled.g_actual *= 2.5;
  SimRecord meas2 = meas;
  meas2.v = meas.v / 2.5;
  // implied torque g * v identical
  const EstimationReport a =
      idim_identify(meas, FilterSpec{}, std::nullopt, ssign);
  const EstimationReport b =
      idim_identify(meas2, FilterSpec{}, std::nullopt, ssign);
  CHECK((a.chi_hat.vector() - b.chi_hat.vector()).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("wls equals ols under uniform block noise estimates") {
  // exactly consistent system: both block sigmas hit the floor, weights equal
  ObservationSystem sys = random_system(30, 9);
  const EstimationReport ols = ols_solve(sys);
  const EstimationReport wls = wls_solve(sys);
  CHECK((ols.chi_hat.vector() - wls.chi_hat.vector()).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("wls beats ols under strongly unequal joint noise") {
  const int seeds = 300;
  Eigen::MatrixXd ols_est(seeds, kNumBaseParams);
  Eigen::MatrixXd wls_est(seeds, kNumBaseParams);
  Eigen::VectorXd chi_true;
  for (int s = 0; s < seeds; ++s) {
    ObservationSystem sys =
        random_system(40, 1000 + s, Vec2(0.05, 0.5), &chi_true);
    ols_est.row(s) = ols_solve(sys).chi_hat.vector().transpose();
    wls_est.row(s) = wls_solve(sys).chi_hat.vector().transpose();
  }
  double ols_var_total = 0, wls_var_total = 0;
  for (int i = 0; i < kNumBaseParams; ++i) {
    const double mo = ols_est.col(i).mean();
    const double mw = wls_est.col(i).mean();
    const double vo = (ols_est.col(i).array() - mo).square().mean();
    const double vw = (wls_est.col(i).array() - mw).square().mean();
    ols_var_total += vo;
    wls_var_total += vw;
    CHECK(vw <= 1.15 * vo);
  }
  CHECK(wls_var_total < ols_var_total);
}

TEST_CASE("idim recovers the generating parameters on filtered noisy data") {
  const auto traj = testworld::short_trajectory();
  const DriveChain chain = testworld::testbed_chain();
  const BaseParameters chi = nominal_parameters();
  const SimRecord rec =
      testworld::run_actual(traj, chi, chain, testworld::full_tuning());
  NoiseConfig noise;
  for (int j = 0; j < 2; ++j) {
    noise.torque_sigma[j] =
        0.02 * std::sqrt(rec.tau.col(j).squaredNorm() / rec.rows());
  }
  noise.torque_band_hz = 4.0;
  noise.position_sigma = 1e-4;
  noise.seed = 424242;
  const SimRecord meas = synthesize_measurements(rec, noise, chain);
  DecimationSpec dec;
  dec.nd = 20;
  const EstimationReport rep =
      idim_identify(meas, FilterSpec{}, dec, SmoothSignConfig{});
  const auto err = (rep.chi_hat.vector() - chi.vector()).eval();
  for (int i = 0; i < kNumBaseParams; ++i) {
    CHECK(std::abs(err[i]) < 2.0 * rep.sigma[i]);
    CHECK(rep.rel_sigma_pct[i] < 10.0);
  }
}

TEST_CASE("didim input alignment is checked") {
  const auto traj = testworld::short_trajectory();
  Series2 tau = Series2::Zero(100, 2);
  CHECK_THROWS_AS(
      didim_identify(tau, traj, testworld::full_tuning(),
                     testworld::unit_chain(), DidimOptions{}, std::nullopt,
                     SimConfig{}, SmoothSignConfig{}),
      DimensionMismatch);
}

TEST_CASE("didim exact recovery from both regular starts") {
  const auto traj = testworld::short_trajectory();
  const DriveChain chain = testworld::testbed_chain();
  const BaseParameters chi = nominal_parameters();
  const SimRecord rec =
      testworld::run_actual(traj, chi, chain, testworld::full_tuning());

  for (const InitMode mode : {InitMode::RegularIa, InitMode::RegularZz}) {
    DidimOptions opts;
    opts.init_mode = mode;
    const IterativeResult res =
        didim_identify(rec.tau, traj, testworld::full_tuning(), chain, opts,
                       std::nullopt, SimConfig{}, SmoothSignConfig{});
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.iterations <= 5);
    const auto err = (res.report.chi_hat.vector() - chi.vector())
                         .cwiseQuotient(chi.vector())
                         .cwiseAbs();
    CHECK(err.maxCoeff() < 1e-3);
    // torque error collapses after the first solve
    CHECK(res.history.front().rel_output_error.minCoeff() > 0.1);
    CHECK(res.history.back().rel_output_error.maxCoeff() < 1e-3);
  }
}

TEST_CASE("didim reports failure when the transient swallows the record") {
  const auto traj = testworld::short_trajectory();
  const DriveChain chain = testworld::testbed_chain();
  const SimRecord rec = testworld::run_actual(traj, nominal_parameters(),
                                              chain,
                                              testworld::full_tuning());
  LoopTuning quarter = testworld::full_tuning();
  quarter.omega_n /= 4.0;  // 5 / 0.25 = 20 s transient on an 8 s record
  CHECK_THROWS_AS(
      didim_identify(rec.tau, traj, quarter, chain, DidimOptions{},
                     std::nullopt, SimConfig{}, SmoothSignConfig{}),
      RecordTooShort);
}

TEST_CASE("output-error baseline recovers parameters and costs more than "
          "didim") {
  const auto traj = testworld::short_trajectory();
  const DriveChain chain = testworld::testbed_chain();
  const BaseParameters chi = nominal_parameters();
  const SimRecord rec =
      testworld::run_actual(traj, chi, chain, testworld::full_tuning());

  OeOptions opts;
  opts.chi0 = BaseParameters::from_vector((0.8 * chi.vector()).eval());
  opts.controller_inertia = effective_inertia(chi);

  const auto t0 = std::chrono::steady_clock::now();
  const IterativeResult oe =
      oe_position_identify(rec.q, traj, testworld::full_tuning(), chain, opts,
                           SimConfig{}, SmoothSignConfig{});
  const auto t1 = std::chrono::steady_clock::now();
  const IterativeResult didim =
      didim_identify(rec.tau, traj, testworld::full_tuning(), chain,
                     DidimOptions{}, std::nullopt, SimConfig{},
                     SmoothSignConfig{});
  const auto t2 = std::chrono::steady_clock::now();

  CHECK(oe.status == SolveStatus::Converged);
  const auto err = (oe.report.chi_hat.vector() - chi.vector())
                       .cwiseQuotient(chi.vector())
                       .cwiseAbs();
  CHECK(err.maxCoeff() < 0.01);

  const auto oe_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  const auto didim_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(t2 - t1).count();
  CHECK(didim_ms <= oe_ms);
}

TEST_CASE("report serialization round trips") {
  Eigen::VectorXd chi_true;
  ObservationSystem sys = random_system(40, 77, Vec2(0.1, 0.1), &chi_true);
  const EstimationReport rep = ols_solve(sys);
  const std::string json = report_to_json(rep, "test");
  const EstimationReport back = report_from_json(json);
  CHECK((back.chi_hat.vector() - rep.chi_hat.vector()).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK(back.rel_error == doctest::Approx(rep.rel_error).epsilon(1e-12));

  const std::string csv = report_to_csv(rep);
  CHECK(csv.find("parameter,value,two_sigma,pct_sigma") == 0);
  CHECK(csv.find("zz1r,") != std::string::npos);
  CHECK(csv.find("rel_error,") != std::string::npos);
}
