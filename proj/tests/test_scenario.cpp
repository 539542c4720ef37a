#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dynident/scenario.hpp"

using namespace dynident;
namespace fs = std::filesystem;

namespace {

std::string tiny_config(const std::string& name, const std::string& extra) {
  return "name = " + name + "\n" +
         "seed = 91\n"
         "trajectory.waypoints = 0 0   0.8 -1.4   -0.5 1.1   0 0\n"
         "trajectory.durations = 2 2 2\n"
         "noise.position_sigma = 1e-4\n"
         "estimators = idim didim\n"
         "decimation.nd = 10\n" +
         extra;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("config parsing") {
  const ScenarioConfig c = parse_scenario_text(tiny_config("t", ""));
  CHECK(c.name == "t");
  CHECK(c.seed == 91);
  CHECK(c.waypoints.size() == 4);
  CHECK(c.durations.size() == 3);
  CHECK(c.decimation_nd == 10);
  CHECK(c.estimators.size() == 2);
  CHECK(c.tuning_actual.omega_n[1] == 10.0);

  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_scenario_text("bogus_key = 1\n"), ConfigInvalid);
  }
  SUBCASE("noise without a seed is rejected") {
    CHECK_THROWS_AS(
        parse_scenario_text("name = x\n"
                            "trajectory.waypoints = 0 0  1 1\n"
                            "trajectory.durations = 2\n"
                            "estimators = idim\n"),
        ConfigInvalid);
  }
  SUBCASE("inconsistent decimation is rejected") {
    CHECK_THROWS_AS(
        parse_scenario_text(tiny_config("t", "decimation.cutoff_hz = 150\n")),
        ConfigInvalid);
  }
  SUBCASE("unknown estimator is rejected") {
    CHECK_THROWS_AS(
        parse_scenario_text(tiny_config("t", "estimators = kalman\n")),
        ConfigInvalid);
  }
}

TEST_CASE("scenario run emits a complete, reproducible bundle") {
  const fs::path out = fs::temp_directory_path() / "dynident_scenario_test";
  fs::remove_all(out);
  const ScenarioConfig c = parse_scenario_text(tiny_config("tiny", ""));
  const ScenarioOutcome outcome = run_scenario(c, out.string());

  const fs::path dir = outcome.bundle_dir;
  for (const char* name :
       {"actual_record.csv", "measurements.csv", "idim_report.json",
        "idim_report.csv", "didim_report.json", "didim_history.csv",
        "iteration_error.csv", "torque_fit.csv", "comparison.csv",
        "run_result.json", "manifest.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / name));
  }
  const EstimatorOutcome* didim = outcome.find("didim");
  REQUIRE(didim != nullptr);
  CHECK(didim->status == "converged");

  // second run over the same bundle: byte-identical artifacts
  const std::string before = read_file(dir / "didim_report.json");
  const std::string manifest_before = read_file(dir / "manifest.json");
  const ScenarioOutcome again = run_scenario(c, out.string());
  CHECK(again.manifest_matched_previous);
  CHECK(read_file(dir / "didim_report.json") == before);
  CHECK(read_file(dir / "manifest.json") == manifest_before);
  fs::remove_all(out);
}

TEST_CASE("estimator failures are recorded, not thrown") {
  // quarter-bandwidth simulated loop: the transient window exceeds the
  // record, didim must fail and the failure must land in the outcome
  const ScenarioConfig c = parse_scenario_text(
      tiny_config("failing", "tuning.simulated.omega_n = 0.25 2.5\n"));
  const fs::path out = fs::temp_directory_path() / "dynident_fail_test";
  fs::remove_all(out);
  const ScenarioOutcome outcome = run_scenario(c, out.string());
  const EstimatorOutcome* didim = outcome.find("didim");
  REQUIRE(didim != nullptr);
  CHECK(didim->status.rfind("error:", 0) == 0);
  CHECK_FALSE(didim->detail.empty());
  CHECK(fs::exists(fs::path(outcome.bundle_dir) / "run_result.json"));
  fs::remove_all(out);
}

TEST_CASE("comparison table") {
  EstimationReport a;
  a.chi_hat = nominal_parameters();
  a.sigma.setConstant(0.01);
  a.rel_sigma_pct.setConstant(1.0);
  a.rel_error = 0.02;
  EstimationReport b = a;
  b.rel_error = 0.03;

  SUBCASE("single report renders") {
    const std::string csv = compare_reports_csv({{"idim", a}});
    CHECK(csv.find("idim_chi") != std::string::npos);
    CHECK(csv.find("zz1r,3.44") != std::string::npos);
  }
  SUBCASE("two reports render side by side") {
    const std::string csv = compare_reports_csv({{"idim", a}, {"didim", b}});
    CHECK(csv.find("idim_chi") != std::string::npos);
    CHECK(csv.find("didim_chi") != std::string::npos);
    CHECK(csv.find("rel_error,0.02") != std::string::npos);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(compare_reports_csv({}), ConfigInvalid);
  }
}

TEST_CASE("shipped scenario configs parse") {
  const fs::path configs(DYNIDENT_CONFIG_DIR);
  int count = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(parse_scenario_file(entry.path().string()));
    ++count;
  }
  CHECK(count >= 6);
}

TEST_CASE("sweep config transforms") {
  const ScenarioConfig base = parse_scenario_text(tiny_config("s", ""));
  const ScenarioConfig half = with_simulated_bandwidth_scale(base, 0.5);
  CHECK(half.tuning_simulated.omega_n[0] == doctest::Approx(0.5));
  CHECK(half.tuning_simulated.omega_n[1] == doctest::Approx(5.0));
  CHECK(half.tuning_actual.omega_n[0] == 1.0);

  const ScenarioConfig noisy = with_torque_noise_scale(base, 2.0);
  CHECK(noisy.torque_sigma_rel == doctest::Approx(0.04));
}
