#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynident/scenario.hpp"

namespace fs = std::filesystem;
using namespace dynident;

namespace {

struct GlobalFlags {
  std::string out_dir;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

void print_report_table(const std::string& name, const EstimationReport& rep) {
  std::printf("%-8s %12s %12s %10s\n", name.c_str(), "value", "2sigma",
              "pct_sigma");
  const auto v = rep.chi_hat.vector();
  for (int i = 0; i < kNumBaseParams; ++i) {
    if (std::isnan(rep.rel_sigma_pct[i])) {
      std::printf("%-8s %12.5g %12.3g %10s\n", base_parameter_name(i), v[i],
                  2.0 * rep.sigma[i], "n/a");
    } else {
      std::printf("%-8s %12.5g %12.3g %10.3g\n", base_parameter_name(i), v[i],
                  2.0 * rep.sigma[i], rep.rel_sigma_pct[i]);
    }
  }
  std::printf("rel_error %.4g   condition %.4g\n\n", rep.rel_error,
              rep.condition_number);
}

nlohmann::json outcome_to_json(const ScenarioOutcome& outcome) {
  nlohmann::json j;
  j["name"] = outcome.name;
  j["bundle_dir"] = outcome.bundle_dir;
  j["manifest_matched_previous"] = outcome.manifest_matched_previous;
  nlohmann::json ests = nlohmann::json::array();
  for (const auto& e : outcome.estimators) {
    nlohmann::json je;
    je["method"] = e.method;
    je["status"] = e.status;
    if (!e.detail.empty()) je["detail"] = e.detail;
    if (e.iterations > 0) je["iterations"] = e.iterations;
    if (e.has_report) je["rel_error"] = e.report.rel_error;
    ests.push_back(je);
  }
  j["estimators"] = ests;
  return j;
}

void print_outcome(const ScenarioOutcome& outcome, const std::string& format) {
  if (format == "json") {
    std::cout << outcome_to_json(outcome).dump(2) << "\n";
    return;
  }
  std::printf("%s -> %s\n", outcome.name.c_str(), outcome.bundle_dir.c_str());
  for (const auto& e : outcome.estimators) {
    std::printf("  %-10s %-16s", e.method.c_str(), e.status.c_str());
    if (e.iterations > 0) std::printf(" iterations=%d", e.iterations);
    if (e.has_report) std::printf(" rel_error=%.4g", e.report.rel_error);
    if (!e.detail.empty()) std::printf(" (%s)", e.detail.c_str());
    std::printf("\n");
  }
}

ScenarioConfig load_config(const std::string& path, const GlobalFlags& flags) {
  ScenarioConfig cfg = parse_scenario_file(path);
  if (flags.seed) cfg.seed = *flags.seed;
  return cfg;
}

int fail_with_error(const std::string& kind, const std::string& what) {
  nlohmann::json err;
  err["error"] = {{"type", kind}, {"message", what}};
  std::cout << err.dump() << "\n";
  return 1;
}

// runs a batch of configs, optionally across worker threads
std::vector<ScenarioOutcome> run_batch(const std::vector<ScenarioConfig>& cfgs,
                                       const GlobalFlags& flags) {
  std::vector<ScenarioOutcome> outcomes(cfgs.size());
  std::vector<std::string> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfgs.size()) return;
      try {
        ScenarioOutcome out = run_scenario(cfgs[i], flags.out_dir);
        std::lock_guard<std::mutex> lock(io);
        outcomes[i] = std::move(out);
        print_outcome(outcomes[i], flags.format);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(io);
        errors[i] = e.what();
      }
    }
  };
  const int n_workers =
      std::max(1, std::min<int>(flags.workers, int(cfgs.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    if (!errors[i].empty()) {
      throw ConfigInvalid(cfgs[i].name + ": " + errors[i]);
    }
  }
  return outcomes;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic parameter identification lab for a 2-DOF SCARA arm"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--out-dir", flags.out_dir, "bundle output root");
  app.add_option("--format", flags.format, "console format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  std::uint64_t seed_value = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_value, "override the scenario seed");
  app.add_option("--workers", flags.workers, "parallel scenario workers")
      ->check(CLI::PositiveNumber);

  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "run one scenario config");
  run_cmd->add_option("config", run_config, "scenario .cfg file")
      ->required();

  std::vector<std::string> compare_paths;
  auto* compare_cmd =
      app.add_subcommand("compare", "side-by-side table from report JSONs");
  compare_cmd->add_option("reports", compare_paths, "report .json files")
      ->required()
      ->expected(-1);

  std::string suite_dir = "configs";
  auto* suite_cmd = app.add_subcommand("suite", "run every shipped scenario");
  suite_cmd->add_option("--configs-dir", suite_dir,
                        "directory with scenario .cfg files");

  std::string sweep_config;
  std::vector<double> bandwidth_scales;
  std::vector<double> noise_scales;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "grid of bandwidth or noise scalings of one scenario");
  sweep_cmd->add_option("config", sweep_config, "base scenario .cfg file")
      ->required();
  sweep_cmd->add_option("--bandwidth", bandwidth_scales,
                        "simulated bandwidth scale factors");
  sweep_cmd->add_option("--noise", noise_scales,
                        "torque noise scale factors");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) flags.seed = seed_value;

  try {
    if (*run_cmd) {
      const ScenarioConfig cfg = load_config(run_config, flags);
      const ScenarioOutcome outcome = run_scenario(cfg, flags.out_dir);
      print_outcome(outcome, flags.format);
      if (!outcome.manifest_matched_previous) {
        std::cerr << "warning: bundle differs from the previous manifest\n";
      }
      return 0;
    }

    if (*compare_cmd) {
      std::vector<std::pair<std::string, EstimationReport>> reports;
      for (const std::string& path : compare_paths) {
        std::ifstream f(path);
        if (!f) return fail_with_error("io", "cannot open " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        const nlohmann::json j = nlohmann::json::parse(ss.str());
        const std::string method =
            j.contains("method") ? j["method"].get<std::string>()
                                 : fs::path(path).stem().string();
        reports.emplace_back(method, report_from_json(ss.str()));
      }
      const std::string table = compare_reports_csv(reports);
      if (flags.format == "json") {
        for (const auto& [name, rep] : reports) {
          std::cout << report_to_json(rep, name);
        }
      } else {
        std::cout << table;
      }
      if (!flags.out_dir.empty()) {
        fs::create_directories(flags.out_dir);
        std::ofstream out(fs::path(flags.out_dir) / "comparison.csv");
        out << table;
      }
      return 0;
    }

    if (*suite_cmd) {
      std::vector<ScenarioConfig> cfgs;
      std::vector<fs::path> paths;
      for (const auto& entry : fs::directory_iterator(suite_dir)) {
        if (entry.path().extension() == ".cfg") paths.push_back(entry.path());
      }
      std::sort(paths.begin(), paths.end());
      if (paths.empty()) {
        return fail_with_error("config",
                               "no .cfg files under " + suite_dir);
      }
      for (const auto& p : paths) cfgs.push_back(load_config(p.string(), flags));
      run_batch(cfgs, flags);
      return 0;
    }

    if (*sweep_cmd) {
      const ScenarioConfig base = load_config(sweep_config, flags);
      if (bandwidth_scales.empty() && noise_scales.empty()) {
        return fail_with_error("config",
                               "sweep needs --bandwidth or --noise factors");
      }
      std::vector<ScenarioConfig> cfgs;
      for (const double s : bandwidth_scales) {
        ScenarioConfig c = with_simulated_bandwidth_scale(base, s);
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "-bw%g", s);
        c.name = base.name + suffix;
        cfgs.push_back(std::move(c));
      }
      for (const double s : noise_scales) {
        ScenarioConfig c = with_torque_noise_scale(base, s);
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "-noise%g", s);
        c.name = base.name + suffix;
        cfgs.push_back(std::move(c));
      }
      const auto outcomes = run_batch(cfgs, flags);

      std::ostringstream summary;
      summary << "scenario,method,status,iterations,rel_error\n";
      for (const auto& out : outcomes) {
        for (const auto& e : out.estimators) {
          summary << out.name << ',' << e.method << ',' << e.status << ','
                  << e.iterations << ',';
          if (e.has_report) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6g", e.report.rel_error);
            summary << buf;
          }
          summary << '\n';
        }
      }
      const fs::path root =
          flags.out_dir.empty() ? fs::path("out") : fs::path(flags.out_dir);
      fs::create_directories(root);
      std::ofstream out(root / (base.name + "-sweep.csv"));
      out << summary.str();
      std::cout << summary.str();
      return 0;
    }
  } catch (const ConfigInvalid& e) {
    return fail_with_error("config", e.what());
  } catch (const Error& e) {
    return fail_with_error("runtime", e.what());
  } catch (const std::exception& e) {
    return fail_with_error("internal", e.what());
  }
  return 0;
}
