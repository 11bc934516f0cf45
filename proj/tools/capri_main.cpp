#include "capri/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitAuditViolation = 3;

capri::ExperimentConfig prepare(const std::string& config_path,
                                const std::string& out_dir,
                                long seed_override) {
  capri::ExperimentConfig config = capri::load_config(config_path);
  if (!out_dir.empty()) {
    config.output_dir = out_dir;
  }
  if (seed_override >= 0) {
    config.seeds = {static_cast<std::uint64_t>(seed_override)};
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAPRI private contextual kernel bandit simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long seed_override = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--seed-override", seed_override,
                    "run a single seed instead of the config's list");
  };

  CLI::App* run_cmd =
      app.add_subcommand("run", "run CAPRI and write regret CSVs");
  add_common(run_cmd);
  CLI::App* audit_cmd =
      app.add_subcommand("audit", "empirical privacy sensitivity audit");
  add_common(audit_cmd);
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "uniform / nonprivate / JDP / LDP comparison");
  add_common(compare_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    const capri::ExperimentConfig config =
        prepare(config_path, out_dir, seed_override);
    if (run_cmd->parsed()) {
      capri::run_experiment(config);
    } else if (audit_cmd->parsed()) {
      const capri::AuditReport report = capri::privacy_audit(config);
      if (!report.ok) {
        return kExitAuditViolation;
      }
    } else if (compare_cmd->parsed()) {
      capri::compare_baselines(config);
    }
  } catch (const capri::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
