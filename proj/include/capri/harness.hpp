#pragma once

#include "capri/bandit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace capri {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full experiment description. Every field is explicit in the config file;
// parse(emit(config)) round-trips exactly.
struct ExperimentConfig {
  long horizon = 4096;
  double tau = 1.0;
  double reward_bound = 1.0;
  double delta_err = 0.05;
  double width_scale = 1.0;
  double noise_level = 1.0;
  KernelSpec kernel;
  int num_contexts = 4;
  int num_actions = 16;
  int context_dim = 1;
  int action_dim = 1;
  Eigen::VectorXd context_probabilities;  // empty means uniform
  int reward_centers = 12;
  PrivacyParams privacy;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  int workers = 0;  // 0 = hardware concurrency

  bool operator==(const ExperimentConfig& other) const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string emit_config(const ExperimentConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  RegretLog log;
  std::vector<double> cumulative;  // length == horizon, nondecreasing
};

struct RunReport {
  std::vector<SeedResult> results;   // config seed order
  std::vector<double> mean_curve;    // mean cumulative regret per step
  std::vector<double> median_curve;  // median cumulative regret per step
};

// One CAPRI run per seed (dispatched to a worker pool), then
// <out>/steps.csv with columns
//   seed,t,context,action,reward,inst_regret,cum_regret,epoch
// and <out>/epochs.csv with columns
//   seed,epoch,T_r,delta_r,sigma_max_sq,noise_draws.
RunReport run_experiment(const ExperimentConfig& config);

struct AuditRow {
  std::uint64_t seed = 0;
  int epoch = 0;
  long length = 0;
  double max_ratio = 0.0;        // max ||statistic|| / (B sigma_max)
  double sigma_max_sq_run = 0.0;
  double sigma_max_sq_dense = 0.0;
  double sensitivity_bound = 0.0;  // 2 B sigma_max, the mechanism's Delta_2
  double sigma0_used = 0.0;
  double sigma0_formula = 0.0;
  bool ok = false;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  bool ok = false;
};

// Empirical sensitivity audit: replays every epoch's projection pair, scans
// the active support exhaustively with y = +/-B, and checks
//   max ||per-point statistic||_2 <= B * sigma_max * (1 + 1e-9)
// against an independently recomputed dense sigma_max, plus an exact
// recomputation of sigma_0 from the noise formula. Writes <out>/audit.csv.
AuditReport privacy_audit(const ExperimentConfig& config);

struct ComparisonReport {
  // variant order: uniform, nonprivate, jdp, ldp
  std::vector<std::string> variants;
  std::vector<std::vector<double>> final_regret;  // [variant][seed]
  std::vector<std::vector<double>> mean_curves;   // [variant][t]
};

// Runs the uniform-random baseline and the three CAPRI variants on identical
// per-seed instances. Writes <out>/comparison.csv (variant,seed,final
// cumulative regret; 4 x |seeds| rows) and <out>/mean_curves.csv.
ComparisonReport compare_baselines(const ExperimentConfig& config);

}  // namespace capri
