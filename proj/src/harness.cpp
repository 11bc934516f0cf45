#include "capri/harness.hpp"

#include "capri/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

namespace capri {

namespace {

using nlohmann::json;

// Round-trippable, locale-independent double formatting for CSV output.
std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void parallel_for(int num_tasks, int workers,
                  const std::function<void(int)>& task) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
  }
  workers = std::max(1, std::min(workers, num_tasks));
  if (workers == 1) {
    for (int i = 0; i < num_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= num_tasks) break;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);
}

template <typename T>
T require(const json& j, const std::string& field) {
  if (!j.contains(field)) {
    throw ConfigError("config: missing field '" + field + "'");
  }
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: invalid value for field '" + field + "'");
  }
}

KernelSpec kernel_from_config(const json& j) {
  const std::string family = require<std::string>(j, "family");
  if (family == "squared_exponential") {
    return KernelSpec::squared_exponential(require<double>(j, "lengthscale"));
  }
  if (family == "matern") {
    return KernelSpec::matern(require<double>(j, "nu"),
                              require<double>(j, "lengthscale"));
  }
  if (family == "normalized_linear") {
    // The normalizer is instance-dependent; a placeholder is patched when the
    // grid is built.
    return KernelSpec::normalized_linear(1.0);
  }
  throw ConfigError("config: unknown kernel.family '" + family + "'");
}

json kernel_to_config(const KernelSpec& spec) {
  json j;
  switch (spec.family) {
    case KernelFamily::kSquaredExponential:
      j["family"] = "squared_exponential";
      j["lengthscale"] = spec.lengthscale;
      break;
    case KernelFamily::kMatern:
      j["family"] = "matern";
      j["lengthscale"] = spec.lengthscale;
      j["nu"] = spec.nu;
      break;
    case KernelFamily::kNormalizedLinear:
      j["family"] = "normalized_linear";
      break;
  }
  return j;
}

PrivacyMode mode_from_string(const std::string& mode) {
  if (mode == "nonprivate") return PrivacyMode::kNonPrivate;
  if (mode == "jdp") return PrivacyMode::kJdp;
  if (mode == "ldp") return PrivacyMode::kLdp;
  throw ConfigError("config: unknown privacy.mode '" + mode + "'");
}

std::string mode_to_string(PrivacyMode mode) {
  switch (mode) {
    case PrivacyMode::kNonPrivate:
      return "nonprivate";
    case PrivacyMode::kJdp:
      return "jdp";
    case PrivacyMode::kLdp:
      return "ldp";
  }
  return "nonprivate";
}

InstanceParams instance_params(const ExperimentConfig& config) {
  InstanceParams params;
  params.num_contexts = config.num_contexts;
  params.num_actions = config.num_actions;
  params.context_dim = config.context_dim;
  params.action_dim = config.action_dim;
  params.reward_centers = config.reward_centers;
  params.reward_bound = config.reward_bound;
  params.noise_level = config.noise_level;
  params.context_probabilities = config.context_probabilities;
  return params;
}

RunConfig run_config(const ExperimentConfig& config) {
  RunConfig rc;
  rc.horizon = config.horizon;
  rc.tau = config.tau;
  rc.delta_err = config.delta_err;
  rc.width_scale = config.width_scale;
  return rc;
}

struct SeedStreams {
  std::uint64_t instance_seed;
  std::uint64_t run_seed;
};

// Identical per-seed derivation across privacy variants, so every variant
// sees the same environment and the same trajectory stream.
SeedStreams derive_streams(std::uint64_t seed) {
  Rng root(seed);
  SeedStreams streams{};
  streams.instance_seed = root.draw_raw();
  streams.run_seed = root.draw_raw();
  return streams;
}

std::vector<double> cumulative_regret(const RegretLog& log) {
  std::vector<double> curve;
  curve.reserve(log.steps.size());
  double total = 0.0;
  for (const StepRecord& step : log.steps) {
    total += step.inst_regret;
    curve.push_back(total);
  }
  return curve;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open output file " + path.string());
  }
  return out;
}

std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::filesystem::path path(dir);
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir + ": " +
                  ec.message());
  }
  return path;
}

SeedResult execute_seed(const ExperimentConfig& config, std::uint64_t seed,
                        PrivacyMode mode, bool record_sets) {
  const SeedStreams streams = derive_streams(seed);
  const Instance instance = make_instance(config.kernel,
                                          instance_params(config),
                                          streams.instance_seed);
  PrivacyParams privacy = config.privacy;
  privacy.mode = mode;
  privacy.horizon = config.horizon;
  RunConfig rc = run_config(config);
  rc.record_projection_sets = record_sets;
  Rng run_rng(streams.run_seed);
  SeedResult result;
  result.seed = seed;
  result.log = run(instance, instance.kernel, privacy, rc, run_rng);
  result.cumulative = cumulative_regret(result.log);
  return result;
}

std::vector<double> mean_curve_of(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  std::vector<double> mean(curves.front().size(), 0.0);
  for (const auto& curve : curves) {
    for (std::size_t t = 0; t < curve.size(); ++t) mean[t] += curve[t];
  }
  for (double& v : mean) v /= static_cast<double>(curves.size());
  return mean;
}

std::vector<double> median_curve_of(
    const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  const std::size_t n = curves.size();
  std::vector<double> column(n);
  std::vector<double> median(curves.front().size(), 0.0);
  for (std::size_t t = 0; t < median.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) column[i] = curves[i][t];
    std::sort(column.begin(), column.end());
    median[t] = n % 2 == 1 ? column[n / 2]
                           : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return median;
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return horizon == other.horizon && tau == other.tau &&
         reward_bound == other.reward_bound && delta_err == other.delta_err &&
         width_scale == other.width_scale &&
         noise_level == other.noise_level && kernel == other.kernel &&
         num_contexts == other.num_contexts &&
         num_actions == other.num_actions &&
         context_dim == other.context_dim && action_dim == other.action_dim &&
         context_probabilities.size() == other.context_probabilities.size() &&
         context_probabilities == other.context_probabilities &&
         reward_centers == other.reward_centers && privacy == other.privacy &&
         seeds == other.seeds && output_dir == other.output_dir &&
         workers == other.workers;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }

  ExperimentConfig config;
  config.horizon = require<long>(j, "horizon");
  if (config.horizon < 4) {
    throw ConfigError("config: field 'horizon' must be at least 4");
  }
  config.tau = require<double>(j, "tau");
  if (!(config.tau > 0.0)) {
    throw ConfigError("config: field 'tau' must be positive");
  }
  config.reward_bound = require<double>(j, "reward_bound");
  config.delta_err = require<double>(j, "delta_err");
  config.width_scale = require<double>(j, "width_scale");
  config.noise_level = require<double>(j, "noise_level");

  if (!j.contains("kernel")) throw ConfigError("config: missing field 'kernel'");
  config.kernel = kernel_from_config(j.at("kernel"));

  if (!j.contains("grid")) throw ConfigError("config: missing field 'grid'");
  const json& grid = j.at("grid");
  config.num_contexts = require<int>(grid, "contexts");
  config.num_actions = require<int>(grid, "actions");
  config.context_dim = require<int>(grid, "context_dim");
  config.action_dim = require<int>(grid, "action_dim");

  if (!j.contains("context_distribution")) {
    throw ConfigError("config: missing field 'context_distribution'");
  }
  const json& kappa = j.at("context_distribution");
  if (kappa.is_string()) {
    if (kappa.get<std::string>() != "uniform") {
      throw ConfigError(
          "config: field 'context_distribution' must be 'uniform' or an array");
    }
  } else if (kappa.is_array()) {
    if (static_cast<int>(kappa.size()) != config.num_contexts) {
      throw ConfigError(
          "config: field 'context_distribution' length must equal contexts");
    }
    config.context_probabilities.resize(kappa.size());
    for (std::size_t i = 0; i < kappa.size(); ++i) {
      config.context_probabilities(static_cast<Eigen::Index>(i)) =
          kappa[i].get<double>();
    }
  } else {
    throw ConfigError("config: invalid field 'context_distribution'");
  }

  config.reward_centers = require<int>(j, "reward_centers");

  if (!j.contains("privacy")) throw ConfigError("config: missing field 'privacy'");
  const json& privacy = j.at("privacy");
  config.privacy.mode = mode_from_string(require<std::string>(privacy, "mode"));
  config.privacy.epsilon = require<double>(privacy, "epsilon");
  config.privacy.delta = require<double>(privacy, "delta");
  config.privacy.horizon = config.horizon;

  config.seeds = require<std::vector<std::uint64_t>>(j, "seeds");
  if (config.seeds.empty()) {
    throw ConfigError("config: field 'seeds' must be nonempty");
  }
  config.output_dir = require<std::string>(j, "output");
  config.workers = require<int>(j, "workers");
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open " + path);
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string emit_config(const ExperimentConfig& config) {
  json j;
  j["horizon"] = config.horizon;
  j["tau"] = config.tau;
  j["reward_bound"] = config.reward_bound;
  j["delta_err"] = config.delta_err;
  j["width_scale"] = config.width_scale;
  j["noise_level"] = config.noise_level;
  j["kernel"] = kernel_to_config(config.kernel);
  j["grid"] = {{"contexts", config.num_contexts},
               {"actions", config.num_actions},
               {"context_dim", config.context_dim},
               {"action_dim", config.action_dim}};
  if (config.context_probabilities.size() == 0) {
    j["context_distribution"] = "uniform";
  } else {
    json probs = json::array();
    for (Eigen::Index i = 0; i < config.context_probabilities.size(); ++i) {
      probs.push_back(config.context_probabilities(i));
    }
    j["context_distribution"] = probs;
  }
  j["reward_centers"] = config.reward_centers;
  j["privacy"] = {{"mode", mode_to_string(config.privacy.mode)},
                  {"epsilon", config.privacy.epsilon},
                  {"delta", config.privacy.delta}};
  j["seeds"] = config.seeds;
  j["output"] = config.output_dir;
  j["workers"] = config.workers;
  return j.dump(2);
}

RunReport run_experiment(const ExperimentConfig& config) {
  const auto out_dir = prepare_output_dir(config.output_dir);
  const int num_seeds = static_cast<int>(config.seeds.size());

  RunReport report;
  report.results.resize(num_seeds);
  parallel_for(num_seeds, config.workers, [&](int i) {
    report.results[i] =
        execute_seed(config, config.seeds[i], config.privacy.mode,
                     /*record_sets=*/false);
  });

  std::vector<std::vector<double>> curves;
  curves.reserve(num_seeds);
  for (const SeedResult& result : report.results) {
    curves.push_back(result.cumulative);
  }
  report.mean_curve = mean_curve_of(curves);
  report.median_curve = median_curve_of(curves);

  auto steps = open_output(out_dir / "steps.csv");
  steps << "seed,t,context,action,reward,inst_regret,cum_regret,epoch\n";
  for (const SeedResult& result : report.results) {
    double total = 0.0;
    for (const StepRecord& step : result.log.steps) {
      total += step.inst_regret;
      steps << result.seed << ',' << step.t << ',' << step.context_id << ','
            << step.action_id << ',' << format_double(step.reward) << ','
            << format_double(step.inst_regret) << ',' << format_double(total)
            << ',' << step.epoch << '\n';
    }
  }
  steps.close();

  auto epochs = open_output(out_dir / "epochs.csv");
  epochs << "seed,epoch,T_r,delta_r,sigma_max_sq,noise_draws\n";
  for (const SeedResult& result : report.results) {
    for (const EpochRecord& record : result.log.epochs) {
      epochs << result.seed << ',' << record.epoch << ',' << record.length
             << ',' << format_double(record.delta_r) << ','
             << format_double(record.sigma_max_sq) << ','
             << record.noise_draws << '\n';
    }
  }
  epochs.close();

  // Per-run information-gain estimates, averaged across seeds per epoch.
  std::size_t max_epochs = 0;
  for (const SeedResult& r : report.results) {
    max_epochs = std::max(max_epochs, r.log.epochs.size());
  }
  std::cout << "run: " << num_seeds << " seed(s), horizon " << config.horizon
            << ", mode " << mode_to_string(config.privacy.mode) << "\n";
  for (std::size_t e = 0; e < max_epochs; ++e) {
    double gain = 0.0;
    double width = 0.0;
    int count = 0;
    for (const SeedResult& r : report.results) {
      if (e < r.log.epochs.size()) {
        gain += r.log.epochs[e].info_gain;
        width += r.log.epochs[e].delta_r;
        ++count;
      }
    }
    std::cout << "  epoch " << (e + 1) << ": mean info gain "
              << gain / count << ", mean delta_r " << width / count << "\n";
  }
  if (!report.mean_curve.empty()) {
    std::cout << "  mean final cumulative regret: "
              << report.mean_curve.back() << "\n";
  }
  return report;
}

namespace {

// Batched dense evaluation of the epoch's sensitivity scan: one
// factorization per epoch, then every support point and both reward signs.
// Same operator forms as the per-point library calls.
AuditRow audit_epoch(const ExperimentConfig& config, const Instance& instance,
                     std::uint64_t seed, const EpochRecord& record) {
  AuditRow row;
  row.seed = seed;
  row.epoch = record.epoch;
  row.length = record.length;
  row.sigma_max_sq_run = record.sigma_max_sq;
  row.sigma0_used = record.sigma0;

  const KernelSpec& spec = instance.kernel;
  const double tau = config.tau;
  const double bound = config.reward_bound;
  const auto& grid_points = instance.grid.all_points();

  std::vector<Point> s_points, r_points, support;
  for (const int g : record.s_grid_indices) s_points.push_back(grid_points[g]);
  for (const int g : record.r_grid_indices) r_points.push_back(grid_points[g]);
  for (const int g : record.support_grid_indices) {
    support.push_back(grid_points[g]);
  }

  const Eigen::MatrixXd k_ss = kernel_matrix(spec, s_points);
  const Eigen::MatrixXd k_sr = kernel_matrix(spec, s_points, r_points);
  const Eigen::MatrixXd k_support = kernel_matrix(spec, s_points, support);

  //   sigma~^2(w) = (k(w,w) - b^T (tau I + K_RS K_SS^{-1} K_SR)^{-1} b) / tau
  const Eigen::MatrixXd inv_sqrt = inv_sqrt_psd(SymMatrix(k_ss)).mat();
  const Eigen::MatrixXd a = (inv_sqrt * inv_sqrt) * k_sr;
  const SymMatrix mid(k_sr.transpose() * a);
  const Eigen::MatrixXd b = a.transpose() * k_support;
  const Eigen::MatrixXd solved = solve_regularized(mid, tau, b);

  double dense_sigma_sq = 0.0;
  for (Eigen::Index col = 0; col < b.cols(); ++col) {
    const Point& w = support[static_cast<std::size_t>(col)];
    const double prior = kernel_eval(spec, w, w);
    const double value = (prior - b.col(col).dot(solved.col(col))) / tau;
    dense_sigma_sq =
        std::max(dense_sigma_sq, std::clamp(value, 0.0, prior / tau + 1e-9));
  }
  row.sigma_max_sq_dense = dense_sigma_sq;
  row.sensitivity_bound = 2.0 * bound * std::sqrt(dense_sigma_sq);

  // max over support and y = +/-B of ||y M^{-1/2} k_S(w)||.
  const Eigen::MatrixXd m_inv_sqrt =
      inv_sqrt_psd(SymMatrix(k_sr * k_sr.transpose() + tau * k_ss)).mat();
  const Eigen::MatrixXd statistics = m_inv_sqrt * k_support;
  double max_norm = 0.0;
  for (Eigen::Index col = 0; col < statistics.cols(); ++col) {
    for (const double y : {-bound, bound}) {
      max_norm = std::max(max_norm, (y * statistics.col(col)).norm());
    }
  }
  const double denom = bound * std::sqrt(dense_sigma_sq);
  row.max_ratio = denom > 0.0 ? max_norm / denom : (max_norm > 0.0 ? 1e300 : 0.0);

  row.sigma0_formula =
      config.privacy.mode == PrivacyMode::kNonPrivate
          ? 0.0
          : noise_scale(std::sqrt(record.sigma_max_sq), bound,
                        static_cast<double>(config.horizon),
                        config.privacy.epsilon, config.privacy.delta);

  const bool sigma_consistent =
      std::abs(row.sigma_max_sq_run - row.sigma_max_sq_dense) <=
      1e-9 * std::max(1.0, row.sigma_max_sq_dense);
  row.ok = row.max_ratio <= 1.0 + 1e-9 &&
           row.sigma0_formula == row.sigma0_used && sigma_consistent;
  return row;
}

}  // namespace

AuditReport privacy_audit(const ExperimentConfig& config) {
  const auto out_dir = prepare_output_dir(config.output_dir);
  const int num_seeds = static_cast<int>(config.seeds.size());

  std::vector<std::vector<AuditRow>> per_seed(num_seeds);
  parallel_for(num_seeds, config.workers, [&](int i) {
    const std::uint64_t seed = config.seeds[i];
    const SeedStreams streams = derive_streams(seed);
    const Instance instance = make_instance(config.kernel,
                                            instance_params(config),
                                            streams.instance_seed);
    PrivacyParams privacy = config.privacy;
    privacy.horizon = config.horizon;
    RunConfig rc = run_config(config);
    rc.record_projection_sets = true;
    Rng run_rng(streams.run_seed);
    const RegretLog log = run(instance, instance.kernel, privacy, rc, run_rng);
    for (const EpochRecord& record : log.epochs) {
      per_seed[i].push_back(audit_epoch(config, instance, seed, record));
    }
  });

  AuditReport report;
  report.ok = true;
  for (const auto& rows : per_seed) {
    for (const AuditRow& row : rows) {
      report.ok = report.ok && row.ok;
      report.rows.push_back(row);
    }
  }

  auto csv = open_output(out_dir / "audit.csv");
  csv << "seed,epoch,T_r,max_ratio,sigma_max_sq_run,sigma_max_sq_dense,"
         "sensitivity_bound,sigma0_used,sigma0_formula,ok\n";
  for (const AuditRow& row : report.rows) {
    csv << row.seed << ',' << row.epoch << ',' << row.length << ','
        << format_double(row.max_ratio) << ','
        << format_double(row.sigma_max_sq_run) << ','
        << format_double(row.sigma_max_sq_dense) << ','
        << format_double(row.sensitivity_bound) << ','
        << format_double(row.sigma0_used) << ','
        << format_double(row.sigma0_formula) << ',' << (row.ok ? 1 : 0)
        << '\n';
  }
  csv.close();

  std::cout << "audit: " << report.rows.size() << " epoch(s), "
            << (report.ok ? "all within bounds" : "VIOLATIONS FOUND") << "\n";
  return report;
}

ComparisonReport compare_baselines(const ExperimentConfig& config) {
  const auto out_dir = prepare_output_dir(config.output_dir);
  const int num_seeds = static_cast<int>(config.seeds.size());

  ComparisonReport report;
  report.variants = {"uniform", "nonprivate", "jdp", "ldp"};
  report.final_regret.assign(4, std::vector<double>(num_seeds, 0.0));
  std::vector<std::vector<std::vector<double>>> curves(
      4, std::vector<std::vector<double>>(num_seeds));

  parallel_for(num_seeds, config.workers, [&](int i) {
    const std::uint64_t seed = config.seeds[i];
    const SeedStreams streams = derive_streams(seed);
    const Instance instance = make_instance(config.kernel,
                                            instance_params(config),
                                            streams.instance_seed);

    {
      Rng run_rng(streams.run_seed);
      const RegretLog log =
          uniform_baseline_run(instance, config.horizon, run_rng);
      curves[0][i] = cumulative_regret(log);
    }
    const PrivacyMode modes[3] = {PrivacyMode::kNonPrivate, PrivacyMode::kJdp,
                                  PrivacyMode::kLdp};
    for (int v = 0; v < 3; ++v) {
      PrivacyParams privacy = config.privacy;
      privacy.mode = modes[v];
      privacy.horizon = config.horizon;
      Rng run_rng(streams.run_seed);
      const RegretLog log =
          run(instance, instance.kernel, privacy, run_config(config), run_rng);
      curves[v + 1][i] = cumulative_regret(log);
    }
    for (int v = 0; v < 4; ++v) {
      report.final_regret[v][i] = curves[v][i].back();
    }
  });

  for (int v = 0; v < 4; ++v) {
    report.mean_curves.push_back(mean_curve_of(curves[v]));
  }

  auto comparison = open_output(out_dir / "comparison.csv");
  comparison << "variant,seed,final_cum_regret\n";
  for (int v = 0; v < 4; ++v) {
    for (int i = 0; i < num_seeds; ++i) {
      comparison << report.variants[v] << ',' << config.seeds[i] << ','
                 << format_double(report.final_regret[v][i]) << '\n';
    }
  }
  comparison.close();

  auto mean_curves = open_output(out_dir / "mean_curves.csv");
  mean_curves << "t,uniform,nonprivate,jdp,ldp\n";
  for (long t = 0; t < config.horizon; ++t) {
    mean_curves << (t + 1);
    for (int v = 0; v < 4; ++v) {
      mean_curves << ',' << format_double(report.mean_curves[v][t]);
    }
    mean_curves << '\n';
  }
  mean_curves.close();

  for (int v = 0; v < 4; ++v) {
    double mean = 0.0;
    for (const double r : report.final_regret[v]) mean += r;
    std::cout << "compare: " << report.variants[v] << " mean final regret "
              << mean / num_seeds << "\n";
  }
  return report;
}

}  // namespace capri
