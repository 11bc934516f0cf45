#include "capri/bandit.hpp"

#include "capri/detail/epoch_solver.hpp"
#include "capri/numerics.hpp"

#include <cmath>
#include <memory>
#include <numeric>

namespace capri {

namespace {

using detail::EpochSolver;

std::vector<std::vector<double>> active_estimates(
    EpochSolver& solver, const Grid& grid, const ActiveSets& active,
    const Eigen::VectorXd& gamma, const Eigen::VectorXd& zeta) {
  std::vector<std::vector<double>> estimates(active.actions.size());
  for (std::size_t c = 0; c < active.actions.size(); ++c) {
    estimates[c].reserve(active.actions[c].size());
    for (const int x : active.actions[c]) {
      estimates[c].push_back(solver.predict(
          grid.flat_index(static_cast<int>(c), x), gamma, zeta));
    }
  }
  return estimates;
}

// The elimination rule: keep actions within 4 * delta_r of the per-context
// maximum estimate. Comparisons are exact; >= keeps ties and the argmax.
ActiveSets prune_by_estimates(const std::vector<std::vector<double>>& estimates,
                              const ActiveSets& active, double delta_r) {
  if (delta_r < 0.0) {
    throw std::invalid_argument("prune: delta_r must be nonnegative");
  }
  ActiveSets next;
  next.actions.resize(active.actions.size());
  for (std::size_t c = 0; c < active.actions.size(); ++c) {
    if (active.actions[c].empty()) {
      throw std::invalid_argument("prune: empty active set");
    }
    double best = estimates[c][0];
    for (const double v : estimates[c]) best = std::max(best, v);
    const double threshold = best - 4.0 * delta_r;
    for (std::size_t i = 0; i < active.actions[c].size(); ++i) {
      if (estimates[c][i] >= threshold) {
        next.actions[c].push_back(active.actions[c][i]);
      }
    }
  }
  return next;
}

std::pair<std::vector<int>, std::vector<int>> draw_projection_indices(
    const ContextDistribution& kappa, const Grid& grid,
    const ActiveSets& active, int epoch_length, Rng& rng) {
  Rng s_stream = rng.split();
  Rng r_stream = rng.split();
  auto draw = [&grid, &kappa, &active](Rng& stream, int count) {
    std::vector<int> indices(count);
    for (int i = 0; i < count; ++i) {
      const int c = sample_context(kappa, stream);
      const auto& actions = active.actions[c];
      const int x =
          actions[stream.uniform_index(static_cast<int>(actions.size()))];
      indices[i] = grid.flat_index(c, x);
    }
    return indices;
  };
  return {draw(s_stream, epoch_length), draw(r_stream, epoch_length)};
}

std::vector<int> support_indices(const ContextDistribution& kappa,
                                 const Grid& grid, const ActiveSets& active) {
  std::vector<int> out;
  for (std::size_t c = 0; c < active.actions.size(); ++c) {
    if (kappa.probabilities(static_cast<Eigen::Index>(c)) <= 0.0) continue;
    for (const int x : active.actions[c]) {
      out.push_back(grid.flat_index(static_cast<int>(c), x));
    }
  }
  return out;
}

}  // namespace

ActiveSets ActiveSets::full(int num_contexts, int num_actions) {
  ActiveSets sets;
  sets.actions.assign(num_contexts, std::vector<int>(num_actions));
  for (auto& context_actions : sets.actions) {
    std::iota(context_actions.begin(), context_actions.end(), 0);
  }
  return sets;
}

double beta(double delta, double reward_bound, double tau, double horizon) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("beta: delta must be in (0,1)");
  }
  if (reward_bound < 0.0 || !(tau > 0.0) || !(horizon >= 1.0)) {
    throw std::invalid_argument("beta: parameter out of range");
  }
  const double l_t = std::log(168.0 * horizon / delta);
  return 90.0 * reward_bound * std::sqrt(l_t) +
         52.0 * reward_bound * std::sqrt(l_t * std::log(12.0 / delta)) /
             std::sqrt(tau) +
         3.0 * reward_bound * std::sqrt(2.0 * std::log(6.0 / delta)) +
         std::sqrt(24.0 * tau);
}

double beta1(double epsilon, double delta_dp, double delta,
             double reward_bound, double horizon) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("beta1: delta must be in (0,1)");
  }
  if (!(epsilon > 0.0) || reward_bound < 0.0 || !(horizon >= 2.0)) {
    throw std::invalid_argument("beta1: parameter out of range");
  }
  const double log_t = std::log(horizon);
  const double inner = 1.25 * log_t / delta_dp;
  if (inner <= 1.0) {
    throw std::invalid_argument("beta1: 1.25 log(T) / delta_dp must exceed 1");
  }
  return (8.0 * reward_bound * log_t / epsilon) * std::log(3.0 / delta) *
         std::sqrt(std::log(inner));
}

double beta1_ldp(double epoch_length, double epsilon, double delta_dp,
                 double delta, double reward_bound, double horizon) {
  return std::sqrt(epoch_length) *
         beta1(epsilon, delta_dp, delta, reward_bound, horizon);
}

double confidence_width(double beta_value, double beta1_value,
                        double sigma_max_sq) {
  if (sigma_max_sq < 0.0) {
    throw std::invalid_argument("confidence_width: negative variance");
  }
  return beta_value * std::sqrt(sigma_max_sq) + beta1_value * sigma_max_sq;
}

ActiveSets prune(const PrivateEstimator& estimator, const Grid& grid,
                 const ActiveSets& active, double delta_r) {
  std::vector<std::vector<double>> estimates(active.actions.size());
  for (std::size_t c = 0; c < active.actions.size(); ++c) {
    estimates[c].reserve(active.actions[c].size());
    for (const int x : active.actions[c]) {
      estimates[c].push_back(
          predict(estimator, grid.point(static_cast<int>(c), x)));
    }
  }
  return prune_by_estimates(estimates, active, delta_r);
}

ProjectionPair sample_projection_sets(const ContextDistribution& kappa,
                                      const Grid& grid,
                                      const ActiveSets& active,
                                      int epoch_length, double tau, Rng& rng) {
  for (const auto& actions : active.actions) {
    if (actions.empty()) {
      throw std::invalid_argument("sample_projection_sets: empty active set");
    }
  }
  auto [s_idx, r_idx] =
      draw_projection_indices(kappa, grid, active, epoch_length, rng);
  auto to_points = [&grid](const std::vector<int>& indices) {
    std::vector<Point> points;
    points.reserve(indices.size());
    for (const int g : indices) {
      points.push_back(grid.all_points()[g]);
    }
    return points;
  };
  return make_projection_pair(to_points(s_idx), to_points(r_idx), tau);
}

RegretLog run(const Instance& env, const KernelSpec& spec,
              const PrivacyParams& privacy, const RunConfig& config,
              Rng& rng) {
  const long horizon = config.horizon;
  if (horizon < 4) {
    throw std::invalid_argument("run: horizon must be at least 4");
  }
  if (!(config.tau > 0.0) || !(config.width_scale > 0.0) ||
      !(config.delta_err > 0.0) || !(config.delta_err < 1.0)) {
    throw std::invalid_argument("run: invalid configuration");
  }
  const Grid& grid = env.grid;
  const int num_contexts = grid.num_contexts();
  const int num_actions = grid.num_actions();

  std::vector<int> all_actions(num_actions);
  std::iota(all_actions.begin(), all_actions.end(), 0);
  std::vector<double> best_value(num_contexts);
  double reward_magnitude = 0.0;
  for (int c = 0; c < num_contexts; ++c) {
    best_value[c] = best_action(env.reward, grid, c, all_actions).value;
    for (int x = 0; x < num_actions; ++x) {
      reward_magnitude = std::max(
          reward_magnitude, std::abs(env.reward.value(grid.point(c, x))));
    }
  }
  if (reward_magnitude > env.reward_bound + 1e-9) {
    throw std::invalid_argument("run: reward exceeds bound on the grid");
  }

  Rng trajectory = rng.split();
  Rng sampling = rng.split();
  Rng noise = rng.split();

  const Eigen::MatrixXd gram = kernel_matrix(spec, grid.all_points());
  const double tau = config.tau;
  const double bound = env.reward_bound;
  const double horizon_d = static_cast<double>(horizon);
  const double delta_bar =
      config.delta_err / (static_cast<double>(num_contexts) *
                          static_cast<double>(num_actions) * horizon_d *
                          std::log(horizon_d));

  ActiveSets active = ActiveSets::full(num_contexts, num_actions);
  RegretLog log;
  log.steps.reserve(horizon);

  int epoch = 1;
  long epoch_length = static_cast<long>(std::ceil(std::sqrt(horizon_d)));

  auto start_epoch = [&](long length) {
    auto [s_idx, r_idx] = draw_projection_indices(
        env.kappa, grid, active, static_cast<int>(length), sampling);
    return std::make_unique<EpochSolver>(gram, std::move(s_idx),
                                         std::move(r_idx), tau);
  };

  std::unique_ptr<EpochSolver> solver = start_epoch(epoch_length);
  std::vector<int> current_support = support_indices(env.kappa, grid, active);
  double sigma_max_sq = solver->max_projected_variance(current_support);
  auto epoch_sigma0 = [&]() {
    return privacy.mode == PrivacyMode::kNonPrivate
               ? 0.0
               : noise_scale(std::sqrt(sigma_max_sq), bound, horizon_d,
                             privacy.epsilon, privacy.delta);
  };
  double sigma0 = epoch_sigma0();

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(solver->core_dim());
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(solver->core_dim());
  long steps_in_epoch = 0;
  long epoch_noise_draws = 0;

  auto record_epoch = [&](bool completed, double delta_r) {
    EpochRecord record;
    record.epoch = epoch;
    record.length = epoch_length;
    record.steps = steps_in_epoch;
    record.completed = completed;
    record.delta_r = delta_r;
    record.sigma_max_sq = sigma_max_sq;
    record.sigma0 = sigma0;
    record.noise_draws = epoch_noise_draws;
    record.info_gain = solver->info_gain();
    if (config.record_projection_sets) {
      record.s_grid_indices = solver->s_grid_indices();
      record.r_grid_indices = solver->r_grid_indices();
      record.support_grid_indices = current_support;
    }
    log.epochs.push_back(std::move(record));
  };

  for (long t = 1; t <= horizon; ++t) {
    const int c = sample_context(env.kappa, trajectory);
    const auto& actions = active.actions[c];
    const int x =
        actions[trajectory.uniform_index(static_cast<int>(actions.size()))];
    const Point& w = grid.point(c, x);
    const double y = observe(env.reward, w, env.noise_level, trajectory);
    const int grid_index = grid.flat_index(c, x);

    if (privacy.mode == PrivacyMode::kLdp) {
      // Each upload is privatized before it joins the running sum.
      const Eigen::VectorXd z =
          noise.normal_vector(static_cast<int>(epoch_length), sigma0);
      zeta += solver->reduce(z);
      ++epoch_noise_draws;
    }
    gamma += y * solver->statistic_core(grid_index);

    StepRecord step;
    step.t = t;
    step.context_id = c;
    step.action_id = x;
    step.reward = y;
    step.inst_regret = best_value[c] - env.reward.value(w);
    step.epoch = epoch;
    log.steps.push_back(step);
    ++steps_in_epoch;

    if (steps_in_epoch == epoch_length && t < horizon) {
      if (privacy.mode == PrivacyMode::kJdp) {
        const Eigen::VectorXd z =
            noise.normal_vector(static_cast<int>(epoch_length), sigma0);
        zeta += solver->reduce(z);
        ++epoch_noise_draws;
      }
      const std::vector<std::vector<double>> estimates =
          active_estimates(*solver, grid, active, gamma, zeta);

      double delta_r = 0.0;
      if (config.oracle_width) {
        for (std::size_t cc = 0; cc < active.actions.size(); ++cc) {
          for (std::size_t i = 0; i < active.actions[cc].size(); ++i) {
            const double truth = env.reward.value(
                grid.point(static_cast<int>(cc), active.actions[cc][i]));
            delta_r = std::max(delta_r, std::abs(estimates[cc][i] - truth));
          }
        }
      } else {
        const double beta_value = beta(delta_bar, bound, tau, horizon_d);
        double beta1_value = 0.0;
        if (privacy.mode == PrivacyMode::kJdp) {
          beta1_value = beta1(privacy.epsilon, privacy.delta, delta_bar, bound,
                              horizon_d);
        } else if (privacy.mode == PrivacyMode::kLdp) {
          beta1_value =
              beta1_ldp(static_cast<double>(epoch_length), privacy.epsilon,
                        privacy.delta, delta_bar, bound, horizon_d);
        }
        delta_r = config.width_scale *
                  confidence_width(beta_value, beta1_value, sigma_max_sq);
      }

      active = prune_by_estimates(estimates, active, delta_r);
      record_epoch(/*completed=*/true, delta_r);

      ++epoch;
      epoch_length *= 2;
      solver = start_epoch(epoch_length);
      current_support = support_indices(env.kappa, grid, active);
      sigma_max_sq = solver->max_projected_variance(current_support);
      sigma0 = epoch_sigma0();
      gamma = Eigen::VectorXd::Zero(solver->core_dim());
      zeta = Eigen::VectorXd::Zero(solver->core_dim());
      steps_in_epoch = 0;
      epoch_noise_draws = 0;
    }
  }
  // The final epoch (truncated or landing exactly on the horizon) performs no
  // terminal pruning and assembles no estimator.
  record_epoch(steps_in_epoch == epoch_length, 0.0);
  log.total_noise_vector_draws = noise.vector_draws();
  return log;
}

RegretLog uniform_baseline_run(const Instance& env, long horizon, Rng& rng) {
  if (horizon < 1) {
    throw std::invalid_argument("uniform_baseline_run: empty horizon");
  }
  Rng trajectory = rng.split();
  const Grid& grid = env.grid;
  const int num_actions = grid.num_actions();
  std::vector<int> all_actions(num_actions);
  std::iota(all_actions.begin(), all_actions.end(), 0);
  std::vector<double> best_value(grid.num_contexts());
  for (int c = 0; c < grid.num_contexts(); ++c) {
    best_value[c] = best_action(env.reward, grid, c, all_actions).value;
  }

  RegretLog log;
  log.steps.reserve(horizon);
  for (long t = 1; t <= horizon; ++t) {
    const int c = sample_context(env.kappa, trajectory);
    const int x = trajectory.uniform_index(num_actions);
    const Point& w = grid.point(c, x);
    StepRecord step;
    step.t = t;
    step.context_id = c;
    step.action_id = x;
    step.reward = observe(env.reward, w, env.noise_level, trajectory);
    step.inst_regret = best_value[c] - env.reward.value(w);
    step.epoch = 1;
    log.steps.push_back(step);
  }
  return log;
}

}  // namespace capri
