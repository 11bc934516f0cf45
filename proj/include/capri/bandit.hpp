#pragma once

#include "capri/environment.hpp"
#include "capri/estimator.hpp"

#include <vector>

namespace capri {

// Per-context sets of surviving actions X_r(c). They start at the full action
// set and only ever shrink.
struct ActiveSets {
  std::vector<std::vector<int>> actions;  // sorted action ids per context

  static ActiveSets full(int num_contexts, int num_actions);
};

// Confidence parameter
//   beta(delta) = 90 B sqrt(log(168 T / delta))
//               + 52 B sqrt(log(168 T / delta) log(12 / delta)) / sqrt(tau)
//               + 3 B sqrt(2 log(6 / delta)) + sqrt(24 tau).
double beta(double delta, double reward_bound, double tau, double horizon);

// Privacy confidence parameter
//   beta_1 = (8 B log T / eps) log(3 / delta) sqrt(log(1.25 log T / delta_dp)).
double beta1(double epsilon, double delta_dp, double delta,
             double reward_bound, double horizon);

// LDP variant scales by sqrt(T_r).
double beta1_ldp(double epoch_length, double epsilon, double delta_dp,
                 double delta, double reward_bound, double horizon);

// Pruning width Delta_r = beta * sigma_max + beta_1 * sigma_max^2.
double confidence_width(double beta_value, double beta1_value,
                        double sigma_max_sq);

// Keeps, per context, the actions whose estimate is within 4 * delta_r of the
// per-context maximum. The argmax always survives.
ActiveSets prune(const PrivateEstimator& estimator, const Grid& grid,
                 const ActiveSets& active, double delta_r);

// Draws S and R: T_r i.i.d. points each, context from kappa then action
// uniform over the context's active set, with S and R on independent child
// streams of rng.
ProjectionPair sample_projection_sets(const ContextDistribution& kappa,
                                      const Grid& grid,
                                      const ActiveSets& active,
                                      int epoch_length, double tau, Rng& rng);

struct StepRecord {
  long t = 0;  // 1-based
  int context_id = -1;
  int action_id = -1;
  double reward = 0.0;
  double inst_regret = 0.0;
  int epoch = 0;
};

struct EpochRecord {
  int epoch = 0;
  long length = 0;       // scheduled T_r
  long steps = 0;        // executed steps (< length only for the final epoch)
  bool completed = false;
  double delta_r = 0.0;  // pruning width; 0 when the epoch never pruned
  double sigma_max_sq = 0.0;
  double sigma0 = 0.0;
  long noise_draws = 0;
  double info_gain = 0.0;  // information gain of the epoch's projection set S
  std::vector<int> s_grid_indices;  // only when recording is requested
  std::vector<int> r_grid_indices;
  std::vector<int> support_grid_indices;  // support of the sampling measure
};

struct RegretLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  // Count reported by the instrumented noise stream itself: one per pruned
  // epoch under JDP, one per step under LDP, zero when non-private.
  long total_noise_vector_draws = 0;
};

struct RunConfig {
  long horizon = 4;
  double tau = 1.0;
  double delta_err = 0.05;
  double width_scale = 1.0;
  bool record_projection_sets = false;
  // Test hook: replace the theoretical width with the measured maximum
  // estimation error over the active support at each boundary.
  bool oracle_width = false;
};

// One CAPRI run. Epochs start at T_1 = ceil(sqrt(T)) and double; at each
// completed boundary the estimator is assembled (epoch noise under JDP,
// per-step noise under LDP), action sets are pruned with 4 * Delta_r, and
// fresh projection sets of doubled size are drawn. A final partial epoch is
// played out without terminal pruning. Randomness comes from three child
// streams of rng (trajectory, projection sampling, privatization noise), so
// runs that differ only in noise share identical trajectories.
RegretLog run(const Instance& env, const KernelSpec& spec,
              const PrivacyParams& privacy, const RunConfig& config, Rng& rng);

// Plays uniformly over the full action set for the whole horizon.
RegretLog uniform_baseline_run(const Instance& env, long horizon, Rng& rng);

}  // namespace capri
