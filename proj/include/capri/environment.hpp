#pragma once

#include "capri/kernels.hpp"
#include "capri/rng.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace capri {

struct DegenerateReward : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Context distribution kappa over integer context ids.
struct ContextDistribution {
  Eigen::VectorXd probabilities;
};

ContextDistribution make_context_distribution(Eigen::VectorXd probabilities);
ContextDistribution uniform_contexts(int num_contexts);

// Inverse-CDF categorical draw.
int sample_context(const ContextDistribution& dist, Rng& rng);

// Reward function f(w) = sum_j alpha_j k(w, z_j), an RKHS member with
// controlled norm sqrt(alpha^T K alpha) <= B.
struct RkhsReward {
  KernelSpec spec;
  std::vector<Point> centers;
  Eigen::VectorXd coefficients;
  double norm_bound = 1.0;

  double value(const Point& w) const;
  double rkhs_norm() const;
};

// Rescales the raw coefficients so the RKHS norm equals
// min(bound, original norm).
RkhsReward make_rkhs_reward(const KernelSpec& spec, std::vector<Point> centers,
                            const Eigen::VectorXd& raw_coefficients,
                            double bound);

// Noisy observation y = f(w) + eta with eta uniform on
// [-a, a], a = noise_level * (B - |f(w)|), so |y| <= B always holds and the
// noise is zero-mean. noise_level 0 disables noise.
double observe(const RkhsReward& reward, const Point& w, double noise_level,
               Rng& rng);

struct BestAction {
  int action_id = -1;
  double value = 0.0;
};

// Exhaustive argmax of f(c, .) over the given action ids; ties go to the
// smallest id.
BestAction best_action(const RkhsReward& reward, const Grid& grid,
                       int context_id, const std::vector<int>& action_ids);

// A complete synthetic bandit problem; everything a run needs.
struct Instance {
  Grid grid;
  KernelSpec kernel;
  ContextDistribution kappa;
  RkhsReward reward;
  double reward_bound = 1.0;
  double noise_level = 1.0;
  std::uint64_t seed = 0;
};

struct InstanceParams {
  int num_contexts = 4;
  int num_actions = 16;
  int context_dim = 1;
  int action_dim = 1;
  int reward_centers = 12;
  double reward_bound = 1.0;
  double noise_level = 1.0;
  Eigen::VectorXd context_probabilities;  // empty means uniform
};

// Builds a random instance: embeddings uniform on [0,1]^dim, reward centers
// drawn from the grid, coefficients standard normal before rescaling. For the
// linear family the kernel normalizer is set from the generated grid.
Instance make_instance(const KernelSpec& kernel, const InstanceParams& params,
                       std::uint64_t seed);

// Bit-exact JSON round trip of a full instance.
void save_instance(const Instance& instance, const std::string& path);
Instance load_instance(const std::string& path);

}  // namespace capri
