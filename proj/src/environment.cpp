#include "capri/environment.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace capri {

ContextDistribution make_context_distribution(Eigen::VectorXd probabilities) {
  if (probabilities.size() < 1) {
    throw std::invalid_argument("context distribution: needs >= 1 context");
  }
  if (probabilities.minCoeff() < 0.0) {
    throw std::invalid_argument("context distribution: negative probability");
  }
  if (std::abs(probabilities.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("context distribution: must sum to 1");
  }
  return ContextDistribution{std::move(probabilities)};
}

ContextDistribution uniform_contexts(int num_contexts) {
  return make_context_distribution(Eigen::VectorXd::Constant(
      num_contexts, 1.0 / static_cast<double>(num_contexts)));
}

int sample_context(const ContextDistribution& dist, Rng& rng) {
  const double u = rng.uniform01();
  double cumulative = 0.0;
  const int n = static_cast<int>(dist.probabilities.size());
  for (int c = 0; c < n; ++c) {
    cumulative += dist.probabilities(c);
    if (u < cumulative) {
      return c;
    }
  }
  return n - 1;
}

double RkhsReward::value(const Point& w) const {
  double f = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    f += coefficients(static_cast<Eigen::Index>(j)) *
         kernel_eval(spec, w, centers[j]);
  }
  return f;
}

double RkhsReward::rkhs_norm() const {
  const Eigen::MatrixXd gram = kernel_matrix(spec, centers);
  return std::sqrt(std::max(0.0, coefficients.dot(gram * coefficients)));
}

RkhsReward make_rkhs_reward(const KernelSpec& spec, std::vector<Point> centers,
                            const Eigen::VectorXd& raw_coefficients,
                            double bound) {
  if (centers.empty() ||
      static_cast<Eigen::Index>(centers.size()) != raw_coefficients.size()) {
    throw std::invalid_argument(
        "make_rkhs_reward: centers/coefficients size mismatch");
  }
  if (!(bound > 0.0)) {
    throw std::invalid_argument("make_rkhs_reward: bound must be positive");
  }
  if (raw_coefficients.isZero(0.0)) {
    throw DegenerateReward("make_rkhs_reward: all-zero coefficients");
  }
  RkhsReward reward;
  reward.spec = spec;
  reward.centers = std::move(centers);
  reward.coefficients = raw_coefficients;
  reward.norm_bound = bound;
  const double norm = reward.rkhs_norm();
  if (norm > bound) {
    reward.coefficients *= bound / norm;
  }
  return reward;
}

double observe(const RkhsReward& reward, const Point& w, double noise_level,
               Rng& rng) {
  const double f = reward.value(w);
  const double half_width =
      noise_level * std::max(0.0, reward.norm_bound - std::abs(f));
  if (half_width == 0.0) {
    return f;
  }
  return f + half_width * (2.0 * rng.uniform01() - 1.0);
}

BestAction best_action(const RkhsReward& reward, const Grid& grid,
                       int context_id, const std::vector<int>& action_ids) {
  if (action_ids.empty()) {
    throw std::invalid_argument("best_action: empty action set");
  }
  BestAction best;
  for (const int action_id : action_ids) {
    const double value = reward.value(grid.point(context_id, action_id));
    if (best.action_id < 0 || value > best.value) {
      best.action_id = action_id;
      best.value = value;
    }
  }
  return best;
}

Instance make_instance(const KernelSpec& kernel, const InstanceParams& params,
                       std::uint64_t seed) {
  if (params.num_contexts < 1 || params.num_actions < 1 ||
      params.context_dim < 1 || params.action_dim < 1 ||
      params.reward_centers < 1) {
    throw std::invalid_argument("make_instance: sizes must be positive");
  }
  Rng rng(seed);

  auto draw_embeddings = [&rng](int count, int dim) {
    std::vector<Eigen::VectorXd> out(count);
    for (int i = 0; i < count; ++i) {
      out[i].resize(dim);
      for (int d = 0; d < dim; ++d) out[i](d) = rng.uniform01();
    }
    return out;
  };

  Instance instance;
  instance.grid = Grid(draw_embeddings(params.num_contexts, params.context_dim),
                       draw_embeddings(params.num_actions, params.action_dim));
  instance.kernel = kernel;
  if (kernel.family == KernelFamily::kNormalizedLinear) {
    instance.kernel.linear_normalizer =
        std::max(instance.grid.max_squared_norm(), 1e-12);
  }
  instance.kappa = params.context_probabilities.size() == 0
                       ? uniform_contexts(params.num_contexts)
                       : make_context_distribution(params.context_probabilities);

  std::vector<Point> centers(params.reward_centers);
  for (int j = 0; j < params.reward_centers; ++j) {
    const int c = rng.uniform_index(params.num_contexts);
    const int x = rng.uniform_index(params.num_actions);
    centers[j] = instance.grid.point(c, x);
  }
  Eigen::VectorXd raw(params.reward_centers);
  for (int j = 0; j < params.reward_centers; ++j) raw(j) = rng.normal();
  instance.reward = make_rkhs_reward(instance.kernel, std::move(centers), raw,
                                     params.reward_bound);

  instance.reward_bound = params.reward_bound;
  instance.noise_level = params.noise_level;
  instance.seed = seed;
  return instance;
}

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json embeddings_to_json(const std::vector<Eigen::VectorXd>& embeddings) {
  json out = json::array();
  for (const auto& e : embeddings) out.push_back(vector_to_json(e));
  return out;
}

std::vector<Eigen::VectorXd> embeddings_from_json(const json& j) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(vector_from_json(e));
  return out;
}

json kernel_to_json(const KernelSpec& spec) {
  json out;
  switch (spec.family) {
    case KernelFamily::kSquaredExponential:
      out["family"] = "squared_exponential";
      break;
    case KernelFamily::kMatern:
      out["family"] = "matern";
      out["nu"] = spec.nu;
      break;
    case KernelFamily::kNormalizedLinear:
      out["family"] = "normalized_linear";
      out["normalizer"] = spec.linear_normalizer;
      break;
  }
  out["lengthscale"] = spec.lengthscale;
  return out;
}

KernelSpec kernel_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "squared_exponential") {
    return KernelSpec::squared_exponential(j.at("lengthscale").get<double>());
  }
  if (family == "matern") {
    return KernelSpec::matern(j.at("nu").get<double>(),
                              j.at("lengthscale").get<double>());
  }
  if (family == "normalized_linear") {
    return KernelSpec::normalized_linear(j.at("normalizer").get<double>());
  }
  throw std::invalid_argument("unknown kernel family: " + family);
}

}  // namespace

void save_instance(const Instance& instance, const std::string& path) {
  json j;
  j["seed"] = instance.seed;
  j["reward_bound"] = instance.reward_bound;
  j["noise_level"] = instance.noise_level;
  j["kernel"] = kernel_to_json(instance.kernel);
  j["context_embeddings"] =
      embeddings_to_json(instance.grid.context_embeddings());
  j["action_embeddings"] =
      embeddings_to_json(instance.grid.action_embeddings());
  j["kappa"] = vector_to_json(instance.kappa.probabilities);
  json centers = json::array();
  for (const Point& p : instance.reward.centers) {
    centers.push_back({{"context", p.context_id}, {"action", p.action_id}});
  }
  j["reward_centers"] = centers;
  j["reward_coefficients"] = vector_to_json(instance.reward.coefficients);

  std::ofstream out(path);
  if (!out) {
    throw IoError("save_instance: cannot open " + path);
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("save_instance: write failed for " + path);
  }
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("load_instance: cannot open " + path);
  }
  json j;
  in >> j;

  Instance instance;
  instance.seed = j.at("seed").get<std::uint64_t>();
  instance.reward_bound = j.at("reward_bound").get<double>();
  instance.noise_level = j.at("noise_level").get<double>();
  instance.kernel = kernel_from_json(j.at("kernel"));
  instance.grid = Grid(embeddings_from_json(j.at("context_embeddings")),
                       embeddings_from_json(j.at("action_embeddings")));
  instance.kappa = make_context_distribution(vector_from_json(j.at("kappa")));

  std::vector<Point> centers;
  for (const auto& c : j.at("reward_centers")) {
    centers.push_back(instance.grid.point(c.at("context").get<int>(),
                                          c.at("action").get<int>()));
  }
  instance.reward.spec = instance.kernel;
  instance.reward.centers = std::move(centers);
  instance.reward.coefficients =
      vector_from_json(j.at("reward_coefficients"));
  instance.reward.norm_bound = instance.reward_bound;
  return instance;
}

}  // namespace capri
