#include "capri/estimator.hpp"

#include "capri/numerics.hpp"

#include <cmath>

namespace capri {

namespace {

// M = K_SR K_RS + tau K_SS from the private-estimator definition.
SymMatrix statistic_operator(const ProjectionPair& pair,
                             const KernelSpec& spec) {
  const Eigen::MatrixXd k_sr = kernel_matrix(spec, pair.s, pair.r);
  const Eigen::MatrixXd k_ss = kernel_matrix(spec, pair.s);
  return SymMatrix(k_sr * k_sr.transpose() + pair.tau * k_ss);
}

}  // namespace

ProjectionPair make_projection_pair(std::vector<Point> s, std::vector<Point> r,
                                    double tau) {
  if (s.size() != r.size() || s.empty()) {
    throw std::invalid_argument(
        "make_projection_pair: S and R must be nonempty and equal-sized");
  }
  if (!(tau > 0.0)) {
    throw std::invalid_argument("make_projection_pair: tau must be positive");
  }
  ProjectionPair pair;
  pair.s = std::move(s);
  pair.r = std::move(r);
  pair.tau = tau;
  return pair;
}

double projected_variance(const ProjectionPair& pair, const KernelSpec& spec,
                          const Point& w) {
  if (!(pair.tau > 0.0)) {
    throw std::invalid_argument("projected_variance: tau must be positive");
  }
  const Eigen::MatrixXd k_ss_inv_sqrt =
      inv_sqrt_psd(SymMatrix(kernel_matrix(spec, pair.s))).mat();
  const Eigen::MatrixXd k_ss_inv = k_ss_inv_sqrt * k_ss_inv_sqrt;
  const Eigen::MatrixXd k_sr = kernel_matrix(spec, pair.s, pair.r);

  const Eigen::MatrixXd a = k_ss_inv * k_sr;                    // K_SS^{-1} K_SR
  const SymMatrix mid(k_sr.transpose() * a);                    // K_RS K_SS^{-1} K_SR
  const Eigen::VectorXd k_w = kernel_vector(spec, pair.s, w);
  const Eigen::VectorXd b = a.transpose() * k_w;
  const double reduction = b.dot(solve_regularized(mid, pair.tau, b));

  const double prior = kernel_eval(spec, w, w);
  const double value = (prior - reduction) / pair.tau;
  return std::clamp(value, 0.0, prior / pair.tau + 1e-9);
}

double max_projected_variance(const ProjectionPair& pair,
                              const KernelSpec& spec,
                              const std::vector<Point>& support) {
  if (support.empty()) {
    throw std::invalid_argument("max_projected_variance: empty support");
  }
  double best = 0.0;
  for (const Point& w : support) {
    best = std::max(best, projected_variance(pair, spec, w));
  }
  return best;
}

double noise_scale(double sigma_max, double reward_bound, double horizon,
                   double epsilon, double delta_dp) {
  if (sigma_max < 0.0 || !(reward_bound > 0.0) || !(horizon >= 2.0) ||
      !(epsilon > 0.0) || !(delta_dp > 0.0) || !(delta_dp < 1.0)) {
    throw std::invalid_argument("noise_scale: parameter out of range");
  }
  const double log_t = std::log(horizon);
  const double inner = 1.25 * log_t / delta_dp;
  if (inner <= 1.0) {
    throw std::invalid_argument(
        "noise_scale: 1.25 log(T) / delta_dp must exceed 1");
  }
  if (sigma_max == 0.0) {
    return 0.0;
  }
  return sigma_max * (4.0 * reward_bound * log_t / epsilon) *
         std::sqrt(std::log(inner));
}

Eigen::VectorXd per_point_statistic(const ProjectionPair& pair,
                                    const KernelSpec& spec, const Point& w,
                                    double y) {
  const SymMatrix m = statistic_operator(pair, spec);
  return y * (inv_sqrt_psd(m).mat() * kernel_vector(spec, pair.s, w));
}

namespace {

PrivateEstimator assemble(const ProjectionPair& pair, const KernelSpec& spec,
                          const LabeledDataset& data,
                          const PrivacyParams& privacy, double sigma_max,
                          Rng& rng, bool per_record_noise) {
  if (data.points.size() != pair.s.size()) {
    throw std::invalid_argument("assemble: dataset size must match |S|");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(pair.s.size());
  const Eigen::MatrixXd m_inv_sqrt =
      inv_sqrt_psd(statistic_operator(pair, spec)).mat();

  const bool non_private = privacy.mode == PrivacyMode::kNonPrivate;
  const double sigma0 =
      non_private ? 0.0
                  : noise_scale(sigma_max, data.reward_bound,
                                static_cast<double>(privacy.horizon),
                                privacy.epsilon, privacy.delta);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  long draws = 0;
  for (std::size_t t = 0; t < data.points.size(); ++t) {
    Eigen::VectorXd statistic =
        data.rewards(static_cast<Eigen::Index>(t)) *
        (m_inv_sqrt * kernel_vector(spec, pair.s, data.points[t]));
    if (per_record_noise && !non_private) {
      statistic += rng.normal_vector(static_cast<int>(n), sigma0);
      ++draws;
    }
    sum += statistic;
  }
  if (!per_record_noise && !non_private) {
    sum += rng.normal_vector(static_cast<int>(n), sigma0);
    ++draws;
  }

  PrivateEstimator estimator;
  estimator.s = pair.s;
  estimator.spec = spec;
  estimator.weights = m_inv_sqrt * sum;
  estimator.sigma0 = sigma0;
  estimator.noise_draw_count = draws;
  return estimator;
}

}  // namespace

PrivateEstimator assemble_jdp(const ProjectionPair& pair,
                              const KernelSpec& spec,
                              const LabeledDataset& data,
                              const PrivacyParams& privacy, double sigma_max,
                              Rng& rng) {
  if (privacy.mode == PrivacyMode::kLdp) {
    throw std::invalid_argument("assemble_jdp: called with LDP mode");
  }
  return assemble(pair, spec, data, privacy, sigma_max, rng,
                  /*per_record_noise=*/false);
}

PrivateEstimator assemble_ldp(const ProjectionPair& pair,
                              const KernelSpec& spec,
                              const LabeledDataset& data,
                              const PrivacyParams& privacy, double sigma_max,
                              Rng& rng) {
  if (privacy.mode == PrivacyMode::kJdp) {
    throw std::invalid_argument("assemble_ldp: called with JDP mode");
  }
  return assemble(pair, spec, data, privacy, sigma_max, rng,
                  /*per_record_noise=*/true);
}

double predict(const PrivateEstimator& estimator, const Point& w) {
  return kernel_vector(estimator.spec, estimator.s, w).dot(estimator.weights);
}

double nonprivate_projected_mean(const LabeledDataset& data,
                                 const ProjectionPair& pair,
                                 const KernelSpec& spec, const Point& w) {
  const Eigen::MatrixXd m_inv_sqrt =
      inv_sqrt_psd(statistic_operator(pair, spec)).mat();
  const Eigen::MatrixXd k_sw = kernel_matrix(spec, pair.s, data.points);
  const Eigen::VectorXd projected =
      m_inv_sqrt * (m_inv_sqrt * (k_sw * data.rewards));
  return kernel_vector(spec, pair.s, w).dot(projected);
}

}  // namespace capri
