#include "capri/gp.hpp"

#include "capri/numerics.hpp"

#include <cmath>

namespace capri {

LabeledDataset make_dataset(std::vector<Point> points, Eigen::VectorXd rewards,
                            double reward_bound) {
  if (static_cast<Eigen::Index>(points.size()) != rewards.size()) {
    throw std::invalid_argument("make_dataset: points/rewards size mismatch");
  }
  if (!(reward_bound > 0.0)) {
    throw std::invalid_argument("make_dataset: reward bound must be positive");
  }
  if (rewards.size() > 0 && rewards.cwiseAbs().maxCoeff() > reward_bound) {
    throw std::invalid_argument("make_dataset: reward exceeds bound");
  }
  LabeledDataset data;
  data.points = std::move(points);
  data.rewards = std::move(rewards);
  data.reward_bound = reward_bound;
  return data;
}

double posterior_mean(const LabeledDataset& data, double tau,
                      const KernelSpec& spec, const Point& w) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("posterior_mean: tau must be positive");
  }
  if (data.points.empty()) {
    return 0.0;  // zero-mean prior
  }
  const SymMatrix gram(kernel_matrix(spec, data.points));
  const Eigen::VectorXd alpha = solve_regularized(gram, tau, data.rewards);
  return kernel_vector(spec, data.points, w).dot(alpha);
}

double posterior_variance(const std::vector<Point>& points, double tau,
                          const KernelSpec& spec, const Point& w) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("posterior_variance: tau must be positive");
  }
  const double prior = kernel_eval(spec, w, w);
  if (points.empty()) {
    return prior;
  }
  const SymMatrix gram(kernel_matrix(spec, points));
  const Eigen::VectorXd kw = kernel_vector(spec, points, w);
  const double reduction = kw.dot(solve_regularized(gram, tau, kw));
  return std::clamp(prior - reduction, 0.0, prior);
}

double information_gain(const std::vector<Point>& points, double tau,
                        const KernelSpec& spec) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("information_gain: tau must be positive");
  }
  if (points.empty()) {
    return 0.0;
  }
  const SymEig eig = sym_eig(SymMatrix(kernel_matrix(spec, points)));
  double gain = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    gain += 0.5 * std::log1p(std::max(eig.values(i), 0.0) / tau);
  }
  return gain;
}

double covariance_concentration_stat(const KernelSpec& spec,
                                     const std::vector<WeightedPoint>& measure,
                                     const std::vector<Point>& sample,
                                     double tau) {
  if (spec.family != KernelFamily::kNormalizedLinear) {
    throw Unsupported(
        "covariance_concentration_stat: needs a finite-dimensional kernel");
  }
  if (measure.empty()) {
    throw std::invalid_argument("covariance_concentration_stat: empty measure");
  }
  double total = 0.0;
  for (const auto& [point, probability] : measure) {
    if (probability < 0.0) {
      throw std::invalid_argument(
          "covariance_concentration_stat: negative probability");
    }
    total += probability;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "covariance_concentration_stat: probabilities must sum to 1");
  }

  const Eigen::Index dim = explicit_features(spec, measure.front().first).size();
  Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& [point, probability] : measure) {
    const Eigen::VectorXd phi = explicit_features(spec, point);
    second_moment.noalias() += probability * phi * phi.transpose();
  }

  const double t = static_cast<double>(sample.size());
  Eigen::MatrixXd z = t * second_moment;
  z.diagonal().array() += tau;

  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
  for (const Point& point : sample) {
    const Eigen::VectorXd phi = explicit_features(spec, point);
    r.noalias() += phi * phi.transpose();
  }
  r.diagonal().array() += tau;

  const Eigen::MatrixXd z_inv_sqrt = inv_sqrt_psd(SymMatrix(z)).mat();
  Eigen::MatrixXd centered = z_inv_sqrt * r * z_inv_sqrt;
  centered.diagonal().array() -= 1.0;
  const SymEig eig = sym_eig(SymMatrix(centered));
  return eig.values.cwiseAbs().maxCoeff();
}

}  // namespace capri
