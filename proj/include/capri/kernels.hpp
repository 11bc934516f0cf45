#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace capri {

struct Unsupported : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A joint context-action point on the finite grid W = C x X.
struct Point {
  int context_id = -1;
  int action_id = -1;
  Eigen::VectorXd embedding;  // concatenated context and action coordinates
};

enum class KernelFamily { kSquaredExponential, kMatern, kNormalizedLinear };

// Kernel family plus hyperparameters. Every family is normalized so that
// k(w, w) <= 1 on the grid it is used with: SE and Matern have unit diagonal
// by construction, the linear kernel divides by the largest squared embedding
// norm of the instance.
struct KernelSpec {
  KernelFamily family = KernelFamily::kSquaredExponential;
  double lengthscale = 1.0;
  double nu = 1.5;                 // Matern smoothness, one of {0.5, 1.5, 2.5}
  double linear_normalizer = 1.0;  // Z with k(u, v) = u.v / Z

  static KernelSpec squared_exponential(double lengthscale);
  static KernelSpec matern(double nu, double lengthscale);
  static KernelSpec normalized_linear(double normalizer);

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

double kernel_eval(const KernelSpec& spec, const Point& u, const Point& v);

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Point>& a,
                              const std::vector<Point>& b);
// Square case; exactly symmetric output.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Point>& a);

Eigen::VectorXd kernel_vector(const KernelSpec& spec,
                              const std::vector<Point>& s, const Point& w);

// Finite-dimensional feature map phi with phi(u).phi(v) == kernel_eval(u, v).
// Only the linear family has one; SE/Matern raise Unsupported.
Eigen::VectorXd explicit_features(const KernelSpec& spec, const Point& w);

// The finite grid of context and action embeddings. Points are indexed by
// (context_id, action_id) and carry the concatenated embedding.
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<Eigen::VectorXd> context_embeddings,
       std::vector<Eigen::VectorXd> action_embeddings);

  int num_contexts() const {
    return static_cast<int>(context_embeddings_.size());
  }
  int num_actions() const {
    return static_cast<int>(action_embeddings_.size());
  }
  int num_points() const { return num_contexts() * num_actions(); }
  int flat_index(int context_id, int action_id) const {
    return context_id * num_actions() + action_id;
  }

  const Point& point(int context_id, int action_id) const {
    return points_[flat_index(context_id, action_id)];
  }
  const std::vector<Point>& all_points() const { return points_; }

  double max_squared_norm() const;

  const std::vector<Eigen::VectorXd>& context_embeddings() const {
    return context_embeddings_;
  }
  const std::vector<Eigen::VectorXd>& action_embeddings() const {
    return action_embeddings_;
  }

 private:
  std::vector<Eigen::VectorXd> context_embeddings_;
  std::vector<Eigen::VectorXd> action_embeddings_;
  std::vector<Point> points_;  // flat index order
};

}  // namespace capri
