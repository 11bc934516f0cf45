#include "capri/kernels.hpp"

#include <cmath>

namespace capri {

namespace {

bool valid_nu(double nu) { return nu == 0.5 || nu == 1.5 || nu == 2.5; }

double matern_eval(double r, double lengthscale, double nu) {
  if (nu == 0.5) {
    return std::exp(-r / lengthscale);
  }
  if (nu == 1.5) {
    const double z = std::sqrt(3.0) * r / lengthscale;
    return (1.0 + z) * std::exp(-z);
  }
  const double z = std::sqrt(5.0) * r / lengthscale;
  return (1.0 + z + z * z / 3.0) * std::exp(-z);
}

}  // namespace

KernelSpec KernelSpec::squared_exponential(double lengthscale) {
  if (!(lengthscale > 0.0)) {
    throw std::invalid_argument("kernel: lengthscale must be positive");
  }
  KernelSpec spec;
  spec.family = KernelFamily::kSquaredExponential;
  spec.lengthscale = lengthscale;
  return spec;
}

KernelSpec KernelSpec::matern(double nu, double lengthscale) {
  if (!(lengthscale > 0.0)) {
    throw std::invalid_argument("kernel: lengthscale must be positive");
  }
  if (!valid_nu(nu)) {
    throw std::invalid_argument("kernel: matern nu must be 0.5, 1.5 or 2.5");
  }
  KernelSpec spec;
  spec.family = KernelFamily::kMatern;
  spec.nu = nu;
  spec.lengthscale = lengthscale;
  return spec;
}

KernelSpec KernelSpec::normalized_linear(double normalizer) {
  if (!(normalizer > 0.0)) {
    throw std::invalid_argument("kernel: normalizer must be positive");
  }
  KernelSpec spec;
  spec.family = KernelFamily::kNormalizedLinear;
  spec.linear_normalizer = normalizer;
  return spec;
}

double kernel_eval(const KernelSpec& spec, const Point& u, const Point& v) {
  if (u.embedding.size() != v.embedding.size()) {
    throw std::invalid_argument("kernel_eval: embedding dimension mismatch");
  }
  switch (spec.family) {
    case KernelFamily::kSquaredExponential: {
      const double sq = (u.embedding - v.embedding).squaredNorm();
      return std::exp(-sq / (2.0 * spec.lengthscale * spec.lengthscale));
    }
    case KernelFamily::kMatern: {
      const double r = (u.embedding - v.embedding).norm();
      return matern_eval(r, spec.lengthscale, spec.nu);
    }
    case KernelFamily::kNormalizedLinear:
      return u.embedding.dot(v.embedding) / spec.linear_normalizer;
  }
  throw std::invalid_argument("kernel_eval: unknown family");
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Point>& a,
                              const std::vector<Point>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("kernel_matrix: empty point list");
  }
  Eigen::MatrixXd k(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      k(i, j) = kernel_eval(spec, a[i], b[j]);
    }
  }
  return k;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Point>& a) {
  if (a.empty()) {
    throw std::invalid_argument("kernel_matrix: empty point list");
  }
  const std::size_t n = a.size();
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = kernel_eval(spec, a[i], a[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = kernel_eval(spec, a[i], a[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::VectorXd kernel_vector(const KernelSpec& spec,
                              const std::vector<Point>& s, const Point& w) {
  if (s.empty()) {
    throw std::invalid_argument("kernel_vector: empty point list");
  }
  Eigen::VectorXd k(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    k(i) = kernel_eval(spec, s[i], w);
  }
  return k;
}

Eigen::VectorXd explicit_features(const KernelSpec& spec, const Point& w) {
  if (spec.family != KernelFamily::kNormalizedLinear) {
    throw Unsupported("explicit_features: kernel has no finite feature map");
  }
  return w.embedding / std::sqrt(spec.linear_normalizer);
}

Grid::Grid(std::vector<Eigen::VectorXd> context_embeddings,
           std::vector<Eigen::VectorXd> action_embeddings)
    : context_embeddings_(std::move(context_embeddings)),
      action_embeddings_(std::move(action_embeddings)) {
  if (context_embeddings_.empty() || action_embeddings_.empty()) {
    throw std::invalid_argument("Grid: needs at least one context and action");
  }
  points_.reserve(context_embeddings_.size() * action_embeddings_.size());
  for (std::size_t c = 0; c < context_embeddings_.size(); ++c) {
    for (std::size_t x = 0; x < action_embeddings_.size(); ++x) {
      Point p;
      p.context_id = static_cast<int>(c);
      p.action_id = static_cast<int>(x);
      p.embedding.resize(context_embeddings_[c].size() +
                         action_embeddings_[x].size());
      p.embedding << context_embeddings_[c], action_embeddings_[x];
      if (!p.embedding.allFinite()) {
        throw std::invalid_argument("Grid: non-finite embedding");
      }
      points_.push_back(std::move(p));
    }
  }
}

double Grid::max_squared_norm() const {
  double z = 0.0;
  for (const Point& p : points_) {
    z = std::max(z, p.embedding.squaredNorm());
  }
  return z;
}

}  // namespace capri
