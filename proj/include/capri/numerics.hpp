#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace capri {

// Gram matrices of near-duplicate sampled points are numerically
// rank-deficient; eigenvalues below this floor are clamped before inversion.
inline constexpr double kDefaultEigFloor = 1e-10;

struct InvalidMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPsd : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense symmetric matrix. Construction averages the input with its transpose
// so stored entries are exactly symmetric even when floating-point Gram
// assembly is not.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::MatrixXd& m);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Eigen::MatrixXd& mat() const { return mat_; }

 private:
  Eigen::MatrixXd mat_;
};

struct SymEig {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns, ordered to match values
};

// Full eigendecomposition, eigenvalues sorted descending.
SymEig sym_eig(const SymMatrix& m);

// V diag(max(lambda_i, floor))^{-1/2} V^T. Eigenvalues below -10*floor signal
// a broken Gram matrix and raise NotPsd; values in [-10*floor, floor) clamp
// to the floor.
SymMatrix inv_sqrt_psd(const SymMatrix& m, double floor = kDefaultEigFloor);

// Solve (M + tau I) x = rhs for symmetric M and tau > 0.
Eigen::VectorXd solve_regularized(const SymMatrix& m, double tau,
                                  const Eigen::VectorXd& rhs);
Eigen::MatrixXd solve_regularized(const SymMatrix& m, double tau,
                                  const Eigen::MatrixXd& rhs);

}  // namespace capri
