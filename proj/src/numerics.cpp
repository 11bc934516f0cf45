#include "capri/numerics.hpp"

#include <cmath>

namespace capri {

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument("SymMatrix: input must be square, dim >= 1");
  }
  mat_ = 0.5 * (m + m.transpose());
}

SymEig sym_eig(const SymMatrix& m) {
  if (!m.mat().allFinite()) {
    throw InvalidMatrix("sym_eig: matrix has non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.mat());
  if (solver.info() != Eigen::Success) {
    throw InvalidMatrix("sym_eig: eigendecomposition failed");
  }
  // Eigen returns ascending order.
  SymEig out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

SymMatrix inv_sqrt_psd(const SymMatrix& m, double floor) {
  if (!(floor > 0.0)) {
    throw std::invalid_argument("inv_sqrt_psd: floor must be positive");
  }
  const SymEig eig = sym_eig(m);
  if (eig.values.minCoeff() < -10.0 * floor) {
    throw NotPsd("inv_sqrt_psd: eigenvalue below -10*floor");
  }
  const Eigen::ArrayXd clamped = eig.values.array().max(floor);
  const Eigen::VectorXd scale = clamped.pow(-0.5).matrix();
  return SymMatrix(eig.vectors * scale.asDiagonal() * eig.vectors.transpose());
}

Eigen::MatrixXd solve_regularized(const SymMatrix& m, double tau,
                                  const Eigen::MatrixXd& rhs) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("solve_regularized: tau must be positive");
  }
  if (rhs.rows() != m.dim()) {
    throw std::invalid_argument("solve_regularized: dimension mismatch");
  }
  Eigen::MatrixXd system = m.mat();
  system.diagonal().array() += tau;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  Eigen::MatrixXd x = ldlt.solve(rhs);
  // One step of iterative refinement keeps the residual at the contract level
  // for ill-conditioned Gram systems.
  x += ldlt.solve(rhs - system * x);
  return x;
}

Eigen::VectorXd solve_regularized(const SymMatrix& m, double tau,
                                  const Eigen::VectorXd& rhs) {
  const Eigen::MatrixXd x =
      solve_regularized(m, tau, Eigen::MatrixXd(rhs));
  return x.col(0);
}

}  // namespace capri
