#pragma once

#include "capri/numerics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <unordered_map>
#include <vector>

namespace capri::detail {

// Per-epoch factorizations of the projected-regression operators. S and R are
// multisets of grid points, so every Gram matrix indexed by them collapses
// onto the distinct grid points with multiplicity weights: for the selection
// matrix E_S (one row per S entry) and counts D_S = E_S^T E_S,
//   M = K_SR K_RS + tau K_SS = E_S (K_X D_R K_X^T + tau K_S) E_S^T,
// and the nonzero spectrum of M is the spectrum of
// D_S^{1/2} (K_X D_R K_X^T + tau K_S) D_S^{1/2}, with orthonormal
// eigenvectors E_S D_S^{-1/2} u_k. Since every k_S(w) lies in the range of
// E_S, all solver outputs equal the dense-operator quantities; only the
// factorization runs at grid size instead of |S|.
class EpochSolver {
 public:
  EpochSolver(const Eigen::MatrixXd& grid_gram, std::vector<int> s_indices,
              std::vector<int> r_indices, double tau)
      : gram_(grid_gram), s_entries_(std::move(s_indices)),
        r_entries_(std::move(r_indices)), tau_(tau) {
    build_core(s_entries_, &s_core_, &s_counts_, &s_core_of_entry_);
    build_core(r_entries_, &r_core_, &r_counts_, nullptr);
    const int ms = static_cast<int>(s_core_.size());
    const int mr = static_cast<int>(r_core_.size());

    Eigen::MatrixXd k_s(ms, ms);
    for (int i = 0; i < ms; ++i) {
      for (int j = 0; j < ms; ++j) k_s(i, j) = gram_(s_core_[i], s_core_[j]);
    }
    k_x_.resize(ms, mr);
    for (int i = 0; i < ms; ++i) {
      for (int j = 0; j < mr; ++j) k_x_(i, j) = gram_(s_core_[i], r_core_[j]);
    }

    sqrt_s_counts_ = s_counts_.cwiseSqrt();
    inv_sqrt_s_counts_ = sqrt_s_counts_.cwiseInverse();
    sqrt_r_counts_ = r_counts_.cwiseSqrt();

    // Statistic operator core: nonzero spectrum of M.
    const Eigen::MatrixXd a_m =
        k_x_ * r_counts_.asDiagonal() * k_x_.transpose() + tau_ * k_s;
    const SymEig em = sym_eig(SymMatrix(sqrt_s_counts_.asDiagonal() * a_m *
                                        sqrt_s_counts_.asDiagonal()));
    check_psd(em.values);
    m_vectors_ = em.vectors;
    m_values_floored_ = em.values.array().max(kDefaultEigFloor);

    // Projection-basis Gram core: nonzero spectrum of K_SS.
    const SymEig es = sym_eig(SymMatrix(sqrt_s_counts_.asDiagonal() * k_s *
                                        sqrt_s_counts_.asDiagonal()));
    check_psd(es.values);
    s_vectors_ = es.vectors;
    s_values_floored_ = es.values.array().max(kDefaultEigFloor);
    info_gain_ = 0.0;
    for (Eigen::Index i = 0; i < es.values.size(); ++i) {
      info_gain_ += 0.5 * std::log1p(std::max(es.values(i), 0.0) / tau_);
    }

    // Variance midpoint: tau I + K_RS K_SS^{-1} K_SR collapses to
    // tau I + D_R^{1/2} C D_R^{1/2} with C = G^T G and
    // G = lambda_S^{-1/2} U_S^T D_S^{1/2} K_X.
    const Eigen::MatrixXd g =
        s_values_floored_.array().rsqrt().matrix().asDiagonal() *
        (s_vectors_.transpose() * (sqrt_s_counts_.asDiagonal() * k_x_));
    Eigen::MatrixXd mid = sqrt_r_counts_.asDiagonal() *
                          (g.transpose() * g).eval() *
                          sqrt_r_counts_.asDiagonal();
    mid = 0.5 * (mid + mid.transpose()).eval();
    mid.diagonal().array() += tau_;
    mid_ldlt_.compute(mid);
  }

  int core_dim() const { return static_cast<int>(s_core_.size()); }
  long set_size() const { return static_cast<long>(s_entries_.size()); }
  const std::vector<int>& s_grid_indices() const { return s_entries_; }
  const std::vector<int>& r_grid_indices() const { return r_entries_; }
  const std::vector<int>& s_core_grid_indices() const { return s_core_; }
  double info_gain() const { return info_gain_; }

  // Core coordinates psi(w) of the per-point statistic direction:
  // M^{-1/2} k_S(w) = E_S psi(w).
  const Eigen::VectorXd& statistic_core(int grid_index) {
    auto it = psi_cache_.find(grid_index);
    if (it != psi_cache_.end()) return it->second;
    Eigen::VectorXd psi = apply_m_power(k_core(grid_index), -0.5);
    return psi_cache_.emplace(grid_index, std::move(psi)).first->second;
  }

  // Expands core coordinates to the per-entry vector E_S psi.
  Eigen::VectorXd expand(const Eigen::VectorXd& core) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(s_entries_.size()));
    for (std::size_t i = 0; i < s_core_of_entry_.size(); ++i) {
      out(static_cast<Eigen::Index>(i)) = core(s_core_of_entry_[i]);
    }
    return out;
  }

  // l2 norm of E_S psi.
  double statistic_norm(const Eigen::VectorXd& psi) const {
    return std::sqrt(psi.dot(s_counts_.asDiagonal() * psi));
  }

  // Prediction k_S(w)^T M^{-1/2} (E_S gamma + z) from the clean core
  // accumulator gamma and the reduced noise zeta = E_S^T z.
  double predict(int grid_index, const Eigen::VectorXd& gamma,
                 const Eigen::VectorXd& zeta) {
    const Eigen::VectorXd& psi = statistic_core(grid_index);
    return psi.dot(s_counts_.asDiagonal() * gamma + zeta);
  }

  // E_S^T z for a vector over the |S| entries.
  Eigen::VectorXd reduce(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(core_dim());
    for (std::size_t i = 0; i < s_core_of_entry_.size(); ++i) {
      out(s_core_of_entry_[i]) += z(static_cast<Eigen::Index>(i));
    }
    return out;
  }

  double projected_variance(int grid_index) const {
    const Eigen::VectorXd alpha = apply_s_inverse(k_core(grid_index));
    const Eigen::VectorXd beta =
        k_x_.transpose() * (s_counts_.asDiagonal() * alpha);
    const Eigen::VectorXd scaled = sqrt_r_counts_.asDiagonal() * beta;
    const double reduction = scaled.dot(mid_ldlt_.solve(scaled));
    const double prior = gram_(grid_index, grid_index);
    const double value = (prior - reduction) / tau_;
    return std::clamp(value, 0.0, prior / tau_ + 1e-9);
  }

  double max_projected_variance(const std::vector<int>& support) const {
    double best = 0.0;
    for (const int g : support) {
      best = std::max(best, projected_variance(g));
    }
    return best;
  }

 private:
  static void check_psd(const Eigen::VectorXd& values) {
    if (values.minCoeff() < -10.0 * kDefaultEigFloor) {
      throw NotPsd("EpochSolver: grid Gram operator is not PSD");
    }
  }

  static void build_core(const std::vector<int>& entries,
                         std::vector<int>* core, Eigen::VectorXd* counts,
                         std::vector<int>* core_of_entry) {
    std::unordered_map<int, int> position;
    std::vector<double> count_values;
    std::vector<int> local(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto [it, inserted] =
          position.emplace(entries[i], static_cast<int>(core->size()));
      if (inserted) {
        core->push_back(entries[i]);
        count_values.push_back(0.0);
      }
      count_values[static_cast<std::size_t>(it->second)] += 1.0;
      local[i] = it->second;
    }
    *counts = Eigen::Map<Eigen::VectorXd>(
        count_values.data(), static_cast<Eigen::Index>(count_values.size()));
    if (core_of_entry != nullptr) *core_of_entry = std::move(local);
  }

  Eigen::VectorXd k_core(int grid_index) const {
    Eigen::VectorXd k(core_dim());
    for (int i = 0; i < core_dim(); ++i) k(i) = gram_(s_core_[i], grid_index);
    return k;
  }

  // D^{-1/2} U diag(lambda^p) U^T D^{1/2} v: the core form of M^p on the
  // range of E_S.
  Eigen::VectorXd apply_m_power(const Eigen::VectorXd& v, double p) const {
    const Eigen::VectorXd w =
        m_vectors_.transpose() * (sqrt_s_counts_.asDiagonal() * v);
    return inv_sqrt_s_counts_.asDiagonal() *
           (m_vectors_ *
            (m_values_floored_.array().pow(p) * w.array()).matrix());
  }

  Eigen::VectorXd apply_s_inverse(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd w =
        s_vectors_.transpose() * (sqrt_s_counts_.asDiagonal() * v);
    return inv_sqrt_s_counts_.asDiagonal() *
           (s_vectors_ * (w.array() / s_values_floored_.array()).matrix());
  }

  const Eigen::MatrixXd& gram_;
  std::vector<int> s_entries_;
  std::vector<int> r_entries_;
  double tau_;

  std::vector<int> s_core_;  // distinct grid indices in first-seen order
  std::vector<int> r_core_;
  Eigen::VectorXd s_counts_;
  Eigen::VectorXd r_counts_;
  std::vector<int> s_core_of_entry_;
  Eigen::VectorXd sqrt_s_counts_;
  Eigen::VectorXd inv_sqrt_s_counts_;
  Eigen::VectorXd sqrt_r_counts_;
  Eigen::MatrixXd k_x_;

  Eigen::MatrixXd m_vectors_;
  Eigen::VectorXd m_values_floored_;
  Eigen::MatrixXd s_vectors_;
  Eigen::VectorXd s_values_floored_;
  Eigen::LDLT<Eigen::MatrixXd> mid_ldlt_;
  double info_gain_ = 0.0;

  std::unordered_map<int, Eigen::VectorXd> psi_cache_;
};

}  // namespace capri::detail
