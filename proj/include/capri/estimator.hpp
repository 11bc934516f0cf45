#pragma once

#include "capri/gp.hpp"
#include "capri/kernels.hpp"
#include "capri/rng.hpp"

#include <vector>

namespace capri {

enum class PrivacyMode { kNonPrivate, kJdp, kLdp };

struct PrivacyParams {
  PrivacyMode mode = PrivacyMode::kNonPrivate;
  double epsilon = 1.0;   // privacy budget
  double delta = 1e-4;    // privacy failure probability
  long horizon = 2;       // T, enters the noise calibration through log T

  friend bool operator==(const PrivacyParams&, const PrivacyParams&) = default;
};

// The two independent i.i.d. copies of the query set: S is the projection
// basis, R the data-independent covariance surrogate. Both are drawn before
// the epoch's observations arrive, which is what keeps them independent of
// the rewards they privatize.
struct ProjectionPair {
  std::vector<Point> s;
  std::vector<Point> r;
  double tau = 1.0;
};

ProjectionPair make_projection_pair(std::vector<Point> s, std::vector<Point> r,
                                    double tau);

// Projected kernel-ridge estimator: prediction at w is k_S(w) . weights.
struct PrivateEstimator {
  std::vector<Point> s;
  KernelSpec spec;
  Eigen::VectorXd weights;
  double sigma0 = 0.0;
  long noise_draw_count = 0;  // 1 under JDP, |dataset| under LDP, 0 otherwise
};

// Projected posterior variance
//   sigma~^2(w) = (k(w,w) - k_S(w)^T V k_S(w)) / tau,
//   V = K_SS^{-1} K_SR (tau I + K_RS K_SS^{-1} K_SR)^{-1} K_RS K_SS^{-1}.
// Singular K_SS is handled by the eigenvalue floor.
double projected_variance(const ProjectionPair& pair, const KernelSpec& spec,
                          const Point& w);

// Exhaustive maximum of projected_variance over the finite support.
double max_projected_variance(const ProjectionPair& pair,
                              const KernelSpec& spec,
                              const std::vector<Point>& support);

// Gaussian-mechanism scale
//   sigma_0 = sigma_max * (4 B log T / eps) * sqrt(log(1.25 log T / delta_dp))
// with natural logs. Requires 1.25 log T / delta_dp > 1.
double noise_scale(double sigma_max, double reward_bound, double horizon,
                   double epsilon, double delta_dp);

// Per-observation statistic y * M^{-1/2} k_S(w) with M = K_SR K_RS + tau K_SS.
// Its l2 norm is at most |y| * sigma~(w), which is what bounds the
// sensitivity of the whole sum to any single record.
Eigen::VectorXd per_point_statistic(const ProjectionPair& pair,
                                    const KernelSpec& spec, const Point& w,
                                    double y);

// Batch assembly: weights = M^{-1/2}(sum_t y_t M^{-1/2} k_S(w_t) + z) with a
// single noise vector z ~ N(0, sigma_0^2 I). Accepts JDP or NonPrivate mode
// (the latter adds no noise); rejects LDP.
PrivateEstimator assemble_jdp(const ProjectionPair& pair,
                              const KernelSpec& spec,
                              const LabeledDataset& data,
                              const PrivacyParams& privacy, double sigma_max,
                              Rng& rng);

// Streaming assembly: each per-point statistic is noised independently before
// accumulation, one draw per record, so only the privatized uploads ever
// enter the running sum. Accepts LDP or NonPrivate mode; rejects JDP.
PrivateEstimator assemble_ldp(const ProjectionPair& pair,
                              const KernelSpec& spec,
                              const LabeledDataset& data,
                              const PrivacyParams& privacy, double sigma_max,
                              Rng& rng);

double predict(const PrivateEstimator& estimator, const Point& w);

// Non-private projected mean k_S(w)^T (K_SR K_RS + tau K_SS)^{-1} K_SW y;
// the kernel-trick form of the feature-space projected regression.
double nonprivate_projected_mean(const LabeledDataset& data,
                                 const ProjectionPair& pair,
                                 const KernelSpec& spec, const Point& w);

}  // namespace capri
