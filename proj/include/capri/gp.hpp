#pragma once

#include "capri/kernels.hpp"

#include <utility>
#include <vector>

namespace capri {

// Query points with their observed rewards; the sensitive dataset D_t.
struct LabeledDataset {
  std::vector<Point> points;
  Eigen::VectorXd rewards;
  double reward_bound = 1.0;  // B with |y_i| <= B for every reward
};

LabeledDataset make_dataset(std::vector<Point> points, Eigen::VectorXd rewards,
                            double reward_bound);

// GP posterior mean k_W(w)^T (tau I + K)^{-1} y; zero-mean prior, so an empty
// dataset predicts 0.
double posterior_mean(const LabeledDataset& data, double tau,
                      const KernelSpec& spec, const Point& w);

// GP posterior variance k(w,w) - k_W(w)^T (tau I + K)^{-1} k_W(w), clamped at
// zero against round-off.
double posterior_variance(const std::vector<Point>& points, double tau,
                          const KernelSpec& spec, const Point& w);

// Information gain 1/2 log det(I + K / tau) of a point set, computed from the
// eigenvalues of the Gram matrix.
double information_gain(const std::vector<Point>& points, double tau,
                        const KernelSpec& spec);

using WeightedPoint = std::pair<Point, double>;

// Empirical covariance-concentration statistic for explicit-feature kernels:
// the spectral norm of Z^{-1/2} R Z^{-1/2} - I with Z = T Lambda + tau I,
// Lambda the exact second-moment matrix of the measure, T = |sample| and
// R = sum_i phi(r_i) phi(r_i)^T + tau I. An empty sample uses R = tau I.
double covariance_concentration_stat(const KernelSpec& spec,
                                     const std::vector<WeightedPoint>& measure,
                                     const std::vector<Point>& sample,
                                     double tau);

}  // namespace capri
