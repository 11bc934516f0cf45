#include "capri/bandit.hpp"
#include "capri/detail/epoch_solver.hpp"
#include "capri/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace capri;

namespace {

InstanceParams small_params() {
  InstanceParams params;
  params.num_contexts = 3;
  params.num_actions = 4;
  params.context_dim = 1;
  params.action_dim = 1;
  params.reward_centers = 5;
  params.reward_bound = 1.0;
  params.noise_level = 1.0;
  return params;
}

RunConfig small_run(long horizon) {
  RunConfig config;
  config.horizon = horizon;
  config.tau = 1.0;
  config.delta_err = 0.05;
  config.width_scale = 1.0;
  return config;
}

// One context with orthonormal action embeddings under the linear kernel:
// predictions equal the weight entries, which makes prune outcomes exact.
struct OrthogonalBench {
  Grid grid;
  KernelSpec spec;

  OrthogonalBench()
      : grid({Eigen::VectorXd::Zero(1)},
             {basis(0), basis(1), basis(2)}),
        spec(KernelSpec::normalized_linear(1.0)) {}

  static Eigen::VectorXd basis(int i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e(i) = 1.0;
    return e;
  }

  PrivateEstimator estimator(std::initializer_list<double> values) const {
    PrivateEstimator est;
    est.s = {grid.point(0, 0), grid.point(0, 1), grid.point(0, 2)};
    est.spec = spec;
    est.weights.resize(3);
    Eigen::Index i = 0;
    for (const double v : values) est.weights(i++) = v;
    return est;
  }
};

}  // namespace

TEST_CASE("beta: monotone in delta, B = 0 value, linear B scaling") {
  CHECK(beta(0.05, 1.0, 1.0, 1024.0) > beta(0.1, 1.0, 1.0, 1024.0));
  CHECK(beta(1e-4, 0.0, 1.0, 1024.0) ==
        doctest::Approx(4.898979485566356).epsilon(1e-12));

  const double base = beta(0.01, 1.0, 0.5, 256.0) - std::sqrt(24.0 * 0.5);
  const double doubled = beta(0.01, 2.0, 0.5, 256.0) - std::sqrt(24.0 * 0.5);
  CHECK(doubled == doctest::Approx(2.0 * base).epsilon(1e-12));
  CHECK_THROWS_AS(beta(1.5, 1.0, 1.0, 16.0), std::invalid_argument);
}

TEST_CASE("beta1: decay in epsilon, plug value, ldp scaling") {
  CHECK(beta1(1e9, 0.1, 0.1, 1.0, 1024.0) < 1e-6);

  const double e = std::exp(1.0);
  CHECK(beta1(8.0, 1.25 / e, 3.0 / e, 1.0, e) ==
        doctest::Approx(1.0).epsilon(1e-12));

  const double base = beta1(2.0, 0.1, 0.01, 1.0, 256.0);
  CHECK(beta1_ldp(4.0, 2.0, 0.1, 0.01, 1.0, 256.0) == 2.0 * base);
  CHECK_THROWS_AS(beta1(1.0, 0.9999, 0.1, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("confidence width arithmetic") {
  CHECK(confidence_width(3.0, 7.0, 0.0) == 0.0);
  CHECK(confidence_width(2.0, 3.0, 0.25) == doctest::Approx(1.75));
  CHECK(confidence_width(2.0, 3.0, 0.25) >
        confidence_width(2.0, 3.0, 0.16));
  CHECK_THROWS_AS(confidence_width(1.0, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("prune applies the elimination rule") {
  const OrthogonalBench bench;
  const ActiveSets full = ActiveSets::full(1, 3);

  const PrivateEstimator est = bench.estimator({1.0, 0.9, 0.5});
  const ActiveSets kept = prune(est, bench.grid, full, 0.1);
  CHECK(kept.actions[0] == std::vector<int>{0, 1});

  // A width at least the estimate range eliminates nothing.
  const ActiveSets all = prune(est, bench.grid, full, 0.125);
  CHECK(all.actions[0] == std::vector<int>{0, 1, 2});

  // Zero width keeps exact argmax ties only.
  const PrivateEstimator tied = bench.estimator({0.7, 0.7, 0.1});
  const ActiveSets argmax_only = prune(tied, bench.grid, full, 0.0);
  CHECK(argmax_only.actions[0] == std::vector<int>{0, 1});

  CHECK_THROWS_AS(prune(est, bench.grid, full, -0.1), std::invalid_argument);
}

TEST_CASE("projection sampling: determinism, size, frequencies") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 404);
  const ActiveSets active = ActiveSets::full(3, 4);

  Rng a(5);
  Rng b(5);
  const ProjectionPair first =
      sample_projection_sets(instance.kappa, instance.grid, active, 32, 1.0, a);
  const ProjectionPair second =
      sample_projection_sets(instance.kappa, instance.grid, active, 32, 1.0, b);
  REQUIRE(first.s.size() == 32);
  REQUIRE(first.r.size() == 32);
  for (int i = 0; i < 32; ++i) {
    CHECK(first.s[i].context_id == second.s[i].context_id);
    CHECK(first.s[i].action_id == second.s[i].action_id);
    CHECK(first.r[i].context_id == second.r[i].context_id);
    CHECK(first.r[i].action_id == second.r[i].action_id);
  }

  // Singleton context and action collapses every draw to the same point.
  InstanceParams tiny = small_params();
  tiny.num_contexts = 1;
  tiny.num_actions = 1;
  const Instance point_instance = make_instance(se, tiny, 9);
  Rng c(1);
  const ProjectionPair collapsed = sample_projection_sets(
      point_instance.kappa, point_instance.grid, ActiveSets::full(1, 1), 8,
      1.0, c);
  for (const Point& p : collapsed.s) {
    CHECK(p.context_id == 0);
    CHECK(p.action_id == 0);
  }

  // Context frequencies across a large draw match kappa.
  Eigen::VectorXd probs(3);
  probs << 0.5, 0.3, 0.2;
  InstanceParams skew = small_params();
  skew.context_probabilities = probs;
  const Instance skewed = make_instance(se, skew, 11);
  Rng d(2);
  const int draws = 10000;
  const ProjectionPair big = sample_projection_sets(
      skewed.kappa, skewed.grid, ActiveSets::full(3, 4), draws, 1.0, d);
  std::vector<int> counts(3, 0);
  for (const Point& p : big.s) ++counts[p.context_id];
  for (int k = 0; k < 3; ++k) {
    const double p = probs(k);
    const double sigma = std::sqrt(p * (1.0 - p) / draws);
    CHECK(std::abs(static_cast<double>(counts[k]) / draws - p) <=
          3.0 * sigma);
  }
}

TEST_CASE("epoch solver matches the dense operator forms") {
  Rng rng(808);
  const KernelSpec se = KernelSpec::squared_exponential(0.45);
  const Instance instance = make_instance(se, small_params(), 777);
  const Eigen::MatrixXd gram =
      kernel_matrix(instance.kernel, instance.grid.all_points());

  // Multisets with heavy duplication.
  std::vector<int> s_idx, r_idx;
  for (int i = 0; i < 14; ++i) {
    s_idx.push_back(rng.uniform_index(instance.grid.num_points()));
    r_idx.push_back(rng.uniform_index(instance.grid.num_points()));
  }
  detail::EpochSolver solver(gram, s_idx, r_idx, 0.8);

  std::vector<Point> s_points, r_points;
  for (const int g : s_idx) s_points.push_back(instance.grid.all_points()[g]);
  for (const int g : r_idx) r_points.push_back(instance.grid.all_points()[g]);
  const ProjectionPair pair = make_projection_pair(s_points, r_points, 0.8);

  // Projected variance agrees with the dense Gram-form at every grid point.
  for (int g = 0; g < instance.grid.num_points(); ++g) {
    const Point& w = instance.grid.all_points()[g];
    CHECK(solver.projected_variance(g) ==
          doctest::Approx(projected_variance(pair, instance.kernel, w))
              .epsilon(1e-9));
  }

  // Per-point statistic agrees after expanding the core coordinates.
  for (int probe = 0; probe < 6; ++probe) {
    const int g = rng.uniform_index(instance.grid.num_points());
    const double y = 2.0 * rng.uniform01() - 1.0;
    const Eigen::VectorXd dense = per_point_statistic(
        pair, instance.kernel, instance.grid.all_points()[g], y);
    const Eigen::VectorXd collapsed =
        y * solver.expand(solver.statistic_core(g));
    CHECK((dense - collapsed).norm() < 1e-9);
    CHECK(solver.statistic_norm(solver.statistic_core(g)) ==
          doctest::Approx(per_point_statistic(pair, instance.kernel,
                                              instance.grid.all_points()[g],
                                              1.0)
                              .norm())
              .epsilon(1e-9));
  }

  // Predictions with noise agree with the dense estimator weights.
  const int n = static_cast<int>(s_idx.size());
  Eigen::VectorXd y(n);
  std::vector<Point> data_points;
  std::vector<int> data_idx;
  for (int i = 0; i < n; ++i) {
    const int g = rng.uniform_index(instance.grid.num_points());
    data_idx.push_back(g);
    data_points.push_back(instance.grid.all_points()[g]);
    y(i) = 2.0 * rng.uniform01() - 1.0;
  }
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(solver.core_dim());
  for (int i = 0; i < n; ++i) {
    gamma += y(i) * solver.statistic_core(data_idx[i]);
  }
  const Eigen::VectorXd zeta = solver.reduce(z);

  const Eigen::MatrixXd k_sr = kernel_matrix(instance.kernel, s_points,
                                             r_points);
  const Eigen::MatrixXd m_inv_sqrt =
      inv_sqrt_psd(SymMatrix(k_sr * k_sr.transpose() +
                             0.8 * kernel_matrix(instance.kernel, s_points)))
          .mat();
  const Eigen::VectorXd dense_weights =
      m_inv_sqrt *
      (m_inv_sqrt * (kernel_matrix(instance.kernel, s_points, data_points) * y) +
       z);
  for (int g = 0; g < instance.grid.num_points(); ++g) {
    const Point& w = instance.grid.all_points()[g];
    const double dense_pred =
        kernel_vector(instance.kernel, s_points, w).dot(dense_weights);
    CHECK(solver.predict(g, gamma, zeta) ==
          doctest::Approx(dense_pred).epsilon(1e-8));
  }

  // Spectrum bookkeeping: info gain matches the dense Gram computation.
  CHECK(solver.info_gain() ==
        doctest::Approx(information_gain(s_points, 0.8, instance.kernel))
            .epsilon(1e-9));
}

TEST_CASE("run: structure of epochs and log for T = 4") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 21);
  PrivacyParams nonprivate;
  nonprivate.mode = PrivacyMode::kNonPrivate;
  Rng rng(31);
  const RegretLog log = run(instance, instance.kernel, nonprivate,
                            small_run(4), rng);
  REQUIRE(log.steps.size() == 4);
  REQUIRE(log.epochs.size() == 2);
  CHECK(log.epochs[0].length == 2);
  CHECK(log.epochs[0].steps == 2);
  CHECK(log.epochs[0].completed);
  CHECK(log.epochs[1].length == 4);
  CHECK(log.epochs[1].steps == 2);
  CHECK_FALSE(log.epochs[1].completed);
  CHECK(log.steps[0].epoch == 1);
  CHECK(log.steps[3].epoch == 2);
  for (const StepRecord& step : log.steps) {
    CHECK(step.inst_regret >= -1e-12);
    CHECK(std::abs(step.reward) <= 1.0);
  }
  CHECK(log.total_noise_vector_draws == 0);
}

TEST_CASE("run: determinism and trajectory sharing across noise modes") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 77);

  PrivacyParams jdp;
  jdp.mode = PrivacyMode::kJdp;
  jdp.epsilon = 1.0;
  jdp.delta = 0.1;
  jdp.horizon = 64;

  Rng a(5);
  Rng b(5);
  const RegretLog first = run(instance, instance.kernel, jdp, small_run(64), a);
  const RegretLog second =
      run(instance, instance.kernel, jdp, small_run(64), b);
  REQUIRE(first.steps.size() == second.steps.size());
  for (std::size_t i = 0; i < first.steps.size(); ++i) {
    CHECK(first.steps[i].context_id == second.steps[i].context_id);
    CHECK(first.steps[i].action_id == second.steps[i].action_id);
    CHECK(first.steps[i].reward == second.steps[i].reward);
    CHECK(first.steps[i].inst_regret == second.steps[i].inst_regret);
  }

  // Epoch-one trajectories agree across privacy modes: noise draws come from
  // a dedicated stream and actions never depend on rewards within an epoch.
  PrivacyParams nonprivate;
  nonprivate.mode = PrivacyMode::kNonPrivate;
  Rng c(5);
  const RegretLog clean =
      run(instance, instance.kernel, nonprivate, small_run(64), c);
  const long first_epoch = first.epochs[0].steps;
  for (long i = 0; i < first_epoch; ++i) {
    CHECK(first.steps[i].context_id == clean.steps[i].context_id);
    CHECK(first.steps[i].action_id == clean.steps[i].action_id);
  }
}

TEST_CASE("run: noise draw schedule under each mode") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 99);

  RunConfig config = small_run(1 << 10);

  PrivacyParams jdp;
  jdp.mode = PrivacyMode::kJdp;
  jdp.epsilon = 1.0;
  jdp.delta = 0.1;
  jdp.horizon = config.horizon;
  Rng a(1);
  const RegretLog jdp_log = run(instance, instance.kernel, jdp, config, a);
  // T = 1024: epochs 32, 64, 128, 256, 512 complete and prune; the sixth is
  // truncated at 32 steps, so exactly five epoch-noise vectors are drawn.
  long completed = 0;
  for (const EpochRecord& e : jdp_log.epochs) {
    if (e.completed) ++completed;
  }
  CHECK(completed == 5);
  CHECK(jdp_log.total_noise_vector_draws == 5);
  CHECK(jdp_log.epochs.size() == 6);
  CHECK(jdp_log.epochs.back().steps == 32);

  PrivacyParams ldp = jdp;
  ldp.mode = PrivacyMode::kLdp;
  Rng b(1);
  const RegretLog ldp_log = run(instance, instance.kernel, ldp, config, b);
  CHECK(ldp_log.total_noise_vector_draws == (1 << 10));
  for (const EpochRecord& e : ldp_log.epochs) {
    CHECK(e.noise_draws == e.steps);
  }

  PrivacyParams nonprivate;
  nonprivate.mode = PrivacyMode::kNonPrivate;
  Rng c(1);
  const RegretLog clean_log =
      run(instance, instance.kernel, nonprivate, config, c);
  CHECK(clean_log.total_noise_vector_draws == 0);
}

TEST_CASE("run: active supports stay nested and nonempty") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 4242);
  PrivacyParams nonprivate;
  nonprivate.mode = PrivacyMode::kNonPrivate;
  RunConfig config = small_run(256);
  config.record_projection_sets = true;
  config.width_scale = 1e-3;  // forces real pruning at this scale
  Rng rng(8);
  const RegretLog log =
      run(instance, instance.kernel, nonprivate, config, rng);

  REQUIRE(log.epochs.size() >= 2);
  std::set<int> previous;
  for (std::size_t e = 0; e < log.epochs.size(); ++e) {
    const std::set<int> support(log.epochs[e].support_grid_indices.begin(),
                                log.epochs[e].support_grid_indices.end());
    CHECK(!support.empty());
    if (e > 0) {
      for (const int g : support) CHECK(previous.count(g) == 1);
    }
    // Every context keeps at least one action.
    std::set<int> contexts;
    for (const int g : support) contexts.insert(g / 4);
    CHECK(contexts.size() == 3);
    previous = support;
  }
}

TEST_CASE("run: oracle width never eliminates the true best action") {
  Rng seed_rng(512);
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    InstanceParams params = small_params();
    params.noise_level = 0.0;
    const Instance instance = make_instance(se, params, seed_rng.draw_raw());
    PrivacyParams nonprivate;
    nonprivate.mode = PrivacyMode::kNonPrivate;
    RunConfig config = small_run(128);
    config.oracle_width = true;
    config.record_projection_sets = true;
    Rng rng(seed_rng.draw_raw());
    const RegretLog log =
        run(instance, instance.kernel, nonprivate, config, rng);

    std::vector<int> all_actions(4);
    std::iota(all_actions.begin(), all_actions.end(), 0);
    for (int c = 0; c < 3; ++c) {
      const int best =
          best_action(instance.reward, instance.grid, c, all_actions)
              .action_id;
      const int flat = instance.grid.flat_index(c, best);
      for (const EpochRecord& e : log.epochs) {
        CHECK(std::count(e.support_grid_indices.begin(),
                         e.support_grid_indices.end(), flat) == 1);
      }
    }
  }
}

TEST_CASE("uniform baseline run") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 3);
  Rng rng(4);
  const RegretLog log = uniform_baseline_run(instance, 100, rng);
  REQUIRE(log.steps.size() == 100);
  for (const StepRecord& step : log.steps) {
    CHECK(step.inst_regret >= 0.0);
    CHECK(std::abs(step.reward) <= 1.0);
  }
}

TEST_CASE("run rejects bad arguments") {
  const KernelSpec se = KernelSpec::squared_exponential(0.5);
  const Instance instance = make_instance(se, small_params(), 3);
  PrivacyParams nonprivate;
  Rng rng(1);
  CHECK_THROWS_AS(
      run(instance, instance.kernel, nonprivate, small_run(3), rng),
      std::invalid_argument);
  RunConfig bad = small_run(16);
  bad.tau = 0.0;
  CHECK_THROWS_AS(run(instance, instance.kernel, nonprivate, bad, rng),
                  std::invalid_argument);
}
