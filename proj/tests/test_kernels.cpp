#include "capri/kernels.hpp"
#include "capri/numerics.hpp"
#include "capri/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace capri;

namespace {

Point make_point(std::initializer_list<double> coords) {
  Point p;
  p.embedding.resize(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (const double c : coords) p.embedding(i++) = c;
  return p;
}

std::vector<Point> random_points(int count, int dim, Rng& rng) {
  std::vector<Point> points(count);
  for (auto& p : points) {
    p.embedding.resize(dim);
    for (int d = 0; d < dim; ++d) p.embedding(d) = rng.uniform01();
  }
  return points;
}

}  // namespace

TEST_CASE("squared exponential analytic values") {
  const KernelSpec se = KernelSpec::squared_exponential(1.0);
  const Point u = make_point({0.0, 0.0});
  CHECK(kernel_eval(se, u, u) == doctest::Approx(1.0));
  const Point v = make_point({1.0, 1.0});  // distance sqrt(2)
  CHECK(kernel_eval(se, u, v) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-12));
}

TEST_CASE("matern 1/2 equals the exponential kernel") {
  const KernelSpec m12 = KernelSpec::matern(0.5, 1.0);
  const Point u = make_point({0.0});
  const Point v = make_point({1.0});
  CHECK(kernel_eval(m12, u, v) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double r = 3.0 * rng.uniform01();
    const Point w = make_point({r});
    CHECK(kernel_eval(m12, u, w) ==
          doctest::Approx(std::exp(-r)).epsilon(1e-12));
  }
}

TEST_CASE("matern smoothness values are validated") {
  CHECK_THROWS_AS(KernelSpec::matern(2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::squared_exponential(0.0), std::invalid_argument);
}

TEST_CASE("kernel_eval rejects mismatched dimensions") {
  const KernelSpec se = KernelSpec::squared_exponential(1.0);
  CHECK_THROWS_AS(kernel_eval(se, make_point({0.0}), make_point({0.0, 1.0})),
                  std::invalid_argument);
}

TEST_CASE("kernel_matrix basics") {
  const KernelSpec se = KernelSpec::squared_exponential(1.0);
  const std::vector<Point> single{make_point({0.3, 0.7})};
  const Eigen::MatrixXd one = kernel_matrix(se, single, single);
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == doctest::Approx(1.0));

  const std::vector<Point> twins{make_point({0.5}), make_point({0.5})};
  const Eigen::MatrixXd twin = kernel_matrix(se, twins);
  CHECK(twin(0, 0) == doctest::Approx(1.0));
  CHECK(twin(0, 1) == doctest::Approx(1.0));
  CHECK(twin(1, 0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(kernel_matrix(se, {}, twins), std::invalid_argument);
}

TEST_CASE("gram matrices are symmetric PSD with bounded diagonal") {
  Rng rng(17);
  const std::vector<KernelSpec> specs{
      KernelSpec::squared_exponential(0.5), KernelSpec::matern(0.5, 0.7),
      KernelSpec::matern(1.5, 0.7), KernelSpec::matern(2.5, 0.7),
      KernelSpec::normalized_linear(3.0)};
  for (const KernelSpec& spec : specs) {
    const std::vector<Point> points = random_points(50, 3, rng);
    const Eigen::MatrixXd gram = kernel_matrix(spec, points);
    CHECK((gram - gram.transpose()).norm() == 0.0);
    CHECK(gram.diagonal().maxCoeff() <= 1.0 + 1e-12);
    const SymEig eig = sym_eig(SymMatrix(gram));
    CHECK(eig.values.minCoeff() >= -1e-8);
  }
}

TEST_CASE("kernel_vector matches kernel_matrix column") {
  Rng rng(29);
  const KernelSpec se = KernelSpec::squared_exponential(0.8);
  const std::vector<Point> s = random_points(6, 2, rng);
  const Point w = make_point({0.25, 0.75});
  const Eigen::VectorXd vec = kernel_vector(se, s, w);
  const Eigen::MatrixXd mat = kernel_matrix(se, s, {w});
  CHECK((vec - mat.col(0)).norm() == 0.0);

  const std::vector<Point> self{w};
  CHECK(kernel_vector(se, self, w)(0) == doctest::Approx(1.0));
}

TEST_CASE("normalized linear kernel and explicit features") {
  const KernelSpec lin = KernelSpec::normalized_linear(1.0);
  const Point e1 = make_point({1.0, 0.0, 0.0});
  const Eigen::VectorXd phi = explicit_features(lin, e1);
  CHECK(phi(0) == doctest::Approx(1.0));
  CHECK(phi(1) == 0.0);

  // Orthogonal embeddings give a zero kernel vector off the matching entry.
  const Point e2 = make_point({0.0, 1.0, 0.0});
  CHECK(kernel_eval(lin, e1, e2) == 0.0);
  CHECK(kernel_eval(lin, e1, e1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(explicit_features(KernelSpec::squared_exponential(1.0), e1),
                  Unsupported);
}

TEST_CASE("explicit features reproduce the kernel exactly") {
  Rng rng(41);
  const KernelSpec lin = KernelSpec::normalized_linear(3.0);
  const std::vector<Point> points = random_points(20, 3, rng);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(explicit_features(lin, points[i]).squaredNorm() <= 1.0 + 1e-12);
    for (std::size_t j = 0; j < points.size(); ++j) {
      const double direct = kernel_eval(lin, points[i], points[j]);
      const double via_features = explicit_features(lin, points[i])
                                      .dot(explicit_features(lin, points[j]));
      CHECK(direct == doctest::Approx(via_features).epsilon(1e-12));
    }
  }
}

TEST_CASE("grid indexing and embeddings") {
  const Grid grid({make_point({0.0}).embedding, make_point({1.0}).embedding},
                  {make_point({0.25}).embedding, make_point({0.5}).embedding,
                   make_point({0.75}).embedding});
  CHECK(grid.num_contexts() == 2);
  CHECK(grid.num_actions() == 3);
  CHECK(grid.num_points() == 6);
  const Point& p = grid.point(1, 2);
  CHECK(p.context_id == 1);
  CHECK(p.action_id == 2);
  CHECK(p.embedding.size() == 2);
  CHECK(p.embedding(0) == 1.0);
  CHECK(p.embedding(1) == 0.75);
  CHECK(grid.flat_index(1, 2) == 5);
  CHECK(grid.max_squared_norm() == doctest::Approx(1.0 + 0.75 * 0.75));
}
