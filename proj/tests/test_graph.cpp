#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "gne/errors.hpp"
#include "gne/graph.hpp"

using namespace gne;

TEST_SUITE("graph") {

TEST_CASE("two-node graph: laplacian, degree and operator norm") {
  Mat w(2, 2);
  w << 0, 1, 1, 0;
  CommGraph g = build_graph(w);
  Mat expect(2, 2);
  expect << 1, -1, -1, 1;
  CHECK((g.laplacian - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.max_degree == doctest::Approx(1.0));
  CHECK(g.op_norm == doctest::Approx(2.0));  // eigenvalues {0, 2}
}

TEST_CASE("unit 3-cycle: L = 2I - W, norm from eigendecomposition") {
  CommGraph g = build_graph(cycle_weights(3));
  Mat expect = 2.0 * Mat::Identity(3, 3) - g.weights;
  CHECK((g.laplacian - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.max_degree == doctest::Approx(2.0));
  // independent eigendecomposition of the assembled Laplacian
  Eigen::SelfAdjointEigenSolver<Mat> es(g.laplacian, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(g.op_norm == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("20-cycle with two chords has max degree 3") {
  CommGraph g = build_graph(
      cycle_plus_chords_weights(20, {{1, 14}, {5, 12}}));
  CHECK(g.max_degree == doctest::Approx(3.0));
  for (int node : {1, 14, 5, 12})
    CHECK(g.neighbor_lists[node].size() == 3);
  CHECK(g.op_norm <= 2.0 * g.max_degree + 1e-9);
  CHECK(g.op_norm >= g.max_degree - 1e-9);
}

TEST_CASE("asymmetric weights are rejected") {
  Mat w(2, 2);
  w << 0, 1, 0.5, 0;
  CHECK_THROWS_AS(build_graph(w), ValidationError);
}

TEST_CASE("nonzero diagonal is rejected") {
  Mat w = Mat::Zero(2, 2);
  w(0, 0) = 0.1;
  CHECK_THROWS_AS(build_graph(w), ValidationError);
}

TEST_CASE("disconnected graph error names the components") {
  Mat w = Mat::Zero(4, 4);
  w(0, 1) = w(1, 0) = 1.0;
  w(2, 3) = w(3, 2) = 1.0;
  try {
    build_graph(w);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("{0,1}") != std::string::npos);
    CHECK(msg.find("{2,3}") != std::string::npos);
  }
}

TEST_CASE("laplacian_apply: consensus input lies in the kernel") {
  CommGraph g = build_graph(cycle_plus_chords_weights(8, {{1, 5}}));
  const int m = 3;
  Vec block(m);
  block << 0.3, -1.2, 4.5;
  Vec stacked(m * 8);
  for (int i = 0; i < 8; ++i) stacked.segment(i * m, m) = block;
  CHECK(laplacian_apply(g, m, stacked).norm() <= 1e-12);
}

TEST_CASE("laplacian_apply on a 2-node graph is the pairwise difference") {
  CommGraph g = build_graph(cycle_weights(2));
  Vec stacked(2);
  stacked << 5.0, 2.0;
  Vec out = laplacian_apply(g, 1, stacked);
  CHECK(out[0] == doctest::Approx(3.0));
  CHECK(out[1] == doctest::Approx(-3.0));
}

TEST_CASE("laplacian_apply matches the dense Kronecker product") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int n : {3, 7, 10}) {
    for (int m : {1, 4, 5}) {
      Mat w = Mat::Zero(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (std::abs(u(rng)) < 1.0) w(i, j) = w(j, i) = std::abs(u(rng)) + 0.1;
      for (int i = 0; i + 1 < n; ++i)
        if (w(i, i + 1) == 0.0) w(i, i + 1) = w(i + 1, i) = 1.0;  // keep it connected
      CommGraph g = build_graph(w);

      Mat kron = Mat::Zero(n * m, n * m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          kron.block(i * m, j * m, m, m) = g.laplacian(i, j) * Mat::Identity(m, m);

      Vec stacked(n * m);
      for (int k = 0; k < stacked.size(); ++k) stacked[k] = u(rng);
      Vec blockwise = laplacian_apply(g, m, stacked);
      CHECK((blockwise - kron * stacked).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("built graphs satisfy the spectral sandwich") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(rng() % 9);
    Mat w = cycle_weights(n, u(rng));
    if (n > 4 && trial % 2 == 0) w(0, n / 2) = w(n / 2, 0) = u(rng);
    CommGraph g = build_graph(w);
    CHECK((g.laplacian * Vec::Ones(n)).norm() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(g.laplacian, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    CHECK(g.op_norm >= g.max_degree * (1.0 - 1e-9));
    CHECK(g.op_norm <= 2.0 * g.max_degree * (1.0 + 1e-9));
  }
}

TEST_CASE("spectral norm: identity, diagonal, cycle laplacian") {
  CHECK(spectral_norm(Mat::Identity(5, 5)) == doctest::Approx(1.0));
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = -5.0;
  CHECK(spectral_norm(d) == doctest::Approx(5.0));
  CommGraph g = build_graph(cycle_weights(3));
  CHECK(spectral_norm(g.laplacian) == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("spectral norm of a linear operator via power iteration") {
  Vec diag(3);
  diag << 1.0, -2.0, 3.0;
  LinearOperator op;
  op.rows = op.cols = 3;
  op.apply = [diag](const Vec& v) -> Vec { return diag.asDiagonal() * v; };
  op.apply_adjoint = op.apply;
  CHECK(spectral_norm(op) == doctest::Approx(3.0).epsilon(1e-6));
}

}  // TEST_SUITE
