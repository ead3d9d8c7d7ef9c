#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "ogmd/comm_graph.hpp"
#include "ogmd/rng.hpp"

using ogmd::CommGraph;

namespace {

Eigen::MatrixXd lazy_ring4() {
  // 4-node ring, self-weight 1/2, neighbor weights 1/4.
  Eigen::MatrixXd a(4, 4);
  a << 0.5, 0.25, 0.0, 0.25,
       0.25, 0.5, 0.25, 0.0,
       0.0, 0.25, 0.5, 0.25,
       0.25, 0.0, 0.25, 0.5;
  return a;
}

// Dense symmetric eigensolve as the independent sigma oracle.
double sigma_oracle(const Eigen::MatrixXd& a) {
  Eigen::Index n = a.rows();
  Eigen::MatrixXd centered = a - Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("uniform complete graph has sigma zero") {
  CommGraph g = CommGraph::build(Eigen::MatrixXd::Constant(4, 4, 0.25));
  CHECK(g.sigma() == 0.0);
  CHECK(CommGraph::complete(4).sigma() == 0.0);
}

TEST_CASE("lazy ring of four has sigma one half") {
  // Circulant eigenvalues 1/2 + (1/2)cos(2*pi*k/4).
  CommGraph g = CommGraph::build(lazy_ring4());
  CHECK_THAT(g.sigma(), Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(g.sigma(), Catch::Matchers::WithinAbs(sigma_oracle(lazy_ring4()), 1e-12));
}

TEST_CASE("identity matrix is rejected as disconnected") {
  CHECK_THROWS_AS(CommGraph::build(Eigen::MatrixXd::Identity(2, 2)),
                  ogmd::DisconnectedError);
}

TEST_CASE("defective matrices name the failed assumption") {
  Eigen::MatrixXd asym = lazy_ring4();
  asym(0, 1) += 1e-6;
  CHECK_THROWS_AS(CommGraph::build(asym), ogmd::NotSymmetricError);

  Eigen::MatrixXd rows = lazy_ring4();
  rows(0, 0) += 0.1;
  CHECK_THROWS_AS(CommGraph::build(rows), ogmd::NotStochasticError);

  Eigen::MatrixXd zero_diag(2, 2);
  zero_diag << 0.0, 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(CommGraph::build(zero_diag), ogmd::ZeroDiagonalError);

  Eigen::MatrixXd negative = lazy_ring4();
  negative(0, 1) = -0.25;
  negative(1, 0) = -0.25;
  negative(0, 0) = 1.0;
  negative(1, 1) = 1.0;
  CHECK_THROWS_AS(CommGraph::build(negative), ogmd::NotStochasticError);
}

TEST_CASE("named generators build valid graphs") {
  for (int n : {2, 3, 5, 20}) {
    CommGraph ring = CommGraph::ring(n);
    CHECK(ring.sigma() < 1.0);
    CommGraph star = CommGraph::star_metropolis(n);
    CHECK(star.sigma() < 1.0);
    CHECK_THAT(sigma_oracle(ring.weights()), Catch::Matchers::WithinAbs(ring.sigma(), 1e-12));
  }
  CHECK_THROWS_AS(CommGraph::by_name("torus", 4), ogmd::ConfigError);
}

TEST_CASE("mixing keeps constants fixed") {
  CommGraph g = CommGraph::build(lazy_ring4());
  Eigen::VectorXd v(2);
  v << 0.7, 1.3;
  std::vector<Eigen::VectorXd> duals(4, v);
  auto mixed = g.mix_duals(duals);
  for (const auto& out : mixed) CHECK((out - v).norm() < 1e-14);
}

TEST_CASE("uniform averaging on the complete graph") {
  CommGraph g = CommGraph::complete(3);
  Eigen::VectorXd e1(2), e2(2), zero(2);
  e1 << 1, 0;
  e2 << 0, 1;
  zero << 0, 0;
  auto mixed = g.mix_duals({e1, e2, zero});
  for (const auto& out : mixed) {
    CHECK_THAT(out[0], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(out[1], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
  }
}

TEST_CASE("ring mixing matches the matrix-vector product") {
  CommGraph g = CommGraph::build(lazy_ring4());
  Eigen::VectorXd one(1), zero(1);
  one << 1.0;
  zero << 0.0;
  auto mixed = g.mix_duals({one, zero, zero, zero});
  CHECK_THAT(mixed[0][0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(mixed[1][0], Catch::Matchers::WithinAbs(0.25, 1e-15));
  CHECK_THAT(mixed[2][0], Catch::Matchers::WithinAbs(0.0, 1e-15));
  CHECK_THAT(mixed[3][0], Catch::Matchers::WithinAbs(0.25, 1e-15));
}

TEST_CASE("mixing rejects mismatched dual dimensions") {
  CommGraph g = CommGraph::complete(3);
  Eigen::VectorXd a(2), b(3);
  a.setZero();
  b.setZero();
  CHECK_THROWS_AS(g.mix_duals({a, b, a}), ogmd::DimensionMismatchError);
  CHECK_THROWS_AS(g.mix_duals({a, a}), ogmd::DimensionMismatchError);
}

TEST_CASE("mixing preserves the mean and contracts disagreement") {
  ogmd::SplitMix64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    CommGraph g = trial % 2 == 0 ? CommGraph::build(lazy_ring4()) : CommGraph::ring(4);
    const int m = 3;
    std::vector<Eigen::VectorXd> duals;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd v(m);
      for (int j = 0; j < m; ++j) v[j] = rng.uniform(0.0, 5.0);
      duals.push_back(v);
    }
    auto mixed = g.mix_duals(duals);

    Eigen::VectorXd mean_in = Eigen::VectorXd::Zero(m), mean_out = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < 4; ++i) {
      mean_in += duals[i] / 4.0;
      mean_out += mixed[i] / 4.0;
    }
    REQUIRE((mean_in - mean_out).norm() < 1e-12);

    double before = 0.0, after = 0.0;
    for (int i = 0; i < 4; ++i) {
      before += (duals[i] - mean_in).squaredNorm();
      after += (mixed[i] - mean_in).squaredNorm();
    }
    REQUIRE(std::sqrt(after) <= g.sigma() * std::sqrt(before) + 1e-12);

    for (const auto& out : mixed)
      for (int j = 0; j < m; ++j) REQUIRE(out[j] >= 0.0);
  }
}

TEST_CASE("consensus inputs are fixed points") {
  CommGraph g = CommGraph::ring(5);
  Eigen::VectorXd v(2);
  v << 2.0, 3.5;
  std::vector<Eigen::VectorXd> duals(5, v);
  auto mixed = g.mix_duals(duals);
  for (const auto& out : mixed) CHECK((out - v).norm() < 1e-13);
}
