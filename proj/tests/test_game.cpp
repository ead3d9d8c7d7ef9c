#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "ogmd/config.hpp"
#include "ogmd/game.hpp"
#include "ogmd/gne.hpp"
#include "ogmd/rng.hpp"

using ogmd::ActionProfile;
using ogmd::LimitGame;
using ogmd::NashCournotOracle;
using ogmd::QuadraticGameOracle;

namespace {

ActionProfile scalar_profile(const Eigen::VectorXd& values) {
  ActionProfile x;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    Eigen::VectorXd b(1);
    b << values[i];
    x.push_back(b);
  }
  return x;
}

// Test-local oracle for the N-firm limit GNE, covering both the inactive and
// the binding market-capacity case (derived from the stationarity system
// x_i + S = 21 + i/9 − λ with S = Σ x_j and complementary slackness).
Eigen::VectorXd limit_gne_reference(int n) {
  double nn = static_cast<double>(n);
  double sum_firms = nn * (nn + 1.0) / 2.0;
  double s_unconstrained = (21.0 * nn + sum_firms / 9.0) / (nn + 1.0);
  double lambda = 0.0;
  double s = s_unconstrained;
  if (s_unconstrained > 2.0 * nn) {
    s = 2.0 * nn;
    lambda = (21.0 * nn + sum_firms / 9.0 - (nn + 1.0) * s) / nn;
  }
  Eigen::VectorXd x(n);
  for (int firm = 1; firm <= n; ++firm)
    x[firm - 1] = 21.0 + firm / 9.0 - s - lambda;
  return x;
}

QuadraticGameOracle::Spec one_player_quadratic() {
  // J(x) = (x - 3)^2 up to a constant, box [0, 10], non-binding constraint.
  QuadraticGameOracle::Spec spec;
  spec.dims = {1};
  spec.constraint_dim = 1;
  spec.period = 0.0;
  spec.q_mat = {Eigen::MatrixXd::Constant(1, 1, 2.0)};
  spec.q0 = {Eigen::VectorXd::Constant(1, -6.0)};
  spec.q1 = {Eigen::VectorXd::Zero(1)};
  spec.e_mat = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  spec.b0 = {Eigen::VectorXd::Constant(1, 100.0)};
  spec.b1 = {Eigen::VectorXd::Zero(1)};
  spec.lower = {Eigen::VectorXd::Constant(1, 0.0)};
  spec.upper = {Eigen::VectorXd::Constant(1, 10.0)};
  spec.mu_limit = 2.0;
  return spec;
}

QuadraticGameOracle::Spec binding_two_player_quadratic() {
  // J_i = x_i^2 on [-5, 5]^2 with the coupling x_1 + x_2 + 1 <= 0 split as
  // g_i(x_i) = x_i + 1/2.
  QuadraticGameOracle::Spec spec;
  spec.dims = {1, 1};
  spec.constraint_dim = 1;
  spec.period = 0.0;
  Eigen::MatrixXd q1(2, 2), q2(2, 2);
  q1 << 2.0, 0.0, 0.0, 0.0;
  q2 << 0.0, 0.0, 0.0, 2.0;
  spec.q_mat = {q1, q2};
  spec.q0 = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  spec.q1 = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  spec.e_mat = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.0)};
  spec.b0 = {Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, -0.5)};
  spec.b1 = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  spec.lower = {Eigen::VectorXd::Constant(1, -5.0), Eigen::VectorXd::Constant(1, -5.0)};
  spec.upper = {Eigen::VectorXd::Constant(1, 5.0), Eigen::VectorXd::Constant(1, 5.0)};
  spec.mu_limit = 2.0;
  return spec;
}

}  // namespace

TEST_CASE("cost and gradient at the origin match the demand formulas") {
  NashCournotOracle oracle(NashCournotOracle::Variant::Oscillating, 20);
  ActionProfile zero = scalar_profile(Eigen::VectorXd::Zero(20));
  for (int t : {1, 7, 19, 100}) {
    double s = std::sin(t / 12.0);
    CHECK(oracle.cost_value(0, t, zero) == 0.0);
    double expected = (s + 1.0) - (22.0 + 1.0 / 9.0 - 0.5 * s);
    CHECK_THAT(oracle.cost_grad(0, t, zero)[0],
               Catch::Matchers::WithinAbs(expected, 1e-13));
  }
}

TEST_CASE("local constraint is production minus capacity") {
  NashCournotOracle limit(NashCournotOracle::Variant::Limit, 20);
  Eigen::VectorXd x(1);
  x << 5.0;
  CHECK_THAT(limit.constraint_value(3, 1, x)[0], Catch::Matchers::WithinAbs(3.0, 1e-15));

  NashCournotOracle oscillating(NashCournotOracle::Variant::Oscillating, 20);
  for (int t : {1, 9, 33})
    CHECK_THAT(oscillating.constraint_value(0, t, x)[0],
               Catch::Matchers::WithinAbs(5.0 - (2.0 + std::sin(t / 12.0)), 1e-15));
}

TEST_CASE("gradients agree with central differences") {
  NashCournotOracle osc(NashCournotOracle::Variant::Oscillating, 6);
  NashCournotOracle conv(NashCournotOracle::Variant::Converging, 6);
  CHECK(ogmd::finite_difference_check(osc, 20) < 1e-4);
  CHECK(ogmd::finite_difference_check(conv, 20) < 1e-4);
}

TEST_CASE("slater point exists at every round") {
  NashCournotOracle oracle(NashCournotOracle::Variant::Oscillating, 20);
  ActionProfile zero = scalar_profile(Eigen::VectorXd::Zero(20));
  for (int t = 1; t <= 200; ++t)
    CHECK(oracle.coupled_constraint(t, zero)[0] < 0.0);
}

TEST_CASE("costs are midpoint convex in the own action") {
  NashCournotOracle oracle(NashCournotOracle::Variant::Oscillating, 5);
  ogmd::SplitMix64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    int i = static_cast<int>(rng.next_below(5));
    int t = 1 + static_cast<int>(rng.next_below(60));
    ActionProfile x = scalar_profile(Eigen::VectorXd::NullaryExpr(
        5, [&](Eigen::Index) { return rng.uniform(0.0, 30.0); }));
    ActionProfile a = x, b = x, mid = x;
    a[i][0] = rng.uniform(0.0, 30.0);
    b[i][0] = rng.uniform(0.0, 30.0);
    mid[i][0] = 0.5 * (a[i][0] + b[i][0]);
    REQUIRE(oracle.cost_value(i, t, mid) <=
            0.5 * oracle.cost_value(i, t, a) + 0.5 * oracle.cost_value(i, t, b) + 1e-9);
  }
}

TEST_CASE("declared bounds dominate values and gradients") {
  NashCournotOracle oracle(NashCournotOracle::Variant::Oscillating, 20);
  const ogmd::GameBounds& bounds = oracle.bounds();
  ogmd::SplitMix64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    int t = 1 + static_cast<int>(rng.next_below(100));
    ActionProfile x = scalar_profile(Eigen::VectorXd::NullaryExpr(
        20, [&](Eigen::Index) { return rng.uniform(0.0, 30.0); }));
    int i = static_cast<int>(rng.next_below(20));
    REQUIRE(std::abs(oracle.cost_value(i, t, x)) <= bounds.L);
    REQUIRE(oracle.constraint_value(i, t, x[i]).norm() <= bounds.L);
    REQUIRE(x[i].norm() < bounds.L);
    REQUIRE(oracle.cost_grad(i, t, x).norm() <= bounds.M);
    REQUIRE(oracle.constraint_jacobian(i, t, x[i]).norm() <= bounds.M);
  }
}

TEST_CASE("limit pseudo-gradient is strongly monotone with modulus one") {
  NashCournotOracle conv(NashCournotOracle::Variant::Converging, 20);
  LimitGame limit = conv.limit_game();
  ogmd::SplitMix64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::VectorXd a(20), b(20);
    for (int j = 0; j < 20; ++j) {
      a[j] = rng.uniform(0.0, 30.0);
      b[j] = rng.uniform(0.0, 30.0);
    }
    Eigen::VectorXd fa = limit.pseudo_gradient(scalar_profile(a));
    Eigen::VectorXd fb = limit.pseudo_gradient(scalar_profile(b));
    REQUIRE((fa - fb).dot(a - b) >= limit.mu * (a - b).squaredNorm() - 1e-9);
  }
}

TEST_CASE("closed-form GNE formula and its clipping") {
  NashCournotOracle oracle(NashCournotOracle::Variant::Oscillating, 20);
  CHECK(oracle.closed_form_limit_gne(1) == 0.0);
  CHECK_THAT(oracle.closed_form_limit_gne(10), Catch::Matchers::WithinAbs(1.0, 1e-15));
  // Firm 20 near the sine peak has a negative unclipped value.
  double s = std::sin(19.0 / 12.0);
  double xi = 19.0 / 9.0 + (5.0 - 1.0 / 21.0 - 10.0) * s;
  REQUIRE(xi < 0.0);
  CHECK(oracle.closed_form_gne(20, 19) == 0.0);
}

TEST_CASE("known limit GNE satisfies the variational inequality") {
  NashCournotOracle conv(NashCournotOracle::Variant::Converging, 20);
  LimitGame limit = conv.limit_game();
  REQUIRE(limit.known_gne.has_value());
  const ActionProfile& star = *limit.known_gne;
  CHECK(limit.coupled_constraint(star)[0] <= 1e-9);
  Eigen::VectorXd f_star = limit.pseudo_gradient(star);
  Eigen::VectorXd star_stacked = ogmd::stack_profile(star);
  ogmd::SplitMix64 rng(11);
  int accepted = 0;
  while (accepted < 200) {
    Eigen::VectorXd y(20);
    for (int j = 0; j < 20; ++j) y[j] = rng.uniform(0.0, 30.0);
    if (limit.coupled_constraint(scalar_profile(y))[0] > 0.0) continue;
    ++accepted;
    REQUIRE(f_star.dot(y - star_stacked) >= -1e-6);
  }
}

TEST_CASE("brute force matches the closed form on the paper instance") {
  NashCournotOracle conv(NashCournotOracle::Variant::Converging, 20);
  LimitGame limit = conv.limit_game();
  limit.known_gne.reset();  // force the solver
  ActionProfile solved = ogmd::limit_gne_bruteforce(limit, 1e-8);
  for (int firm = 1; firm <= 20; ++firm)
    REQUIRE_THAT(solved[firm - 1][0],
                 Catch::Matchers::WithinAbs(conv.closed_form_limit_gne(firm), 1e-5));
}

TEST_CASE("brute force handles the binding-capacity instance at N=5") {
  // At five firms the unconstrained stationary point exceeds the market
  // capacity, so the paper's formula no longer applies and the dual binds.
  NashCournotOracle conv(NashCournotOracle::Variant::Converging, 5);
  LimitGame limit = conv.limit_game();
  REQUIRE_FALSE(limit.known_gne.has_value());
  ActionProfile solved = ogmd::limit_gne_bruteforce(limit, 1e-9);
  Eigen::VectorXd expected = limit_gne_reference(5);
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    REQUIRE_THAT(solved[i][0], Catch::Matchers::WithinAbs(expected[i], 1e-6));
    total += solved[i][0];
  }
  CHECK_THAT(total, Catch::Matchers::WithinAbs(10.0, 1e-6));
}

TEST_CASE("one-player quadratic recovers its vertex") {
  QuadraticGameOracle oracle(one_player_quadratic());
  LimitGame limit = oracle.limit_game();
  ActionProfile solved = ogmd::limit_gne_bruteforce(limit, 1e-10);
  CHECK_THAT(solved[0][0], Catch::Matchers::WithinAbs(3.0, 1e-7));
}

TEST_CASE("binding coupling splits evenly in the symmetric quadratic game") {
  QuadraticGameOracle oracle(binding_two_player_quadratic());
  LimitGame limit = oracle.limit_game();
  ActionProfile solved = ogmd::limit_gne_bruteforce(limit, 1e-10);
  CHECK_THAT(solved[0][0], Catch::Matchers::WithinAbs(-0.5, 1e-6));
  CHECK_THAT(solved[1][0], Catch::Matchers::WithinAbs(-0.5, 1e-6));

  // Grid-search oracle: for this gradient-field game the variational GNE
  // minimizes ||x||^2 over the constrained box.
  double best = 1e100, bx = 0.0, by = 0.0;
  for (int a = 0; a <= 400; ++a) {
    for (int b = 0; b <= 400; ++b) {
      double x = -5.0 + a * 0.025, y = -5.0 + b * 0.025;
      if (x + y + 1.0 > 0.0) continue;
      if (x * x + y * y < best) {
        best = x * x + y * y;
        bx = x;
        by = y;
      }
    }
  }
  CHECK_THAT(solved[0][0], Catch::Matchers::WithinAbs(bx, 0.03));
  CHECK_THAT(solved[1][0], Catch::Matchers::WithinAbs(by, 0.03));
}

TEST_CASE("brute force requires strong monotonicity") {
  NashCournotOracle osc(NashCournotOracle::Variant::Oscillating, 4);
  CHECK_THROWS_AS(osc.limit_game(), ogmd::ConfigError);
  LimitGame fake;
  fake.oracle = std::make_shared<NashCournotOracle>(NashCournotOracle::Variant::Limit, 4);
  fake.mu = 0.0;
  CHECK_THROWS_AS(ogmd::limit_gne_bruteforce(fake, 1e-6), ogmd::DomainViolationError);
}

TEST_CASE("stabilization gaps decay at the sine rate") {
  NashCournotOracle conv(NashCournotOracle::Variant::Converging, 20);
  LimitGame limit = conv.limit_game();
  for (int t : {1000, 10000}) {
    ogmd::StabilizationGaps gaps = ogmd::stabilization_gaps(conv, limit, t, 64);
    double s = std::abs(std::sin(12.0 / t));
    // The constraint gap is x-independent, so sampling is exact.
    CHECK_THAT(gaps.k, Catch::Matchers::WithinAbs(20.0 * s, 1e-12));
    // The gradient gap is s*(1 + i/2), maximized by the last firm.
    CHECK_THAT(gaps.h_max, Catch::Matchers::WithinAbs(11.0 * s, 1e-12));
  }
  ogmd::StabilizationGaps far = ogmd::stabilization_gaps(conv, limit, 100000000, 16);
  CHECK(far.h_max < 1e-5);
  CHECK(far.k < 1e-5);
}

TEST_CASE("quadratic games validate their coefficients") {
  QuadraticGameOracle::Spec bad = binding_two_player_quadratic();
  bad.q_mat[0](0, 1) = 1.0;  // asymmetric
  CHECK_THROWS_AS(QuadraticGameOracle(bad), ogmd::ConfigError);

  QuadraticGameOracle::Spec negative = binding_two_player_quadratic();
  negative.q_mat[0](0, 0) = -2.0;
  CHECK_THROWS_AS(QuadraticGameOracle(negative), ogmd::ConfigError);

  QuadraticGameOracle oracle(binding_two_player_quadratic());
  CHECK(ogmd::finite_difference_check(oracle, 20) < 1e-4);
  CHECK(oracle.constraints_affine());
}

TEST_CASE("oracle call counters see every evaluation") {
  NashCournotOracle oracle(NashCournotOracle::Variant::Oscillating, 3);
  oracle.reset_call_counts();
  ActionProfile x = scalar_profile(Eigen::VectorXd::Zero(3));
  (void)oracle.cost_value(0, 1, x);
  (void)oracle.cost_grad(1, 1, x);
  (void)oracle.cost_grad(2, 1, x);
  CHECK(oracle.call_counts().cost_value.load() == 1);
  CHECK(oracle.call_counts().cost_grad.load() == 2);
}
