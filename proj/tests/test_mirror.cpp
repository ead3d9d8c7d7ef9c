#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "ogmd/mirror.hpp"
#include "ogmd/rng.hpp"

using ogmd::bregman;
using ogmd::check_triangle;
using ogmd::FeasibleSet;
using ogmd::mirror_step;
using ogmd::MirrorMap;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v[k++] = x;
  return v;
}

Eigen::VectorXd random_simplex_point(ogmd::SplitMix64& rng, int dim) {
  Eigen::VectorXd v(dim);
  double total = 0.0;
  for (int j = 0; j < dim; ++j) {
    v[j] = 1e-3 + rng.next_u01();
    total += v[j];
  }
  return v / total;
}

// Grid-refinement oracle for the 1-D squared-norm inner problem on a box.
double mirror_step_oracle_1d(double x, double g, double alpha, double lo, double hi) {
  auto objective = [&](double y) { return alpha * y * g + (y - x) * (y - x); };
  double best_lo = lo, best_hi = hi;
  for (int level = 0; level < 12; ++level) {
    double best = best_lo, best_val = objective(best_lo);
    for (int k = 0; k <= 200; ++k) {
      double y = best_lo + (best_hi - best_lo) * k / 200.0;
      double val = objective(y);
      if (val < best_val) {
        best_val = val;
        best = y;
      }
    }
    double span = (best_hi - best_lo) / 200.0;
    best_lo = std::max(lo, best - span);
    best_hi = std::min(hi, best + span);
  }
  return 0.5 * (best_lo + best_hi);
}

}  // namespace

TEST_CASE("squared-norm divergence is the full squared distance") {
  MirrorMap map = MirrorMap::squared_norm(2, 10.0);
  CHECK_THAT(bregman(map, vec({1.0, 2.0}), vec({0.0, 0.0})),
             Catch::Matchers::WithinAbs(5.0, 1e-15));
  CHECK(bregman(map, vec({0.3, -0.7}), vec({0.3, -0.7})) == 0.0);
}

TEST_CASE("entropy divergence matches the generalized KL formula") {
  MirrorMap map = MirrorMap::negative_entropy(2);
  double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK_THAT(bregman(map, vec({0.5, 0.5}), vec({0.25, 0.75})),
             Catch::Matchers::WithinAbs(expected, 1e-12));
  CHECK(bregman(map, vec({0.25, 0.75}), vec({0.25, 0.75})) == 0.0);
  CHECK_THROWS_AS(bregman(map, vec({0.0, 1.0}), vec({0.5, 0.5})),
                  ogmd::DomainViolationError);
}

TEST_CASE("strong convexity lower bound holds on random pairs") {
  ogmd::SplitMix64 rng(7);
  MirrorMap sq = MirrorMap::squared_norm(3, 10.0);
  MirrorMap ent = MirrorMap::negative_entropy(3);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd a(3), b(3);
    for (int j = 0; j < 3; ++j) {
      a[j] = rng.uniform(-2.0, 2.0);
      b[j] = rng.uniform(-2.0, 2.0);
    }
    REQUIRE(bregman(sq, a, b) >= sq.mu / 2.0 * (a - b).squaredNorm() - 1e-12);

    Eigen::VectorXd p = random_simplex_point(rng, 3);
    Eigen::VectorXd q = random_simplex_point(rng, 3);
    REQUIRE(bregman(ent, p, q) >= ent.mu / 2.0 * (p - q).squaredNorm() - 1e-12);
  }
}

TEST_CASE("divergence is Lipschitz in the first argument") {
  ogmd::SplitMix64 rng(11);
  FeasibleSet box = FeasibleSet::box(vec({-3.0, -3.0}), vec({3.0, 3.0}));
  MirrorMap sq = MirrorMap::squared_norm(2, box.diameter());
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd x1 = box.sample(rng), x2 = box.sample(rng), z = box.sample(rng);
    double lhs = std::abs(bregman(sq, x1, z) - bregman(sq, x2, z));
    REQUIRE(lhs <= sq.lipschitz_k * (x1 - x2).norm() + 1e-12);
  }
}

TEST_CASE("generalized triangle identity has tiny residual") {
  ogmd::SplitMix64 rng(13);
  MirrorMap sq = MirrorMap::squared_norm(3, 4.0);
  MirrorMap ent = MirrorMap::negative_entropy(3);
  Eigen::VectorXd p = vec({0.2, 0.3, 0.5});
  CHECK(check_triangle(sq, p, p, p) == 0.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd a(3), b(3), c(3);
    for (int j = 0; j < 3; ++j) {
      a[j] = rng.next_u01();
      b[j] = rng.next_u01();
      c[j] = rng.next_u01();
    }
    REQUIRE(std::abs(check_triangle(sq, a, b, c)) < 1e-9);
    REQUIRE(std::abs(check_triangle(ent, random_simplex_point(rng, 3),
                                    random_simplex_point(rng, 3),
                                    random_simplex_point(rng, 3))) < 1e-9);
  }
}

TEST_CASE("box mirror step is the half-gradient clip") {
  MirrorMap map = MirrorMap::squared_norm(1, 30.0);
  FeasibleSet box = FeasibleSet::box1d(0.0, 30.0);
  Eigen::VectorXd next = mirror_step(map, box, vec({10.0}), vec({4.0}), 1.0);
  CHECK_THAT(next[0], Catch::Matchers::WithinAbs(8.0, 1e-15));
  CHECK_THAT(next[0],
             Catch::Matchers::WithinAbs(mirror_step_oracle_1d(10.0, 4.0, 1.0, 0.0, 30.0),
                                        1e-6));

  // Clipping at the boundary.
  Eigen::VectorXd clipped = mirror_step(map, box, vec({1.0}), vec({50.0}), 1.0);
  CHECK(clipped[0] == 0.0);
}

TEST_CASE("zero gradient leaves the point unchanged") {
  MirrorMap sq = MirrorMap::squared_norm(2, 3.0);
  FeasibleSet box = FeasibleSet::box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  Eigen::VectorXd x = vec({0.25, 0.75});
  CHECK((mirror_step(sq, box, x, vec({0.0, 0.0}), 0.5) - x).norm() == 0.0);

  MirrorMap ent = MirrorMap::negative_entropy(2);
  FeasibleSet simplex = FeasibleSet::simplex(2);
  Eigen::VectorXd p = vec({0.25, 0.75});
  CHECK((mirror_step(ent, simplex, p, vec({0.0, 0.0}), 0.5) - p).norm() < 1e-15);
}

TEST_CASE("entropy simplex step is the renormalized multiplicative update") {
  MirrorMap ent = MirrorMap::negative_entropy(2);
  FeasibleSet simplex = FeasibleSet::simplex(2);
  Eigen::VectorXd next =
      mirror_step(ent, simplex, vec({0.5, 0.5}), vec({std::log(2.0), 0.0}), 1.0);
  CHECK_THAT(next[0], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  CHECK_THAT(next[1], Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
}

TEST_CASE("unsupported map-set pairings are rejected") {
  MirrorMap ent = MirrorMap::negative_entropy(2);
  FeasibleSet box = FeasibleSet::box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  CHECK_THROWS_AS(mirror_step(ent, box, vec({0.5, 0.5}), vec({1.0, 0.0}), 1.0),
                  ogmd::NoClosedFormError);
}

TEST_CASE("mirror step optimality against random feasible competitors") {
  ogmd::SplitMix64 rng(17);
  MirrorMap sq2 = MirrorMap::squared_norm(2, 10.0);
  FeasibleSet box = FeasibleSet::box(vec({-1.0, -1.0}), vec({4.0, 4.0}));
  FeasibleSet ball = FeasibleSet::ball(vec({0.5, 0.5}), 2.0);
  FeasibleSet simplex = FeasibleSet::simplex(3, 1.0);
  MirrorMap sq3 = MirrorMap::squared_norm(3, 2.0);
  MirrorMap ent = MirrorMap::negative_entropy(3);

  for (int trial = 0; trial < 100; ++trial) {
    double alpha = rng.uniform(0.05, 2.0);
    Eigen::VectorXd g2(2);
    g2 << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
    Eigen::VectorXd g3(3);
    g3 << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);

    struct Case {
      const MirrorMap* map;
      const FeasibleSet* set;
      Eigen::VectorXd x;
      const Eigen::VectorXd* g;
    };
    Eigen::VectorXd bx = box.sample(rng), bl = ball.sample(rng);
    Eigen::VectorXd sp = random_simplex_point(rng, 3);
    Case cases[] = {{&sq2, &box, bx, &g2},
                    {&sq2, &ball, bl, &g2},
                    {&sq3, &simplex, sp, &g3},
                    {&ent, &simplex, sp, &g3}};
    for (const Case& c : cases) {
      Eigen::VectorXd star = mirror_step(*c.map, *c.set, c.x, *c.g, alpha);
      REQUIRE(c.set->contains(star, 1e-9));
      double star_val = alpha * star.dot(*c.g) + bregman(*c.map, star, c.x);
      for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd y =
            c.set->kind() == FeasibleSet::Kind::Simplex && c.map->kind ==
                ogmd::MirrorKind::NegativeEntropy
                ? random_simplex_point(rng, 3)
                : c.set->sample(rng);
        double y_val = alpha * y.dot(*c.g) + bregman(*c.map, y, c.x);
        REQUIRE(star_val <= y_val + 1e-8);
      }
    }
  }
}

TEST_CASE("feasible sets validate interiors and project correctly") {
  FeasibleSet box = FeasibleSet::box1d(0.0, 30.0);
  box.set_interior(vec({3.0}), 1.5);
  CHECK(box.interior_radius() == 1.5);
  CHECK_THROWS_AS(box.set_interior(vec({0.5}), 1.0), ogmd::RadiusViolationError);

  FeasibleSet simplex = FeasibleSet::simplex(3);
  CHECK_FALSE(simplex.has_interior_ball());
  CHECK_THROWS_AS(simplex.set_interior(vec({0.3, 0.3, 0.4}), 0.1),
                  ogmd::RadiusViolationError);

  ogmd::SplitMix64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd z(3);
    for (int j = 0; j < 3; ++j) z[j] = rng.uniform(-2.0, 2.0);
    Eigen::VectorXd p = FeasibleSet::project_simplex(z, 1.0);
    REQUIRE(simplex.contains(p, 1e-9));
    // Projection optimality against random feasible points.
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd y = random_simplex_point(rng, 3);
      REQUIRE((z - p).squaredNorm() <= (z - y).squaredNorm() + 1e-9);
    }
  }

  FeasibleSet ball = FeasibleSet::ball(vec({1.0, 1.0}), 0.5);
  Eigen::VectorXd far = vec({5.0, 1.0});
  Eigen::VectorXd proj = ball.project(far);
  CHECK_THAT((proj - vec({1.5, 1.0})).norm(), Catch::Matchers::WithinAbs(0.0, 1e-12));
}
