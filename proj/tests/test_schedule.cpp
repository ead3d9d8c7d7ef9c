#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ogmd/schedule.hpp"

using ogmd::ScheduleError;
using ogmd::StepSchedule;

TEST_CASE("regret schedule evaluates the power laws") {
  StepSchedule s = StepSchedule::regret(0.8, 0.3, 100);
  CHECK(s.alpha(0) == 1.0);
  CHECK(s.beta(0) == 1.0);
  CHECK(s.gamma(0) == 1.0);
  CHECK(s.alpha(1) == 1.0);
  CHECK_THAT(s.alpha(10), Catch::Matchers::WithinRel(std::pow(10.0, -0.8), 1e-15));
  CHECK_THAT(s.beta(10), Catch::Matchers::WithinRel(std::pow(10.0, -0.3), 1e-15));
  CHECK_THAT(s.gamma(10), Catch::Matchers::WithinRel(std::pow(10.0, -0.7), 1e-15));
}

TEST_CASE("regret exponent window is enforced") {
  CHECK_THROWS_AS(StepSchedule::regret(0.5, 0.3, 10), ScheduleError);   // a1 <= 2 a2
  CHECK_THROWS_AS(StepSchedule::regret(1.0, 0.3, 10), ScheduleError);   // a1 >= 1
  CHECK_THROWS_AS(StepSchedule::regret(0.8, 0.0, 10), ScheduleError);   // a2 <= 0
  CHECK_THROWS_AS(StepSchedule::regret(0.8, 0.4, 10), ScheduleError);   // 2 a2 = a1
  CHECK_NOTHROW(StepSchedule::regret(0.8, 0.3, 10));
}

TEST_CASE("tracking window accepts both proved regimes") {
  // Convergence regime.
  CHECK_NOTHROW(StepSchedule::tracking(1.0, 0.25, 10, 1.0, 1.0));
  // Averaged-rate regime.
  CHECK_NOTHROW(StepSchedule::tracking(0.6, 0.2, 10, 1.0, 1.0));
  // Neither.
  CHECK_THROWS_AS(StepSchedule::tracking(0.4, 0.3, 10, 1.0, 1.0), ScheduleError);
  CHECK_THROWS_AS(StepSchedule::tracking(1.0, 0.25, 10, 0.0, 1.0), ScheduleError);
  // Convergence regime needs b1 + p > 1 when the averaged window fails.
  CHECK_THROWS_AS(StepSchedule::tracking(1.0, 0.6, 10, 1.0, 1.0), ScheduleError);
}

TEST_CASE("gamma-beta chain holds numerically over the horizon") {
  StepSchedule s = StepSchedule::regret(0.8, 0.3, 5000);
  double inv_prev = 1.0;
  for (int t = 1; t <= 5000; ++t) {
    double inv = 1.0 / s.gamma(t);
    CHECK(inv - inv_prev - s.beta(t) <= 1e-12);
    inv_prev = inv;
  }
}

TEST_CASE("queries beyond the horizon are rejected") {
  StepSchedule s = StepSchedule::regret(0.8, 0.3, 5);
  CHECK_NOTHROW(s.alpha(5));
  CHECK_THROWS_AS(s.alpha(6), ogmd::ScheduleExhaustedError);
  CHECK_THROWS_AS(s.gamma(7), ogmd::ScheduleExhaustedError);
}
