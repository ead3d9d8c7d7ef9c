#pragma once

#include <cmath>
#include <string>

#include "ogmd/error.hpp"

namespace ogmd {

enum class ScheduleMode { Regret, Tracking };

/// Power-law stepsize triple
///   α_t = t^{−a1}, β_t = t^{−a2}, γ_t = t^{−(1−a2)}   (t ≥ 1),
/// with α_0 = β_0 = γ_0 = 1. Exponent windows are validated at construction,
/// as is the dual-telescoping chain 1/γ_t − 1/γ_{t−1} − β_t ≤ 0 for every
/// t up to the declared horizon. Accessors reject t beyond the horizon.
class StepSchedule {
 public:
  /// Regret regime: 0 < 2·a2 < a1 < 1.
  static StepSchedule regret(double a1, double a2, int horizon) {
    if (!(a2 > 0.0) || !(2.0 * a2 < a1) || !(a1 < 1.0))
      throw ScheduleError("regret schedule needs 0 < 2*a2 < a1 < 1 (got a1=" +
                          std::to_string(a1) + ", a2=" + std::to_string(a2) + ")");
    return StepSchedule(ScheduleMode::Regret, a1, a2, horizon);
  }

  /// Tracking regime for a game stabilizing with gap rates H = O(1/t^p),
  /// K = O(1/t^q). Accepts exponents in either of the two proved windows:
  ///  - convergence of the play sequence:
  ///      0 < b2 < 0.5, 0.5 + b2 < b1 <= 1, b1 + b2 > 1, b1 + p > 1,
  ///      b1 − b2 + q > 1;
  ///  - averaged-iterate rate: 0 < 2·b2 < b1 < 1 and b2 < q.
  static StepSchedule tracking(double b1, double b2, int horizon, double p = 1.0,
                               double q = 1.0) {
    if (!(p > 0.0) || !(q > 0.0))
      throw ScheduleError("tracking schedule needs positive gap rates p, q");
    bool convergence_ok = b2 > 0.0 && b2 < 0.5 && 0.5 + b2 < b1 && b1 <= 1.0 &&
                          b1 + b2 > 1.0 && b1 + p > 1.0 && b1 - b2 + q > 1.0;
    bool averaged_ok = b2 > 0.0 && 2.0 * b2 < b1 && b1 < 1.0 && b2 < q;
    if (!convergence_ok && !averaged_ok)
      throw ScheduleError("tracking exponents (b1=" + std::to_string(b1) +
                          ", b2=" + std::to_string(b2) +
                          ") satisfy neither the convergence nor the averaged-rate window");
    return StepSchedule(ScheduleMode::Tracking, b1, b2, horizon);
  }

  double alpha(int t) const { return value(t, a1_); }
  double beta(int t) const { return value(t, a2_); }
  double gamma(int t) const { return value(t, 1.0 - a2_); }

  int horizon() const { return horizon_; }
  ScheduleMode mode() const { return mode_; }
  double primal_exponent() const { return a1_; }
  double dual_exponent() const { return a2_; }

 private:
  StepSchedule(ScheduleMode mode, double a1, double a2, int horizon)
      : mode_(mode), a1_(a1), a2_(a2), horizon_(horizon) {
    if (horizon < 1) throw ScheduleError("schedule horizon must be >= 1");
    // 1/γ_t − 1/γ_{t−1} − β_t ≤ 0 numerically over the whole horizon.
    double inv_prev = 1.0;  // 1/γ_0
    for (int t = 1; t <= horizon; ++t) {
      double inv_cur = std::pow(static_cast<double>(t), 1.0 - a2_);
      if (inv_cur - inv_prev - beta_unchecked(t) > 1e-12)
        throw ScheduleError("gamma/beta chain violated at t=" + std::to_string(t));
      inv_prev = inv_cur;
    }
  }

  double beta_unchecked(int t) const {
    return std::pow(static_cast<double>(t), -a2_);
  }

  double value(int t, double exponent) const {
    if (t < 0) throw ScheduleError("schedule index must be nonnegative");
    if (t > horizon_)
      throw ScheduleExhaustedError("schedule queried at t=" + std::to_string(t) +
                                   " beyond horizon " + std::to_string(horizon_));
    if (t == 0) return 1.0;
    return std::pow(static_cast<double>(t), -exponent);
  }

  ScheduleMode mode_;
  double a1_, a2_;
  int horizon_;
};

}  // namespace ogmd
