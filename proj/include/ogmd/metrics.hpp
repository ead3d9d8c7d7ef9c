#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/comm_graph.hpp"
#include "ogmd/error.hpp"
#include "ogmd/game.hpp"
#include "ogmd/gne.hpp"
#include "ogmd/mirror.hpp"
#include "ogmd/trajectory.hpp"

namespace ogmd {

/// Best fixed action in hindsight for one player and horizon, together with
/// the flag marking the empty-intersection fallback to Ω_i (in which case the
/// reported regret upper-bounds the definition).
struct ComparatorResult {
  Eigen::VectorXd point;
  bool fallback = false;
};

namespace detail {

/// Feasible region of the hindsight comparator: the player's own set
/// intersected with the per-round affine constraints
///   g_{i,t}(x) ≤ −Σ_{j≠i} g_{j,t}(x_{j,t}).
/// Axis-aligned rows tighten a running box; general rows are kept as
/// halfspaces (deduplicated by normal, keeping the tightest offset).
struct ComparatorRegion {
  const FeasibleSet* base = nullptr;
  Eigen::VectorXd lower, upper;                           // box part (Box sets)
  std::vector<std::pair<Eigen::VectorXd, double>> cuts;   // a·x ≤ b
  bool box_like = false;
  bool empty = false;

  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    if (cuts.empty()) return project_base(x);
    // Dykstra over the base set and each halfspace.
    Eigen::VectorXd y = project_base(x);
    std::vector<Eigen::VectorXd> increments(cuts.size() + 1,
                                            Eigen::VectorXd::Zero(x.size()));
    for (int sweep = 0; sweep < 512; ++sweep) {
      Eigen::VectorXd y_before = y;
      for (std::size_t k = 0; k <= cuts.size(); ++k) {
        Eigen::VectorXd z = y + increments[k];
        Eigen::VectorXd proj;
        if (k == cuts.size()) {
          proj = project_base(z);
        } else {
          const auto& [a, b] = cuts[k];
          double overshoot = a.dot(z) - b;
          proj = overshoot > 0.0 ? Eigen::VectorXd(z - (overshoot / a.squaredNorm()) * a)
                                 : z;
        }
        increments[k] = z - proj;
        y = proj;
      }
      if ((y - y_before).norm() <= 1e-13 * std::max(1.0, y.norm())) break;
    }
    return y;
  }

  bool contains(const Eigen::VectorXd& x, double tol) const {
    if (!base->contains(x, tol)) return false;
    if (box_like &&
        (((x - lower).array() < -tol).any() || ((upper - x).array() < -tol).any()))
      return false;
    for (const auto& [a, b] : cuts)
      if (a.dot(x) > b + tol) return false;
    return true;
  }

 private:
  Eigen::VectorXd project_base(const Eigen::VectorXd& x) const {
    if (box_like) return x.cwiseMax(lower).cwiseMin(upper);
    return base->project(x);
  }
};

inline ComparatorRegion build_comparator_region(const TrajectoryLog& log,
                                                const GameOracle& oracle, int i, int horizon) {
  if (!oracle.constraints_affine())
    throw NoClosedFormError(
        "hindsight comparator requires affine local constraint maps");
  const auto& set = oracle.feasible_sets()[static_cast<std::size_t>(i)];
  const int ni = set.dimension();
  const int m = oracle.constraint_dim();

  ComparatorRegion region;
  region.base = &set;
  region.box_like = set.kind() == FeasibleSet::Kind::Box;
  if (region.box_like) {
    region.lower = set.box_lower();
    region.upper = set.box_upper();
  }

  // Affine pieces of g_{i,t}: row k is a_{t,k}·x + c_{t,k} with the Jacobian
  // column as gradient and the offset recovered at the interior point.
  const Eigen::VectorXd x0 = set.interior_point();
  for (int t = 1; t <= horizon; ++t) {
    const TrajectoryRound& r = log.round(t);
    Eigen::MatrixXd jac = oracle.constraint_jacobian(i, t, x0);  // ni x m
    Eigen::VectorXd g0 = oracle.constraint_value(i, t, x0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < oracle.n_players(); ++j)
      if (j != i) rhs -= r.constraints[static_cast<std::size_t>(j)];
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd a = jac.col(k);
      double b = rhs[k] - (g0[k] - a.dot(x0));
      int nonzero = -1;
      bool axis_aligned = true;
      for (int j = 0; j < ni; ++j) {
        if (std::abs(a[j]) > 1e-12) {
          if (nonzero >= 0) {
            axis_aligned = false;
            break;
          }
          nonzero = j;
        }
      }
      if (axis_aligned && nonzero < 0) {
        if (b < -1e-12) region.empty = true;  // 0·x ≤ b with b < 0
        continue;
      }
      if (axis_aligned && region.box_like) {
        double coef = a[nonzero];
        if (coef > 0.0)
          region.upper[nonzero] = std::min(region.upper[nonzero], b / coef);
        else
          region.lower[nonzero] = std::max(region.lower[nonzero], b / coef);
        continue;
      }
      // Deduplicate by normal direction; keep the tightest offset.
      bool merged = false;
      for (auto& [an, bn] : region.cuts) {
        if ((an - a).norm() <= 1e-12 * std::max(1.0, a.norm())) {
          bn = std::min(bn, b);
          merged = true;
          break;
        }
      }
      if (!merged) region.cuts.emplace_back(a, b);
    }
  }

  if (region.box_like && ((region.upper - region.lower).array() < -1e-12).any())
    region.empty = true;
  if (!region.empty && !region.cuts.empty()) {
    Eigen::VectorXd probe = region.project(set.interior_point());
    if (!region.contains(probe, 1e-7)) region.empty = true;
  }
  return region;
}

/// Accumulated cost of player i over the played profiles with its own block
/// substituted; gradient accumulates the partial oracle gradients.
class AccumulatedCost {
 public:
  AccumulatedCost(const TrajectoryLog& log, const GameOracle& oracle, int i, int horizon)
      : log_(log), oracle_(oracle), i_(i), horizon_(horizon) {
    workspace_.resize(static_cast<std::size_t>(oracle.n_players()));
    for (int j = 0; j < oracle.n_players(); ++j)
      workspace_[static_cast<std::size_t>(j)] =
          Eigen::VectorXd::Zero(oracle.action_dims()[static_cast<std::size_t>(j)]);
  }

  double value(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (int t = 1; t <= horizon_; ++t) {
      load_profile(t, x);
      total += oracle_.cost_value(i_, t, workspace_);
    }
    return total;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (int t = 1; t <= horizon_; ++t) {
      load_profile(t, x);
      g += oracle_.cost_grad(i_, t, workspace_);
    }
    return g;
  }

 private:
  void load_profile(int t, const Eigen::VectorXd& x) const {
    const ActionProfile& played = log_.played(t);
    for (std::size_t j = 0; j < workspace_.size(); ++j) workspace_[j] = played[j];
    workspace_[static_cast<std::size_t>(i_)] = x;
  }

  const TrajectoryLog& log_;
  const GameOracle& oracle_;
  int i_;
  int horizon_;
  mutable ActionProfile workspace_;
};

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking;
/// stops at first-order residual ‖x − P(x − ∇c(x))‖ ≤ tol.
inline Eigen::VectorXd minimize_projected(const AccumulatedCost& cost,
                                          const ComparatorRegion& region,
                                          Eigen::VectorXd x, double tol, int max_iters) {
  x = region.project(x);
  Eigen::VectorXd grad = cost.gradient(x);
  double fx = cost.value(x);
  double step = 1.0 / std::max(1.0, grad.norm());
  for (int iter = 0; iter < max_iters; ++iter) {
    if ((x - region.project(x - grad)).norm() <= tol) return x;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    double trial = step;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = region.project(x - trial * grad);
      f_new = cost.value(x_new);
      double decrease = grad.dot(x - x_new) - 0.5 / trial * (x - x_new).squaredNorm();
      if (f_new <= fx - 1e-4 * std::max(decrease, 0.0) + 1e-30 ||
          f_new <= fx - 1e-12 * std::abs(fx)) {
        break;
      }
      trial *= 0.5;
    }
    if ((x_new - x).norm() == 0.0) return x;  // stalled on the boundary
    Eigen::VectorXd grad_new = cost.gradient(x_new);
    Eigen::VectorXd dx = x_new - x, dg = grad_new - grad;
    double denom = dx.dot(dg);
    step = denom > 1e-300 ? dx.squaredNorm() / denom : trial * 2.0;
    step = std::clamp(step, 1e-12, 1e12);
    x = std::move(x_new);
    grad = std::move(grad_new);
    fx = f_new;
  }
  if ((x - region.project(x - grad)).norm() <= 1e3 * tol) return x;
  throw NoConvergenceError("hindsight comparator solve did not reach the residual target");
}

}  // namespace detail

/// x̃_i = argmin over ∩_{t≤T} Ω_{i,t}(x_{−i,t}) of Σ_{t≤T} J_{i,t}(·, x_{−i,t}).
/// Falls back to Ω_i with a raised flag when the intersection is empty.
inline ComparatorResult hindsight_comparator(const TrajectoryLog& log,
                                             const GameOracle& oracle, int i, int horizon) {
  if (horizon < 1 || horizon > log.rounds())
    throw DimensionMismatchError("hindsight_comparator: horizon outside the log");
  detail::ComparatorRegion region = detail::build_comparator_region(log, oracle, i, horizon);
  ComparatorResult result;
  if (region.empty) {
    result.fallback = true;
    region = detail::ComparatorRegion{};
    region.base = &oracle.feasible_sets()[static_cast<std::size_t>(i)];
    region.box_like = region.base->kind() == FeasibleSet::Kind::Box;
    if (region.box_like) {
      region.lower = region.base->box_lower();
      region.upper = region.base->box_upper();
    }
  }
  detail::AccumulatedCost cost(log, oracle, i, horizon);
  Eigen::VectorXd start =
      region.project(oracle.feasible_sets()[static_cast<std::size_t>(i)].interior_point());
  result.point = detail::minimize_projected(cost, region, start, 1e-8, 4000);
  return result;
}

/// Per-player regret curve over a horizon grid; every horizon gets its own
/// comparator solve, while the actual-play term reuses prefix sums of the
/// logged cost feedback.
struct RegretReport {
  int player = 0;
  std::vector<int> horizons;
  std::vector<double> regret;             // Reg_i(T)
  std::vector<double> regret_avg;         // Reg_i(T) / T
  std::vector<Eigen::VectorXd> comparator;
  std::vector<bool> fallback;
};

inline RegretReport regret(const TrajectoryLog& log, const GameOracle& oracle, int i,
                           const std::vector<int>& horizons) {
  if (horizons.empty()) throw ConfigError("regret: empty horizon grid");
  for (std::size_t k = 1; k < horizons.size(); ++k)
    if (horizons[k] <= horizons[k - 1])
      throw ConfigError("regret: horizons must be strictly increasing");
  if (horizons.back() > log.rounds())
    throw DimensionMismatchError("regret: grid exceeds the log length");

  std::vector<double> actual_prefix(static_cast<std::size_t>(log.rounds()) + 1, 0.0);
  for (int t = 1; t <= log.rounds(); ++t)
    actual_prefix[static_cast<std::size_t>(t)] =
        actual_prefix[static_cast<std::size_t>(t - 1)] +
        log.round(t).costs[static_cast<std::size_t>(i)];

  RegretReport report;
  report.player = i;
  report.horizons = horizons;
  for (int horizon : horizons) {
    ComparatorResult comp = hindsight_comparator(log, oracle, i, horizon);
    detail::AccumulatedCost cost(log, oracle, i, horizon);
    double reg = actual_prefix[static_cast<std::size_t>(horizon)] - cost.value(comp.point);
    report.regret.push_back(reg);
    report.regret_avg.push_back(reg / static_cast<double>(horizon));
    report.comparator.push_back(comp.point);
    report.fallback.push_back(comp.fallback);
  }
  return report;
}

/// Constraint-violation measure R_g(T) = ‖[Σ_{t≤T} g_t(x_t)]_+‖₂ over the
/// grid; the positive part applies after the sum, so feasible rounds cancel
/// earlier violations. Values are recomputed from the oracle on the played
/// actions, independently of the logged feedback.
struct ViolationReport {
  std::vector<int> horizons;
  std::vector<double> r_g;
  std::vector<double> r_g_avg;
  std::vector<Eigen::VectorXd> cumulative;  // Σ_{t≤T} g_t(x_t) per round
};

inline ViolationReport violation(const TrajectoryLog& log, const GameOracle& oracle,
                                 const std::vector<int>& horizons) {
  if (!horizons.empty() && horizons.back() > log.rounds())
    throw DimensionMismatchError("violation: grid exceeds the log length");
  ViolationReport report;
  report.horizons = horizons;
  Eigen::VectorXd running = Eigen::VectorXd::Zero(oracle.constraint_dim());
  std::size_t next = 0;
  for (int t = 1; t <= log.rounds(); ++t) {
    running += oracle.coupled_constraint(t, log.played(t));
    report.cumulative.push_back(running);
    if (next < horizons.size() && horizons[next] == t) {
      double value = running.cwiseMax(0.0).norm();
      report.r_g.push_back(value);
      report.r_g_avg.push_back(value / static_cast<double>(t));
      ++next;
    }
  }
  if (next != horizons.size()) throw ConfigError("violation: horizons must be increasing");
  return report;
}

/// ‖x_t − x*‖ (averaged = false) or ‖x̄_t − x*‖² (averaged = true) per round,
/// against the known GNE or a brute-forced one.
inline std::vector<double> tracking_error(const TrajectoryLog& log, const LimitGame& limit,
                                          bool averaged) {
  ActionProfile gne;
  if (limit.known_gne) {
    gne = *limit.known_gne;
  } else if (limit.mu > 0.0 && limit.oracle) {
    gne = limit_gne_bruteforce(limit, 1e-8);
  } else {
    throw MissingGneError("tracking_error: limit game has no GNE available");
  }
  Eigen::VectorXd target = stack_profile(gne);
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(log.rounds()));
  Eigen::VectorXd running = Eigen::VectorXd::Zero(target.size());
  for (int t = 1; t <= log.rounds(); ++t) {
    Eigen::VectorXd x = stack_profile(log.round(t).actions);
    if (averaged) {
      running += x;
      curve.push_back((running / static_cast<double>(t) - target).squaredNorm());
    } else {
      curve.push_back((x - target).norm());
    }
  }
  return curve;
}

/// Consensus residual max_i ‖λ̃_{i,t} − λ̄_t‖ per round, next to the analytic
/// envelope 2√N·L·Σ_{s<t} σ^s γ_{t−1−s} evaluated with the run's σ, L, γ.
struct ConsensusReport {
  std::vector<double> residual;
  std::vector<double> bound;
};

inline ConsensusReport consensus_residual(const TrajectoryLog& log, const CommGraph& graph,
                                          const GameBounds& bounds) {
  ConsensusReport report;
  double scale = 2.0 * std::sqrt(static_cast<double>(log.n_players())) * bounds.L;
  double running = 0.0;
  for (int t = 1; t <= log.rounds(); ++t) {
    const TrajectoryRound& r = log.round(t);
    running = t == 1 ? 1.0 : graph.sigma() * running + log.round(t - 1).gamma;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(log.constraint_dim());
    for (const auto& lam : r.duals) mean += lam;
    mean /= static_cast<double>(log.n_players());
    double worst = 0.0;
    for (const auto& mixed : r.mixed_duals)
      worst = std::max(worst, (mixed - mean).norm());
    report.residual.push_back(worst);
    report.bound.push_back(scale * running);
  }
  return report;
}

/// Log-log least-squares slope of a cumulative metric. Fits over the last
/// half of the grid unless an explicit [t_lo, t_hi] window is given.
struct SlopeFit {
  double slope = 0.0;
  double r2 = 1.0;
};

inline SlopeFit sublinearity_fit(const std::vector<int>& horizons,
                                 const std::vector<double>& values, int t_lo = -1,
                                 int t_hi = -1) {
  if (horizons.size() != values.size() || horizons.size() < 5)
    throw ConfigError("sublinearity_fit needs >= 5 grid points");
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    bool in_window = t_lo < 0 ? k >= horizons.size() / 2
                              : horizons[k] >= t_lo && horizons[k] <= t_hi;
    if (!in_window) continue;
    if (!(values[k] > 0.0))
      throw NonPositiveValuesError("sublinearity_fit: metric must be positive on the window");
    xs.push_back(std::log(static_cast<double>(horizons[k])));
    ys.push_back(std::log(values[k]));
  }
  if (xs.size() < 2) throw ConfigError("sublinearity_fit: window selects fewer than 2 points");
  double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  double ss_res = syy - sxy * sxy / sxx;
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace ogmd
