#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/comm_graph.hpp"
#include "ogmd/error.hpp"
#include "ogmd/game.hpp"
#include "ogmd/learner.hpp"
#include "ogmd/mirror.hpp"
#include "ogmd/parallel.hpp"
#include "ogmd/rng.hpp"
#include "ogmd/schedule.hpp"
#include "ogmd/trajectory.hpp"

namespace ogmd {

/// Signed coordinate direction w ∈ {±e_1, ..., ±e_n}, encoded as
/// index = 2·axis + (0 for +, 1 for −).
struct PerturbationDraw {
  int axis = 0;
  int sign = 1;
  int index = 0;

  static PerturbationDraw from_index(int index, int dimension) {
    if (index < 0 || index >= 2 * dimension)
      throw DomainViolationError("perturbation index out of range");
    PerturbationDraw w;
    w.index = index;
    w.axis = index / 2;
    w.sign = (index % 2 == 0) ? 1 : -1;
    return w;
  }

  /// Uniform draw from the 2·dimension signed axes for (player, round) under
  /// the run seed; independent of call order.
  static PerturbationDraw draw(std::uint64_t seed, int player, int round, int dimension) {
    std::uint64_t stream = substream_seed(seed, static_cast<std::uint64_t>(player),
                                          static_cast<std::uint64_t>(round));
    SplitMix64 rng(stream);
    return from_index(static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(2 * dimension))),
                      dimension);
  }

  Eigen::VectorXd vector(int dimension) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension);
    v[axis] = static_cast<double>(sign);
    return v;
  }
};

/// Configuration of the payoff-based learner: decay exponents
/// (α = t^{−d1}, β = t^{−d2}, δ_{i,t} = min(0.99·r_i, c_i·t^{−d3})) and the
/// per-player interior balls B_{r_i}(p_i) ⊆ Ω_i used by the query transform.
struct BanditConfig {
  double d1 = 0.75, d2 = 0.25, d3 = 0.5;
  std::vector<Eigen::VectorXd> interior_points;  // p_i
  std::vector<double> interior_radii;            // r_i
  std::vector<double> delta_scales;              // c_i < r_i
  std::uint64_t rng_seed = 1;

  /// Defaults p_i, r_i from each set's interior ball and c_i = 0.99·r_i.
  static BanditConfig make(double d1, double d2, double d3,
                           const std::vector<FeasibleSet>& sets, std::uint64_t seed) {
    if (!(d2 > 0.0) || !(2.0 * d2 < d1) || !(d1 < 1.0))
      throw ScheduleError("bandit exponents need 0 < 2*d2 < d1 < 1");
    if (!(d2 < d3) || !(d3 < d1))
      throw ScheduleError("bandit exponents need d2 < d3 < d1");
    BanditConfig cfg;
    cfg.d1 = d1;
    cfg.d2 = d2;
    cfg.d3 = d3;
    cfg.rng_seed = seed;
    for (const auto& set : sets) {
      if (!set.has_interior_ball())
        throw RadiusViolationError(
            "bandit learner needs a feasible set with an interior ball");
      cfg.interior_points.push_back(set.interior_point());
      cfg.interior_radii.push_back(set.interior_radius());
      cfg.delta_scales.push_back(0.99 * set.interior_radius());
    }
    return cfg;
  }

  double delta(int i, int t) const {
    std::size_t ii = static_cast<std::size_t>(i);
    return std::min(0.99 * interior_radii[ii],
                    delta_scales[ii] * std::pow(static_cast<double>(t), -d3));
  }

  void validate_against(const std::vector<FeasibleSet>& sets) const {
    if (interior_points.size() != sets.size() || interior_radii.size() != sets.size() ||
        delta_scales.size() != sets.size())
      throw DimensionMismatchError("bandit config: per-player arrays sized wrong");
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (!(interior_radii[i] > 0.0))
        throw RadiusViolationError("bandit config: interior radius must be positive");
      if (!(delta_scales[i] < interior_radii[i]))
        throw RadiusViolationError("bandit config: delta scale must stay below the radius");
      FeasibleSet probe = sets[i];
      probe.set_interior(interior_points[i], interior_radii[i]);  // throws if invalid
    }
  }
};

/// Feasible query point
///   x̂ = x − (δ/r)(x − p) + δ·w = (1 − δ/r)·x + (δ/r)(p + r·w),
/// a convex combination of x and a point of B_r(p), hence inside Ω.
inline Eigen::VectorXd query_point(const Eigen::VectorXd& x, double delta, double r,
                                   const Eigen::VectorXd& p, const PerturbationDraw& w) {
  if (!(delta > 0.0) || delta >= r)
    throw RadiusViolationError("query_point needs 0 < delta < r");
  if (x.size() != p.size()) throw DimensionMismatchError("query_point: dimension mismatch");
  double shrink = delta / r;
  Eigen::VectorXd q = (1.0 - shrink) * x + shrink * p;
  q[w.axis] += delta * static_cast<double>(w.sign);
  return q;
}

/// One-point estimates from the values observed at the query profile:
///   ∇̂_i J = (n_i/δ)·Ĵ·w,  column j of ∇̂g_i = (n_i/δ)·ĝ_j·w.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> estimate_gradients(
    double cost_value, const Eigen::VectorXd& constraint_value, int dimension, double delta,
    const PerturbationDraw& w) {
  if (!(delta > 0.0)) throw RadiusViolationError("estimate_gradients needs delta > 0");
  double scale = static_cast<double>(dimension) / delta;
  Eigen::VectorXd wv = w.vector(dimension);
  Eigen::VectorXd cost_grad = (scale * cost_value) * wv;
  Eigen::MatrixXd jac = wv * (scale * constraint_value).transpose();  // n_i x m
  return {std::move(cost_grad), std::move(jac)};
}

namespace detail {

struct BanditRoundData {
  std::vector<PerturbationDraw> draws;
  ActionProfile queries;                      // x̂_{i,t}
  std::vector<double> costs;                  // Ĵ_{i,t}
  std::vector<Eigen::VectorXd> constraints;   // ĝ_{i,t}
  std::vector<double> deltas;
};

/// Draws directions, forms query points and evaluates ONLY function values at
/// the query profile (never a gradient oracle).
inline BanditRoundData bandit_observe(const GameOracle& oracle, const LearnerState& state,
                                      const BanditConfig& cfg) {
  const int n = oracle.n_players();
  BanditRoundData data;
  data.draws.reserve(static_cast<std::size_t>(n));
  data.queries.resize(static_cast<std::size_t>(n));
  data.costs.resize(static_cast<std::size_t>(n));
  data.constraints.resize(static_cast<std::size_t>(n));
  data.deltas.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::size_t ii = static_cast<std::size_t>(i);
    int ni = oracle.action_dims()[ii];
    PerturbationDraw w = PerturbationDraw::draw(cfg.rng_seed, i, state.round, ni);
    double delta = cfg.delta(i, state.round);
    data.queries[ii] = query_point(state.actions[ii], delta, cfg.interior_radii[ii],
                                   cfg.interior_points[ii], w);
    data.deltas[ii] = delta;
    data.draws.push_back(w);
  }
  for (int i = 0; i < n; ++i) {
    std::size_t ii = static_cast<std::size_t>(i);
    data.costs[ii] = oracle.cost_value(i, state.round, data.queries);
    data.constraints[ii] = oracle.constraint_value(i, state.round, data.queries[ii]);
  }
  return data;
}

inline LearnerState bandit_step_with_data(const LearnerState& state,
                                          const BanditRoundData& data,
                                          const std::vector<Eigen::VectorXd>& mixed,
                                          const StepSchedule& schedule,
                                          const std::vector<MirrorMap>& maps,
                                          const std::vector<FeasibleSet>& sets,
                                          unsigned n_threads = 1) {
  const std::size_t n = state.actions.size();
  const int t = state.round;
  const double alpha = schedule.alpha(t);
  const double beta = schedule.beta(t);
  const double gamma = schedule.gamma(t);

  LearnerState next;
  next.round = t + 1;
  next.actions.resize(n);
  next.duals.resize(n);
  parallel_for(n, n_threads, [&](std::size_t i) {
    int ni = static_cast<int>(state.actions[i].size());
    auto [cost_grad, jac] = estimate_gradients(data.costs[i], data.constraints[i], ni,
                                               data.deltas[i], data.draws[i]);
    Eigen::VectorXd grad = cost_grad + jac * mixed[i];
    next.actions[i] = mirror_step(maps[i], sets[i], state.actions[i], grad, alpha);
    next.duals[i] =
        (mixed[i] + gamma * (data.constraints[i] - beta * mixed[i])).cwiseMax(0.0);
  });
  return next;
}

}  // namespace detail

/// One round of the payoff-based learner: draw w_{i,t}, play the query point,
/// observe values only, build one-point estimates, then run the same
/// primal-dual update as the full-information learner with ĝ in the dual.
inline LearnerState step_bandit(const LearnerState& state, const GameOracle& oracle,
                                const CommGraph& graph, const StepSchedule& schedule,
                                const BanditConfig& bandit,
                                const std::vector<MirrorMap>& maps,
                                const std::vector<FeasibleSet>& sets,
                                unsigned n_threads = 1) {
  detail::BanditRoundData data = detail::bandit_observe(oracle, state, bandit);
  std::vector<Eigen::VectorXd> mixed = graph.mix_duals(state.duals);
  return detail::bandit_step_with_data(state, data, mixed, schedule, maps, sets, n_threads);
}

/// Runs the payoff-based learner for `options.horizon` rounds. The log keeps
/// both the base profile x_t and the played queries x̂_t; metrics are computed
/// on the played sequence.
inline TrajectoryLog run_bandit(const GameOracle& oracle, const CommGraph& graph,
                                const StepSchedule& schedule, const BanditConfig& bandit,
                                const std::vector<MirrorMap>& maps,
                                const std::vector<FeasibleSet>& sets,
                                const RunOptions& options) {
  if (options.horizon < 1) throw ConfigError("run_bandit: horizon must be >= 1");
  if (options.horizon > schedule.horizon())
    throw ScheduleExhaustedError("run horizon exceeds the schedule horizon");
  bandit.validate_against(sets);

  TrajectoryLog log(oracle.action_dims(), oracle.constraint_dim(), true, options.seed);
  LearnerState state = init_state(oracle, options.seed, options.init);
  detail::InvariantChecker checker(graph, oracle.bounds(), oracle.n_players());

  std::vector<Eigen::VectorXd> mixed;
  for (int t = 1; t <= options.horizon; ++t) {
    detail::BanditRoundData data = detail::bandit_observe(oracle, state, bandit);
    graph.mix_duals_into(state.duals, mixed);

    if (options.check_invariants) {
      checker.check_round(t, state, mixed, schedule.beta(t),
                          t == 1 ? 1.0 : schedule.gamma(t - 1), sets);
      for (std::size_t i = 0; i < data.queries.size(); ++i)
        if (!sets[i].contains(data.queries[i], 1e-10))
          throw InvariantViolationError("query feasibility",
                                        "round " + std::to_string(t) + ": played point " +
                                            std::to_string(i + 1) + " left its set");
    }

    TrajectoryRound record;
    record.t = t;
    record.actions = state.actions;
    record.duals = state.duals;
    record.mixed_duals = mixed;
    record.alpha = schedule.alpha(t);
    record.beta = schedule.beta(t);
    record.gamma = schedule.gamma(t);
    record.costs = data.costs;
    record.constraints = data.constraints;
    record.played_actions = data.queries;
    record.query_radius = data.deltas;
    record.direction.reserve(data.draws.size());
    for (const auto& w : data.draws) record.direction.push_back(w.index);
    log.add_round(std::move(record));

    if (t < options.horizon)
      state = detail::bandit_step_with_data(state, data, mixed, schedule, maps, sets,
                                            options.n_threads);
  }
  return log;
}

}  // namespace ogmd
