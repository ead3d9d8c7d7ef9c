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
#include "ogmd/mirror.hpp"
#include "ogmd/parallel.hpp"
#include "ogmd/rng.hpp"
#include "ogmd/schedule.hpp"
#include "ogmd/trajectory.hpp"

namespace ogmd {

/// Per-player feedback revealed after a round: the cost value R_i, the local
/// constraint value C_i, the partial cost gradient V_i and the local
/// constraint Jacobian G_i.
struct FeedbackBundle {
  double cost = 0.0;                     // R_i = J_{i,t}(x_t)
  Eigen::VectorXd constraint;            // C_i = g_{i,t}(x_{i,t})
  Eigen::VectorXd cost_gradient;         // V_i
  Eigen::MatrixXd constraint_jacobian;   // G_i, n_i x m
};

/// Synchronous learner state at the start of round t.
struct LearnerState {
  int round = 1;
  ActionProfile actions;               // x_{i,t} ∈ Ω_i
  std::vector<Eigen::VectorXd> duals;  // λ_{i,t} ≥ 0
};

enum class InitKind { Zero, RandomFeasible };

/// t = 1, λ_{i,1} = 0; x_{i,1} is the projection of the origin (Zero) or a
/// seeded feasible sample (RandomFeasible, substream per player).
inline LearnerState init_state(const GameOracle& oracle, std::uint64_t seed, InitKind init) {
  LearnerState state;
  state.round = 1;
  const int n = oracle.n_players();
  state.actions.resize(static_cast<std::size_t>(n));
  state.duals.assign(static_cast<std::size_t>(n),
                     Eigen::VectorXd::Zero(oracle.constraint_dim()));
  for (int i = 0; i < n; ++i) {
    const auto& set = oracle.feasible_sets()[static_cast<std::size_t>(i)];
    if (init == InitKind::Zero) {
      state.actions[static_cast<std::size_t>(i)] =
          set.project(Eigen::VectorXd::Zero(set.dimension()));
    } else {
      SplitMix64 rng(substream_seed(seed, static_cast<std::uint64_t>(i), 0));
      state.actions[static_cast<std::size_t>(i)] = set.sample(rng);
    }
  }
  return state;
}

/// Evaluates the oracle at the current profile:
/// V_i = ∇_i J_{i,t}(x_t), G_i = ∇g_{i,t}(x_{i,t}), R_i, C_i.
inline std::vector<FeedbackBundle> collect_feedback(const GameOracle& oracle,
                                                    const LearnerState& state) {
  std::vector<FeedbackBundle> feedback(static_cast<std::size_t>(oracle.n_players()));
  for (int i = 0; i < oracle.n_players(); ++i) {
    std::size_t ii = static_cast<std::size_t>(i);
    FeedbackBundle& f = feedback[ii];
    f.cost = oracle.cost_value(i, state.round, state.actions);
    f.cost_gradient = oracle.cost_grad(i, state.round, state.actions);
    f.constraint = oracle.constraint_value(i, state.round, state.actions[ii]);
    f.constraint_jacobian = oracle.constraint_jacobian(i, state.round, state.actions[ii]);
  }
  return feedback;
}

namespace detail {

/// One synchronous round given precomputed mixed duals λ̃. Every player reads
/// the pre-step state and writes its own slot of the next one, so the update
/// order (and thread count) cannot change the result:
///   x_{i,t+1} = argmin_{x∈Ω_i} { α_t⟨x, V_i + G_i λ̃_i⟩ + D_φ(x, x_{i,t}) }
///   λ_{i,t+1} = [λ̃_i + γ_t (C_i − β_t λ̃_i)]_+
inline LearnerState step_with_mixed(const LearnerState& state,
                                    const std::vector<FeedbackBundle>& feedback,
                                    const std::vector<Eigen::VectorXd>& mixed,
                                    const StepSchedule& schedule,
                                    const std::vector<MirrorMap>& maps,
                                    const std::vector<FeasibleSet>& sets,
                                    unsigned n_threads = 1) {
  const std::size_t n = state.actions.size();
  if (feedback.size() != n || mixed.size() != n || maps.size() != n || sets.size() != n)
    throw DimensionMismatchError("step: per-player container sizes differ");
  const int t = state.round;
  const double alpha = schedule.alpha(t);
  const double beta = schedule.beta(t);
  const double gamma = schedule.gamma(t);

  LearnerState next;
  next.round = t + 1;
  next.actions.resize(n);
  next.duals.resize(n);
  parallel_for(n, n_threads, [&](std::size_t i) {
    const FeedbackBundle& f = feedback[i];
    Eigen::VectorXd grad = f.cost_gradient + f.constraint_jacobian * mixed[i];
    next.actions[i] = mirror_step(maps[i], sets[i], state.actions[i], grad, alpha);
    next.duals[i] = (mixed[i] + gamma * (f.constraint - beta * mixed[i])).cwiseMax(0.0);
  });
  return next;
}

}  // namespace detail

/// One round of the decentralized primal-dual dynamic mirror descent.
inline LearnerState step(const LearnerState& state, const std::vector<FeedbackBundle>& feedback,
                         const CommGraph& graph, const StepSchedule& schedule,
                         const std::vector<MirrorMap>& maps,
                         const std::vector<FeasibleSet>& sets, unsigned n_threads = 1) {
  std::vector<Eigen::VectorXd> mixed = graph.mix_duals(state.duals);
  return detail::step_with_mixed(state, feedback, mixed, schedule, maps, sets, n_threads);
}

struct RunOptions {
  int horizon = 1;
  std::uint64_t seed = 1;
  InitKind init = InitKind::Zero;
  bool check_invariants = true;
  unsigned n_threads = 1;
};

namespace detail {

/// Online checker for the dual bounds and feasibility that hold along every
/// run: ‖λ_{i,t}‖ ≤ L/β_t, ‖λ̃_{i,t}‖ ≤ L/β_t,
/// max_i ‖λ̃_{i,t} − λ̄_t‖ ≤ 2√N·L·Σ_{s<t} σ^s γ_{t−1−s}, λ ≥ 0 and x ∈ Ω.
/// The consensus sum is maintained by the recursion S_t = σ·S_{t−1} + γ_{t−1}.
class InvariantChecker {
 public:
  InvariantChecker(const CommGraph& graph, const GameBounds& bounds, int n_players)
      : sigma_(graph.sigma()), big_l_(bounds.L),
        scale_(2.0 * std::sqrt(static_cast<double>(n_players)) * bounds.L) {}

  void check_round(int t, const LearnerState& state,
                   const std::vector<Eigen::VectorXd>& mixed, double beta,
                   double gamma_prev, const std::vector<FeasibleSet>& sets) {
    consensus_sum_ = t == 1 ? 1.0 : sigma_ * consensus_sum_ + gamma_prev;

    const double dual_cap = big_l_ / beta + kSlack;
    const std::size_t n = state.actions.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(state.duals.front().size());
    for (const auto& lam : state.duals) mean += lam;
    mean /= static_cast<double>(n);

    double worst_consensus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((state.duals[i].array() < -0.0).any())
        fail("dual nonnegativity", t, "lambda has a negative component");
      if (state.duals[i].norm() > dual_cap)
        fail("dual norm bound", t,
             "||lambda_" + std::to_string(i + 1) + "|| = " +
                 std::to_string(state.duals[i].norm()) + " > L/beta_t = " +
                 std::to_string(big_l_ / beta));
      if (mixed[i].norm() > dual_cap)
        fail("mixed dual norm bound", t,
             "||mixed lambda_" + std::to_string(i + 1) + "|| exceeds L/beta_t");
      if (!sets[i].contains(state.actions[i], kFeasTol))
        fail("primal feasibility", t,
             "x_" + std::to_string(i + 1) + " left its feasible set");
      worst_consensus = std::max(worst_consensus, (mixed[i] - mean).norm());
    }
    const double consensus_cap = scale_ * consensus_sum_ + kSlack;
    if (worst_consensus > consensus_cap)
      fail("dual consensus bound", t,
           "max_i ||mixed lambda_i - mean|| = " + std::to_string(worst_consensus) +
               " > " + std::to_string(scale_ * consensus_sum_));
  }

 private:
  static constexpr double kSlack = 1e-9;
  static constexpr double kFeasTol = 1e-10;

  [[noreturn]] static void fail(const std::string& invariant, int t, const std::string& what) {
    throw InvariantViolationError(invariant, "round " + std::to_string(t) + ": " + what);
  }

  double sigma_;
  double big_l_;
  double scale_;
  double consensus_sum_ = 1.0;  // Σ_{s=0}^{t-1} σ^s γ_{t-1-s}
};

}  // namespace detail

/// Runs Algorithm-style full-information learning for `options.horizon`
/// rounds and returns the trajectory. Deterministic in (seed, config),
/// whatever the thread count.
inline TrajectoryLog run(const GameOracle& oracle, const CommGraph& graph,
                         const StepSchedule& schedule, const std::vector<MirrorMap>& maps,
                         const std::vector<FeasibleSet>& sets, const RunOptions& options) {
  if (options.horizon < 1) throw ConfigError("run: horizon must be >= 1");
  if (options.horizon > schedule.horizon())
    throw ScheduleExhaustedError("run horizon exceeds the schedule horizon");
  if (graph.n_players() != oracle.n_players())
    throw DimensionMismatchError("run: graph and oracle disagree on the player count");

  TrajectoryLog log(oracle.action_dims(), oracle.constraint_dim(), false, options.seed);
  LearnerState state = init_state(oracle, options.seed, options.init);
  detail::InvariantChecker checker(graph, oracle.bounds(), oracle.n_players());

  std::vector<Eigen::VectorXd> mixed;
  for (int t = 1; t <= options.horizon; ++t) {
    std::vector<FeedbackBundle> feedback = collect_feedback(oracle, state);
    graph.mix_duals_into(state.duals, mixed);

    if (options.check_invariants)
      checker.check_round(t, state, mixed, schedule.beta(t),
                          t == 1 ? 1.0 : schedule.gamma(t - 1), sets);

    TrajectoryRound record;
    record.t = t;
    record.actions = state.actions;
    record.duals = state.duals;
    record.mixed_duals = mixed;
    record.alpha = schedule.alpha(t);
    record.beta = schedule.beta(t);
    record.gamma = schedule.gamma(t);
    record.costs.reserve(feedback.size());
    record.constraints.reserve(feedback.size());
    for (const auto& f : feedback) {
      record.costs.push_back(f.cost);
      record.constraints.push_back(f.constraint);
    }
    log.add_round(std::move(record));

    if (t < options.horizon)
      state = detail::step_with_mixed(state, feedback, mixed, schedule, maps, sets,
                                      options.n_threads);
  }
  return log;
}

}  // namespace ogmd
