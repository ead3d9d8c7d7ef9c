#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/bandit.hpp"
#include "ogmd/comm_graph.hpp"
#include "ogmd/error.hpp"
#include "ogmd/game.hpp"
#include "ogmd/gne.hpp"
#include "ogmd/learner.hpp"
#include "ogmd/metrics.hpp"
#include "ogmd/mirror.hpp"
#include "ogmd/rng.hpp"
#include "ogmd/schedule.hpp"
#include "ogmd/trajectory.hpp"
#include "ogmd/util.hpp"
#include "ogmd/version.hpp"

namespace ogmd {

namespace detail {

inline Eigen::VectorXd json_to_vector(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected a JSON array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] =
      j[k].get<double>();
  return v;
}

inline Eigen::MatrixXd json_to_matrix(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a JSON array of rows");
  Eigen::MatrixXd m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != j[0].size())
      throw ConfigError("matrix rows must have equal length");
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace detail

enum class LearnerKind { Full, Bandit };

/// Everything an experiment needs, built and validated from one config JSON.
struct Experiment {
  nlohmann::json config;
  LearnerKind learner = LearnerKind::Full;
  std::shared_ptr<GameOracle> oracle;
  std::optional<CommGraph> graph;
  std::optional<StepSchedule> schedule;
  std::vector<MirrorMap> maps;
  std::vector<FeasibleSet> sets;
  std::optional<BanditConfig> bandit;
  std::optional<LimitGame> limit;  // converging games only
  int horizon = 0;
  std::vector<std::uint64_t> seeds;
  InitKind init = InitKind::Zero;
  bool invariant_checks = true;
  std::vector<int> horizon_grid;
  std::string output_dir;

  RunOptions options_for(std::uint64_t seed, unsigned n_threads) const {
    RunOptions opt;
    opt.horizon = horizon;
    opt.seed = seed;
    opt.init = init;
    opt.check_invariants = invariant_checks;
    opt.n_threads = n_threads;
    return opt;
  }
};

namespace detail {

inline std::shared_ptr<GameOracle> build_oracle(const nlohmann::json& game,
                                                std::optional<LimitGame>& limit) {
  std::string name = game.at("name").get<std::string>();
  if (name == "nash-cournot") {
    std::string variant = get_or<std::string>(game, "variant", "oscillating");
    int players = get_or<int>(game, "players", 20);
    NashCournotOracle::Variant v;
    if (variant == "oscillating") {
      v = NashCournotOracle::Variant::Oscillating;
    } else if (variant == "converging") {
      v = NashCournotOracle::Variant::Converging;
    } else {
      throw ConfigError("nash-cournot variant must be oscillating or converging");
    }
    auto oracle = std::make_shared<NashCournotOracle>(v, players);
    if (v == NashCournotOracle::Variant::Converging) limit = oracle->limit_game();
    return oracle;
  }
  if (name == "quadratic") {
    QuadraticGameOracle::Spec spec;
    spec.dims = game.at("dims").get<std::vector<int>>();
    spec.constraint_dim = game.at("m").get<int>();
    spec.period = get_or<double>(game, "period", 12.0);
    for (const auto& q : game.at("q_mat")) spec.q_mat.push_back(json_to_matrix(q));
    for (const auto& q : game.at("q0")) spec.q0.push_back(json_to_vector(q));
    for (const auto& q : game.at("q1")) spec.q1.push_back(json_to_vector(q));
    for (const auto& e : game.at("e_mat")) spec.e_mat.push_back(json_to_matrix(e));
    for (const auto& b : game.at("b0")) spec.b0.push_back(json_to_vector(b));
    for (const auto& b : game.at("b1")) spec.b1.push_back(json_to_vector(b));
    for (const auto& l : game.at("lower")) spec.lower.push_back(json_to_vector(l));
    for (const auto& u : game.at("upper")) spec.upper.push_back(json_to_vector(u));
    spec.mu_limit = get_or<double>(game, "mu_limit", 0.0);
    spec.lambda_cap = get_or<double>(game, "lambda_cap", 10.0);
    if (game.contains("L")) spec.bound_l = game.at("L").get<double>();
    if (game.contains("M")) spec.bound_m = game.at("M").get<double>();
    auto oracle = std::make_shared<QuadraticGameOracle>(std::move(spec));
    if (oracle->bounds().mu_limit > 0.0) limit = oracle->limit_game();
    return oracle;
  }
  throw ConfigError("unknown game: " + name);
}

inline CommGraph build_graph(const nlohmann::json& graph, int players) {
  std::string kind = graph.at("kind").get<std::string>();
  if (kind == "matrix") return CommGraph::build(json_to_matrix(graph.at("weights")));
  return CommGraph::by_name(kind, players);
}

inline std::vector<int> default_grid(int horizon) {
  std::vector<int> grid;
  int points = std::min(20, horizon);
  for (int k = 1; k <= points; ++k) {
    int t = static_cast<int>(static_cast<long long>(horizon) * k / points);
    if (grid.empty() || t > grid.back()) grid.push_back(t);
  }
  return grid;
}

}  // namespace detail

/// Parses and validates a config document; every exponent window, graph
/// assumption and schedule chain is checked here, before any run starts.
inline Experiment build_experiment(const nlohmann::json& config) {
  Experiment exp;
  exp.config = config;
  try {
    exp.horizon = config.at("horizon").get<int>();
    if (exp.horizon < 1) throw ConfigError("horizon must be >= 1");

    exp.oracle = detail::build_oracle(config.at("game"), exp.limit);
    exp.graph = detail::build_graph(config.at("graph"), exp.oracle->n_players());
    if (exp.graph->n_players() != exp.oracle->n_players())
      throw ConfigError("graph size does not match the player count");

    std::string learner = config.at("learner").get<std::string>();
    const nlohmann::json& sched = config.at("schedule");
    if (learner == "full") {
      exp.learner = LearnerKind::Full;
      std::string mode = detail::get_or<std::string>(sched, "mode", "regret");
      if (mode == "regret") {
        exp.schedule = StepSchedule::regret(sched.at("a1").get<double>(),
                                            sched.at("a2").get<double>(), exp.horizon);
      } else if (mode == "tracking") {
        exp.schedule = StepSchedule::tracking(
            sched.at("b1").get<double>(), sched.at("b2").get<double>(), exp.horizon,
            detail::get_or<double>(sched, "p", 1.0), detail::get_or<double>(sched, "q", 1.0));
      } else {
        throw ConfigError("full learner schedule mode must be regret or tracking");
      }
    } else if (learner == "bandit") {
      exp.learner = LearnerKind::Bandit;
      double d1 = sched.at("d1").get<double>();
      double d2 = sched.at("d2").get<double>();
      exp.schedule = StepSchedule::regret(d1, d2, exp.horizon);
    } else {
      throw ConfigError("learner must be full or bandit");
    }

    exp.sets = exp.oracle->feasible_sets();
    const nlohmann::json mirror = detail::get_or<nlohmann::json>(
        config, "mirror", nlohmann::json{{"kind", "squared-norm"}});
    std::string mirror_kind = detail::get_or<std::string>(mirror, "kind", "squared-norm");
    for (const auto& set : exp.sets) {
      if (mirror_kind == "squared-norm") {
        exp.maps.push_back(MirrorMap::squared_norm(set.dimension(), set.diameter()));
      } else if (mirror_kind == "negative-entropy") {
        if (set.kind() != FeasibleSet::Kind::Simplex)
          throw ConfigError("negative-entropy mirror maps pair only with simplex sets");
        exp.maps.push_back(
            MirrorMap::negative_entropy(set.dimension(), set.simplex_scale()));
      } else {
        throw ConfigError("unknown mirror map kind: " + mirror_kind);
      }
    }

    if (exp.learner == LearnerKind::Bandit) {
      const nlohmann::json bandit = detail::get_or<nlohmann::json>(config, "bandit",
                                                                   nlohmann::json::object());
      if (bandit.contains("interior_point")) {
        double p = bandit.at("interior_point").get<double>();
        double r = bandit.at("interior_radius").get<double>();
        for (auto& set : exp.sets)
          set.set_interior(Eigen::VectorXd::Constant(set.dimension(), p), r);
      }
      exp.bandit = BanditConfig::make(sched.at("d1").get<double>(),
                                      sched.at("d2").get<double>(),
                                      sched.at("d3").get<double>(), exp.sets, 0);
      if (bandit.contains("delta_scale")) {
        double c = bandit.at("delta_scale").get<double>();
        for (std::size_t i = 0; i < exp.bandit->delta_scales.size(); ++i) {
          if (!(c < exp.bandit->interior_radii[i]))
            throw ConfigError("delta_scale must stay below the interior radius");
          exp.bandit->delta_scales[i] = c;
        }
      }
    }

    exp.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();
    if (exp.seeds.empty()) throw ConfigError("seeds must be non-empty");
    std::string init = detail::get_or<std::string>(config, "init", "zero");
    if (init == "zero") {
      exp.init = InitKind::Zero;
    } else if (init == "random") {
      exp.init = InitKind::RandomFeasible;
    } else {
      throw ConfigError("init must be zero or random");
    }
    exp.invariant_checks = detail::get_or<bool>(config, "invariant_checks", true);

    if (config.contains("metrics") && config.at("metrics").contains("grid")) {
      exp.horizon_grid = config.at("metrics").at("grid").get<std::vector<int>>();
      for (std::size_t k = 0; k < exp.horizon_grid.size(); ++k) {
        if (exp.horizon_grid[k] < 1 || exp.horizon_grid[k] > exp.horizon ||
            (k > 0 && exp.horizon_grid[k] <= exp.horizon_grid[k - 1]))
          throw ConfigError("metrics.grid must be increasing and within the horizon");
      }
    } else {
      exp.horizon_grid = detail::default_grid(exp.horizon);
    }
    exp.output_dir = detail::get_or<std::string>(config, "output_dir", "");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  return exp;
}

inline Experiment load_experiment_file(const std::string& path) {
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  } catch (const LogIntegrityError& e) {
    throw ConfigError(e.what());
  }
  return build_experiment(config);
}

/// Central-difference consistency sweep of the oracle's gradients and
/// Jacobians at seeded interior points; returns the worst absolute deviation.
inline double finite_difference_check(const GameOracle& oracle, int probes,
                                      std::uint64_t seed = 0x5eedf00dULL) {
  SplitMix64 rng(seed);
  const double h = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    int t = 1 + static_cast<int>(rng.next_below(50));
    ActionProfile x;
    for (const auto& set : oracle.feasible_sets()) x.push_back(set.sample(rng));
    for (int i = 0; i < oracle.n_players(); ++i) {
      std::size_t ii = static_cast<std::size_t>(i);
      Eigen::VectorXd grad = oracle.cost_grad(i, t, x);
      Eigen::MatrixXd jac = oracle.constraint_jacobian(i, t, x[ii]);
      for (int j = 0; j < oracle.action_dims()[ii]; ++j) {
        ActionProfile xp = x, xm = x;
        xp[ii][j] += h;
        xm[ii][j] -= h;
        double fd = (oracle.cost_value(i, t, xp) - oracle.cost_value(i, t, xm)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - grad[j]));
        Eigen::VectorXd gd =
            (oracle.constraint_value(i, t, xp[ii]) - oracle.constraint_value(i, t, xm[ii])) /
            (2.0 * h);
        worst = std::max(worst, (gd - jac.row(j).transpose()).cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

}  // namespace ogmd
