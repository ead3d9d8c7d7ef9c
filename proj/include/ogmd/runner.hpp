#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/bandit.hpp"
#include "ogmd/config.hpp"
#include "ogmd/error.hpp"
#include "ogmd/learner.hpp"
#include "ogmd/metrics.hpp"
#include "ogmd/trajectory.hpp"
#include "ogmd/util.hpp"
#include "ogmd/version.hpp"

namespace ogmd {

/// Offline re-check of the runtime bounds from a persisted log: dual norms
/// against L/β_t, the consensus envelope with the logged γ sequence, primal
/// and query feasibility. Throws InvariantViolationError on the first breach.
inline void verify_log_invariants(const TrajectoryLog& log, const CommGraph& graph,
                                  const GameBounds& bounds,
                                  const std::vector<FeasibleSet>& sets) {
  const double slack = 1e-9;
  double consensus_sum = 0.0;
  double scale = 2.0 * std::sqrt(static_cast<double>(log.n_players())) * bounds.L;
  for (int t = 1; t <= log.rounds(); ++t) {
    const TrajectoryRound& r = log.round(t);
    consensus_sum = t == 1 ? 1.0 : graph.sigma() * consensus_sum + log.round(t - 1).gamma;
    double cap = bounds.L / r.beta + slack;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(log.constraint_dim());
    for (const auto& lam : r.duals) mean += lam;
    mean /= static_cast<double>(log.n_players());
    for (std::size_t i = 0; i < r.duals.size(); ++i) {
      if (r.duals[i].minCoeff() < 0.0)
        throw InvariantViolationError("dual nonnegativity",
                                      "round " + std::to_string(t));
      if (r.duals[i].norm() > cap)
        throw InvariantViolationError("dual norm bound", "round " + std::to_string(t));
      if (r.mixed_duals[i].norm() > cap)
        throw InvariantViolationError("mixed dual norm bound",
                                      "round " + std::to_string(t));
      if ((r.mixed_duals[i] - mean).norm() > scale * consensus_sum + slack)
        throw InvariantViolationError("dual consensus bound",
                                      "round " + std::to_string(t));
      if (!sets[i].contains(r.actions[i], 1e-10))
        throw InvariantViolationError("primal feasibility", "round " + std::to_string(t));
      if (log.is_bandit() && !sets[i].contains(r.played_actions[i], 1e-10))
        throw InvariantViolationError("query feasibility", "round " + std::to_string(t));
    }
  }
}

/// Slope fit that substitutes value + ε when the window contains nonpositive
/// entries (log is undefined there); ε is reported alongside the fit.
struct SlopeFitWithEps {
  double slope = 0.0;
  double r2 = 1.0;
  double epsilon = 0.0;
};

inline SlopeFitWithEps fit_with_epsilon(const std::vector<int>& horizons,
                                        const std::vector<double>& values, int t_lo = -1,
                                        int t_hi = -1) {
  SlopeFitWithEps out;
  try {
    SlopeFit fit = sublinearity_fit(horizons, values, t_lo, t_hi);
    out.slope = fit.slope;
    out.r2 = fit.r2;
    return out;
  } catch (const NonPositiveValuesError&) {
    double low = *std::min_element(values.begin(), values.end());
    out.epsilon = 1e-12 + std::max(0.0, -low) * 1.0000001;
    std::vector<double> shifted = values;
    for (double& v : shifted) v += out.epsilon;
    SlopeFit fit = sublinearity_fit(horizons, shifted, t_lo, t_hi);
    out.slope = fit.slope;
    out.r2 = fit.r2;
    return out;
  }
}

/// All metric curves derived from one seed's trajectory.
struct SeedMetrics {
  std::uint64_t seed = 0;
  std::vector<RegretReport> per_player;    // regret per player over the grid
  std::vector<double> max_regret;          // max_i Reg_i(T) per grid point
  std::vector<double> max_regret_avg;      // max_i Reg_i(T)/T
  ViolationReport violations;
  ConsensusReport consensus;
  std::vector<double> tracking;            // ‖x_t − x*‖ (limit games)
  std::vector<double> tracking_avg;        // ‖x̄_t − x*‖²
  bool comparator_fallback = false;
};

inline SeedMetrics compute_seed_metrics(const TrajectoryLog& log, const Experiment& exp) {
  SeedMetrics metrics;
  metrics.seed = log.seed();
  const std::vector<int>& grid = exp.horizon_grid;
  metrics.max_regret.assign(grid.size(), -std::numeric_limits<double>::infinity());
  for (int i = 0; i < exp.oracle->n_players(); ++i) {
    RegretReport r = regret(log, *exp.oracle, i, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      metrics.max_regret[k] = std::max(metrics.max_regret[k], r.regret[k]);
      if (r.fallback[k]) metrics.comparator_fallback = true;
    }
    metrics.per_player.push_back(std::move(r));
  }
  metrics.max_regret_avg.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    metrics.max_regret_avg[k] = metrics.max_regret[k] / static_cast<double>(grid[k]);
  metrics.violations = violation(log, *exp.oracle, grid);
  metrics.consensus = consensus_residual(log, *exp.graph, exp.oracle->bounds());
  if (exp.limit) {
    metrics.tracking = tracking_error(log, *exp.limit, false);
    metrics.tracking_avg = tracking_error(log, *exp.limit, true);
  }
  return metrics;
}

struct RunResult {
  RunManifest manifest;
  std::vector<TrajectoryLog> logs;
  std::vector<SeedMetrics> metrics;
  nlohmann::json report;
};

namespace detail {

inline nlohmann::json seed_report(const Experiment& exp, const SeedMetrics& m) {
  nlohmann::json j;
  j["seed"] = m.seed;
  j["final"] = {{"max_regret_avg", m.max_regret_avg.back()},
                {"violation_avg", m.violations.r_g_avg.back()}};
  SlopeFitWithEps reg_fit = fit_with_epsilon(exp.horizon_grid, m.max_regret);
  SlopeFitWithEps vio_fit = fit_with_epsilon(exp.horizon_grid, m.violations.r_g);
  j["slopes"] = {{"regret", reg_fit.slope},     {"regret_r2", reg_fit.r2},
                 {"regret_eps", reg_fit.epsilon}, {"violation", vio_fit.slope},
                 {"violation_r2", vio_fit.r2},  {"violation_eps", vio_fit.epsilon}};
  j["comparator_fallback"] = m.comparator_fallback;
  if (!m.tracking.empty()) {
    j["tracking_final"] = m.tracking.back();
    j["tracking_avg_final"] = m.tracking_avg.back();
  }
  return j;
}

inline std::vector<double> mean_curves(const std::vector<SeedMetrics>& all,
                                       const std::vector<double> SeedMetrics::*member) {
  std::vector<double> mean((all.front().*member).size(), 0.0);
  for (const auto& m : all)
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (m.*member)[k];
  for (double& v : mean) v /= static_cast<double>(all.size());
  return mean;
}

inline std::vector<double> mean_violation_curves(const std::vector<SeedMetrics>& all,
                                                 bool averaged) {
  std::vector<double> mean(all.front().violations.r_g.size(), 0.0);
  for (const auto& m : all) {
    const std::vector<double>& src = averaged ? m.violations.r_g_avg : m.violations.r_g;
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += src[k];
  }
  for (double& v : mean) v /= static_cast<double>(all.size());
  return mean;
}

}  // namespace detail

inline nlohmann::json assemble_report(const Experiment& exp,
                                      const std::vector<SeedMetrics>& metrics,
                                      const std::vector<TrajectoryLog>& logs,
                                      const std::string& config_hash) {
  nlohmann::json report;
  report["schema_version"] = 1;
  report["library_version"] = kVersion;
  report["config_hash"] = config_hash;
  report["horizon_grid"] = exp.horizon_grid;
  report["seed_count"] = metrics.size();
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& m : metrics) per_seed.push_back(detail::seed_report(exp, m));
  report["per_seed"] = per_seed;
  if (metrics.size() > 1) {
    // Expected-value estimates: arithmetic means across seeds.
    std::vector<double> mean_reg = detail::mean_curves(metrics, &SeedMetrics::max_regret);
    std::vector<double> mean_reg_avg =
        detail::mean_curves(metrics, &SeedMetrics::max_regret_avg);
    std::vector<double> mean_rg = detail::mean_violation_curves(metrics, false);
    std::vector<double> mean_rg_avg = detail::mean_violation_curves(metrics, true);
    SlopeFitWithEps reg_fit = fit_with_epsilon(exp.horizon_grid, mean_reg);
    SlopeFitWithEps vio_fit = fit_with_epsilon(exp.horizon_grid, mean_rg);
    report["aggregate"] = {
        {"mean_max_regret", mean_reg},
        {"mean_max_regret_avg", mean_reg_avg},
        {"mean_violation", mean_rg},
        {"mean_violation_avg", mean_rg_avg},
        {"regret_slope", reg_fit.slope},
        {"regret_r2", reg_fit.r2},
        {"violation_slope", vio_fit.slope},
        {"violation_r2", vio_fit.r2},
    };
  }
  std::string invariants = "ok";
  try {
    for (const auto& log : logs)
      verify_log_invariants(log, *exp.graph, exp.oracle->bounds(), exp.sets);
  } catch (const InvariantViolationError& e) {
    invariants = std::string("violated: ") + e.what();
  }
  report["invariants"] = invariants;
  return report;
}

/// Runs every seed, computes the metric suite and assembles the report
/// document. Pure in-memory variant; write_run persists the artifacts.
inline RunResult execute_experiment(const Experiment& exp, unsigned n_threads = 1) {
  RunResult result;
  for (std::uint64_t seed : exp.seeds) {
    RunOptions opt = exp.options_for(seed, n_threads);
    TrajectoryLog log =
        exp.learner == LearnerKind::Bandit
            ? [&] {
                BanditConfig bandit = *exp.bandit;
                bandit.rng_seed = seed;
                return run_bandit(*exp.oracle, *exp.graph, *exp.schedule, bandit, exp.maps,
                                  exp.sets, opt);
              }()
            : run(*exp.oracle, *exp.graph, *exp.schedule, exp.maps, exp.sets, opt);
    result.metrics.push_back(compute_seed_metrics(log, exp));
    result.logs.push_back(std::move(log));
  }

  RunManifest manifest;
  manifest.library_version = kVersion;
  manifest.config = exp.config;
  manifest.config_hash = to_hex(fnv1a64(exp.config.dump()));
  manifest.learner = exp.learner == LearnerKind::Bandit ? "bandit" : "full";
  manifest.horizon = exp.horizon;
  manifest.sigma = exp.graph->sigma();
  manifest.L = exp.oracle->bounds().L;
  manifest.M = exp.oracle->bounds().M;
  manifest.mu_limit = exp.oracle->bounds().mu_limit;
  manifest.lambda_cap = exp.oracle->bounds().lambda_cap;
  manifest.rng = rng_description();
  manifest.seeds = exp.seeds;
  for (const auto& log : result.logs)
    manifest.logs.emplace_back("traj_seed" + std::to_string(log.seed()) + ".csv",
                               to_hex(fnv1a64(log.to_csv_string())));
  result.manifest = std::move(manifest);
  result.report =
      assemble_report(exp, result.metrics, result.logs, result.manifest.config_hash);
  return result;
}

namespace detail {

inline std::string curves_csv(const Experiment& exp, const SeedMetrics& m) {
  std::ostringstream out;
  out << "T,max_regret,max_regret_avg,violation,violation_avg";
  int players = exp.oracle->n_players();
  for (int i = 1; i <= players; ++i) out << ",regret_" << i;
  out << "\n";
  for (std::size_t k = 0; k < exp.horizon_grid.size(); ++k) {
    out << exp.horizon_grid[k] << ',' << format_double(m.max_regret[k]) << ','
        << format_double(m.max_regret_avg[k]) << ',' << format_double(m.violations.r_g[k])
        << ',' << format_double(m.violations.r_g_avg[k]);
    for (const auto& r : m.per_player) out << ',' << format_double(r.regret[k]);
    out << "\n";
  }
  return out.str();
}

inline std::string rounds_csv(const SeedMetrics& m) {
  std::ostringstream out;
  bool tracked = !m.tracking.empty();
  out << "t,consensus_residual,consensus_bound";
  if (tracked) out << ",tracking_error,tracking_avg_sq";
  out << "\n";
  for (std::size_t t = 0; t < m.consensus.residual.size(); ++t) {
    out << (t + 1) << ',' << format_double(m.consensus.residual[t]) << ','
        << format_double(m.consensus.bound[t]);
    if (tracked)
      out << ',' << format_double(m.tracking[t]) << ',' << format_double(m.tracking_avg[t]);
    out << "\n";
  }
  return out.str();
}

}  // namespace detail

/// Persists manifest, per-seed trajectory CSVs, metric curves and the report.
inline void write_run(const RunResult& result, const Experiment& exp,
                      const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  for (std::size_t s = 0; s < result.logs.size(); ++s)
    write_file(path(result.manifest.logs[s].first), result.logs[s].to_csv_string());
  write_file(path("manifest.json"), result.manifest.to_json().dump(2) + "\n");
  write_file(path("report.json"), result.report.dump(2) + "\n");
  for (std::size_t s = 0; s < result.metrics.size(); ++s) {
    const SeedMetrics& m = result.metrics[s];
    write_file(path("curves_seed" + std::to_string(m.seed) + ".csv"),
               detail::curves_csv(exp, m));
    write_file(path("rounds_seed" + std::to_string(m.seed) + ".csv"),
               detail::rounds_csv(m));
  }
  if (result.metrics.size() > 1) {
    std::vector<double> mean_reg = detail::mean_curves(result.metrics, &SeedMetrics::max_regret);
    std::vector<double> mean_reg_avg =
        detail::mean_curves(result.metrics, &SeedMetrics::max_regret_avg);
    std::vector<double> mean_rg = detail::mean_violation_curves(result.metrics, false);
    std::vector<double> mean_rg_avg = detail::mean_violation_curves(result.metrics, true);
    std::ostringstream out;
    out << "T,mean_max_regret,mean_max_regret_avg,mean_violation,mean_violation_avg\n";
    for (std::size_t k = 0; k < exp.horizon_grid.size(); ++k)
      out << exp.horizon_grid[k] << ',' << format_double(mean_reg[k]) << ','
          << format_double(mean_reg_avg[k]) << ',' << format_double(mean_rg[k]) << ','
          << format_double(mean_rg_avg[k]) << "\n";
    write_file(path("curves_mean.csv"), out.str());
  }
}

/// Loads a run directory, verifies the manifest hashes, rebuilds the
/// experiment from the embedded config and recomputes every metric from the
/// logs alone (no reruns).
inline RunResult report_run(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  if (!fs::exists(path("manifest.json")))
    throw LogIntegrityError("missing manifest.json in " + dir);
  nlohmann::json manifest_json;
  try {
    manifest_json = nlohmann::json::parse(read_file(path("manifest.json")));
  } catch (const nlohmann::json::exception& e) {
    throw LogIntegrityError(std::string("corrupt manifest: ") + e.what());
  }
  RunManifest manifest = RunManifest::from_json(manifest_json);
  if (to_hex(fnv1a64(manifest.config.dump())) != manifest.config_hash)
    throw LogIntegrityError("config hash mismatch in manifest");

  Experiment exp = build_experiment(manifest.config);
  RunResult result;
  for (const auto& [file, hash] : manifest.logs) {
    std::string content = read_file(path(file));
    if (to_hex(fnv1a64(content)) != hash)
      throw LogIntegrityError("trajectory hash mismatch: " + file);
    std::istringstream in(content);
    result.logs.push_back(TrajectoryLog::from_csv(in));
  }
  for (const auto& log : result.logs)
    result.metrics.push_back(compute_seed_metrics(log, exp));

  result.report = assemble_report(exp, result.metrics, result.logs, manifest.config_hash);
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace ogmd
