#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/error.hpp"

namespace ogmd {

/// Fixed undirected communication topology over N players with a symmetric
/// doubly stochastic weight matrix A. Exposes the dual-mixing operator
/// λ̃_i = Σ_j a_ij λ_j and the mixing contraction factor
/// σ = ‖A − (1/N)·11ᵀ‖₂, cached at construction.
///
/// Immutable after construction; safe to share across threads.
class CommGraph {
 public:
  /// Validates every structural requirement and computes σ.
  /// Throws NotSymmetricError, NotStochasticError, ZeroDiagonalError or
  /// DisconnectedError, naming the first failed assumption.
  static CommGraph build(const Eigen::MatrixXd& weights) {
    const Eigen::Index n = weights.rows();
    if (n == 0 || weights.cols() != n)
      throw NotStochasticError("weight matrix must be square and non-empty");
    if (!weights.allFinite())
      throw NotStochasticError("weight matrix has non-finite entries");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(weights(i, j) - weights(j, i)) > kTol)
          throw NotSymmetricError("a_ij != a_ji at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
        if (weights(i, j) < -kTol)
          throw NotStochasticError("negative weight at (" + std::to_string(i) + "," +
                                   std::to_string(j) + ")");
      }
      if (std::abs(weights.row(i).sum() - 1.0) > kTol)
        throw NotStochasticError("row " + std::to_string(i) + " does not sum to 1");
      if (weights(i, i) <= 0.0)
        throw ZeroDiagonalError("a_ii must be positive at i=" + std::to_string(i));
    }
    check_connected(weights);

    // A is symmetric, so the spectral norm of A - (1/N)11^T is the largest
    // eigenvalue magnitude of that (symmetric) matrix.
    Eigen::MatrixXd centered =
        weights - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered, Eigen::EigenvaluesOnly);
    double sigma = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (sigma < 0.0) sigma = 0.0;
    if (sigma < kTol) sigma = 0.0;  // complete uniform graph: A equals its mean projector
    if (sigma >= 1.0)
      throw NotStochasticError("mixing matrix is not contracting (sigma >= 1)");
    return CommGraph(weights, sigma);
  }

  /// Uniform complete graph A = (1/N)·11ᵀ; σ = 0.
  static CommGraph complete(int n_players) {
    require_players(n_players);
    double w = 1.0 / static_cast<double>(n_players);
    return build(Eigen::MatrixXd::Constant(n_players, n_players, w));
  }

  /// Cycle graph with Metropolis-Hastings weights (all degrees 2, so every
  /// edge gets 1/3 and the remainder stays on the diagonal).
  static CommGraph ring(int n_players) {
    require_players(n_players);
    if (n_players == 2) return complete(2);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_players, n_players);
    for (int i = 0; i < n_players; ++i) {
      int next = (i + 1) % n_players;
      a(i, next) = a(next, i) = 1.0 / 3.0;
    }
    for (int i = 0; i < n_players; ++i) a(i, i) = 1.0 - a.row(i).sum();
    return build(a);
  }

  /// Star graph (hub = node 0) with Metropolis-Hastings weights.
  static CommGraph star_metropolis(int n_players) {
    require_players(n_players);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_players, n_players);
    double edge = 1.0 / static_cast<double>(n_players);  // 1/(1 + max degree)
    for (int i = 1; i < n_players; ++i) a(0, i) = a(i, 0) = edge;
    for (int i = 0; i < n_players; ++i) a(i, i) = 1.0 - a.row(i).sum();
    return build(a);
  }

  static CommGraph by_name(const std::string& kind, int n_players) {
    if (kind == "complete") return complete(n_players);
    if (kind == "ring") return ring(n_players);
    if (kind == "star-metropolis") return star_metropolis(n_players);
    throw ConfigError("unknown graph generator: " + kind);
  }

  int n_players() const { return static_cast<int>(a_.rows()); }
  const Eigen::MatrixXd& weights() const { return a_; }
  double sigma() const { return sigma_; }

  /// Dual mixing: out_i = Σ_j a_ij · duals_j. Preserves nonnegativity and,
  /// because A is doubly stochastic, the mean of the inputs.
  std::vector<Eigen::VectorXd> mix_duals(const std::vector<Eigen::VectorXd>& duals) const {
    std::vector<Eigen::VectorXd> out;
    mix_duals_into(duals, out);
    return out;
  }

  void mix_duals_into(const std::vector<Eigen::VectorXd>& duals,
                      std::vector<Eigen::VectorXd>& out) const {
    const int n = n_players();
    if (static_cast<int>(duals.size()) != n)
      throw DimensionMismatchError("mix_duals: expected " + std::to_string(n) +
                                   " dual vectors, got " + std::to_string(duals.size()));
    const Eigen::Index m = duals.empty() ? 0 : duals.front().size();
    for (const auto& d : duals)
      if (d.size() != m)
        throw DimensionMismatchError("mix_duals: dual vectors must share one dimension");
    out.assign(n, Eigen::VectorXd::Zero(m));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
      for (int j = 0; j < n; ++j) acc.noalias() += a_(i, j) * duals[j];
      out[i] = std::move(acc);
    }
  }

 private:
  static constexpr double kTol = 1e-12;

  CommGraph(Eigen::MatrixXd a, double sigma) : a_(std::move(a)), sigma_(sigma) {}

  static void require_players(int n_players) {
    if (n_players < 2) throw ConfigError("graph generators need at least 2 players");
  }

  // BFS over the support of off-diagonal entries; entries <= kTol are treated
  // as absent edges because floating weights make exact-zero tests fragile.
  static void check_connected(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> frontier{0};
    seen[0] = 1;
    while (!frontier.empty()) {
      Eigen::Index u = frontier.back();
      frontier.pop_back();
      for (Eigen::Index v = 0; v < n; ++v) {
        if (v == u || seen[v]) continue;
        if (a(u, v) > kTol) {
          seen[v] = 1;
          frontier.push_back(v);
        }
      }
    }
    for (Eigen::Index v = 0; v < n; ++v)
      if (!seen[v])
        throw DisconnectedError("support graph is not connected (node " +
                                std::to_string(v) + " unreachable)");
  }

  Eigen::MatrixXd a_;
  double sigma_;
};

}  // namespace ogmd
