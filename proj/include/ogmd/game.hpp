#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/error.hpp"
#include "ogmd/mirror.hpp"
#include "ogmd/rng.hpp"

namespace ogmd {

/// Joint strategy x = (x_1, ..., x_N), one block per player.
using ActionProfile = std::vector<Eigen::VectorXd>;

inline Eigen::VectorXd stack_profile(const ActionProfile& x) {
  Eigen::Index n = 0;
  for (const auto& b : x) n += b.size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const auto& b : x) {
    out.segment(at, b.size()) = b;
    at += b.size();
  }
  return out;
}

inline ActionProfile unstack_profile(const Eigen::VectorXd& v, const std::vector<int>& dims) {
  ActionProfile out;
  out.reserve(dims.size());
  Eigen::Index at = 0;
  for (int d : dims) {
    out.push_back(v.segment(at, d));
    at += d;
  }
  if (at != v.size()) throw DimensionMismatchError("unstack_profile: dimension mismatch");
  return out;
}

/// Uniform bounds of the game family: L dominates actions, cost values and
/// local constraint values; M dominates cost gradients and constraint
/// Jacobians; mu_limit is the strong-monotonicity modulus of the limit game
/// (0 when there is none); lambda_cap is the configured dual bound used only
/// in diagnostics.
struct GameBounds {
  double L = 0.0;
  double M = 0.0;
  double mu_limit = 0.0;
  double lambda_cap = 10.0;

  void validate() const {
    if (!(L > 0.0) || !(M > 0.0) || mu_limit < 0.0 || !(lambda_cap > 0.0))
      throw ConfigError("game bounds need L > 0, M > 0, mu_limit >= 0, lambda_cap > 0");
  }
};

/// Call counters for the zeroth-order purity checks.
struct OracleCallCounts {
  std::atomic<long long> cost_value{0};
  std::atomic<long long> cost_grad{0};
  std::atomic<long long> constraint_value{0};
  std::atomic<long long> constraint_jacobian{0};
};

/// Time-indexed game oracle: costs J_{i,t} with partial gradients, local
/// constraint maps g_{i,t} with Jacobians, per-player feasible sets and the
/// declared uniform bounds. The coupled constraint is assembled by summation,
/// g_t(x) = Σ_i g_{i,t}(x_i) ≤ 0.
///
/// Implementations are pure in (i, t, x); evaluations may run concurrently.
class GameOracle {
 public:
  virtual ~GameOracle() = default;
  GameOracle(const GameOracle&) = delete;
  GameOracle& operator=(const GameOracle&) = delete;

  int n_players() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& action_dims() const { return dims_; }
  int action_dim_total() const { return dim_total_; }
  int constraint_dim() const { return m_; }
  const std::vector<FeasibleSet>& feasible_sets() const { return sets_; }
  const GameBounds& bounds() const { return bounds_; }

  /// J_{i,t}(x).
  double cost_value(int i, int t, const ActionProfile& x) const {
    check_player(i);
    check_profile(x);
    counts_.cost_value.fetch_add(1, std::memory_order_relaxed);
    return do_cost_value(i, t, x);
  }

  /// ∇_i J_{i,t}(x) ∈ R^{n_i}.
  Eigen::VectorXd cost_grad(int i, int t, const ActionProfile& x) const {
    check_player(i);
    check_profile(x);
    counts_.cost_grad.fetch_add(1, std::memory_order_relaxed);
    return do_cost_grad(i, t, x);
  }

  /// g_{i,t}(x_i) ∈ R^m.
  Eigen::VectorXd constraint_value(int i, int t, const Eigen::VectorXd& xi) const {
    check_player(i);
    counts_.constraint_value.fetch_add(1, std::memory_order_relaxed);
    return do_constraint_value(i, t, xi);
  }

  /// ∇g_{i,t}(x_i) ∈ R^{n_i × m}; column j is the gradient of component j.
  Eigen::MatrixXd constraint_jacobian(int i, int t, const Eigen::VectorXd& xi) const {
    check_player(i);
    counts_.constraint_jacobian.fetch_add(1, std::memory_order_relaxed);
    return do_constraint_jacobian(i, t, xi);
  }

  /// g_t(x) = Σ_i g_{i,t}(x_i).
  Eigen::VectorXd coupled_constraint(int t, const ActionProfile& x) const {
    check_profile(x);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m_);
    for (int i = 0; i < n_players(); ++i) g += constraint_value(i, t, x[i]);
    return g;
  }

  /// True when every g_{i,t} is affine in x_i (enables the exact hindsight
  /// comparator set).
  virtual bool constraints_affine() const { return false; }

  const OracleCallCounts& call_counts() const { return counts_; }
  void reset_call_counts() const {
    counts_.cost_value = 0;
    counts_.cost_grad = 0;
    counts_.constraint_value = 0;
    counts_.constraint_jacobian = 0;
  }

 protected:
  GameOracle(std::vector<int> dims, int constraint_dim, std::vector<FeasibleSet> sets,
             GameBounds bounds)
      : dims_(std::move(dims)), m_(constraint_dim), sets_(std::move(sets)),
        bounds_(bounds) {
    if (dims_.empty() || m_ <= 0 || sets_.size() != dims_.size())
      throw ConfigError("oracle needs players, constraint dim and one set per player");
    for (std::size_t i = 0; i < dims_.size(); ++i)
      if (sets_[i].dimension() != dims_[i])
        throw DimensionMismatchError("feasible set dimension differs from action dim");
    dim_total_ = 0;
    for (int d : dims_) dim_total_ += d;
    bounds_.validate();
  }

  virtual double do_cost_value(int i, int t, const ActionProfile& x) const = 0;
  virtual Eigen::VectorXd do_cost_grad(int i, int t, const ActionProfile& x) const = 0;
  virtual Eigen::VectorXd do_constraint_value(int i, int t, const Eigen::VectorXd& xi) const = 0;
  virtual Eigen::MatrixXd do_constraint_jacobian(int i, int t, const Eigen::VectorXd& xi) const = 0;

 private:
  void check_player(int i) const {
    if (i < 0 || i >= n_players())
      throw DimensionMismatchError("player index out of range: " + std::to_string(i));
  }
  void check_profile(const ActionProfile& x) const {
    if (static_cast<int>(x.size()) != n_players())
      throw DimensionMismatchError("action profile has wrong player count");
  }

  std::vector<int> dims_;
  int m_ = 0;
  int dim_total_ = 0;
  std::vector<FeasibleSet> sets_;
  GameBounds bounds_;
  mutable OracleCallCounts counts_;
};

/// Stationary strongly monotone game the online game stabilizes to.
/// The wrapped oracle ignores t.
struct LimitGame {
  std::shared_ptr<const GameOracle> oracle;
  double mu = 0.0;
  std::optional<ActionProfile> known_gne;

  /// Stacked pseudo-gradient F(x) = col(∇_1 J_1(x), ..., ∇_N J_N(x)).
  Eigen::VectorXd pseudo_gradient(const ActionProfile& x) const {
    Eigen::VectorXd f(oracle->action_dim_total());
    Eigen::Index at = 0;
    for (int i = 0; i < oracle->n_players(); ++i) {
      Eigen::VectorXd gi = oracle->cost_grad(i, 1, x);
      f.segment(at, gi.size()) = gi;
      at += gi.size();
    }
    return f;
  }

  Eigen::VectorXd coupled_constraint(const ActionProfile& x) const {
    return oracle->coupled_constraint(1, x);
  }
};

/// Time-varying Nash-Cournot benchmark: N firms with scalar production
/// x_i ∈ [0, 30], production cost x_i(s_t + 1), demand price
/// 22 + i/9 − 0.5·i·s_t − Σ_j x_j and market-capacity coupling
/// Σ_i x_i ≤ Σ_i (2 + s_t), where s_t = sin(t/12) for the oscillating
/// variant, sin(12/t) for the converging one and 0 for its limit.
class NashCournotOracle final : public GameOracle {
 public:
  enum class Variant { Oscillating, Converging, Limit };

  NashCournotOracle(Variant variant, int n_players)
      : GameOracle(std::vector<int>(check_n(n_players), 1), 1,
                   std::vector<FeasibleSet>(static_cast<std::size_t>(n_players),
                                            FeasibleSet::box1d(0.0, 30.0)),
                   compute_bounds(variant, n_players)),
        variant_(variant) {}

  Variant variant() const { return variant_; }

  double wave(int t) const {
    switch (variant_) {
      case Variant::Oscillating:
        return std::sin(static_cast<double>(t) / 12.0);
      case Variant::Converging:
        return std::sin(12.0 / static_cast<double>(t));
      case Variant::Limit:
        return 0.0;
    }
    return 0.0;
  }

  bool constraints_affine() const override { return true; }

  /// Centralized GNE formula for the paper's 20-firm instance:
  /// x*_{i,t} = P_[0,30](ξ_{i,t}), ξ_{i,t} = (i−1)/9 + (5 − 1/21 − i/2)·s_t,
  /// with the firm number i counted from 1.
  double closed_form_gne(int firm, int t) const {
    if (firm < 1 || firm > n_players())
      throw DimensionMismatchError("closed_form_gne: firm number out of range");
    double s = wave(t);
    double xi = (static_cast<double>(firm) - 1.0) / 9.0 +
                (5.0 - 1.0 / 21.0 - static_cast<double>(firm) / 2.0) * s;
    return std::clamp(xi, 0.0, 30.0);
  }

  /// GNE of the limit game (s → 0): x*_i = (i−1)/9. Exact for N = 20.
  double closed_form_limit_gne(int firm) const {
    if (firm < 1 || firm > n_players())
      throw DimensionMismatchError("closed_form_limit_gne: firm number out of range");
    return std::clamp((static_cast<double>(firm) - 1.0) / 9.0, 0.0, 30.0);
  }

  /// The formula above solves the variational problem only for the paper's
  /// N = 20 instance; for other sizes the brute-force solver is authoritative.
  bool gne_formula_exact() const { return n_players() == 20; }

  /// Strongly monotone limit of the converging variant (μ = 1; the
  /// pseudo-gradient difference map is I + 11ᵀ).
  LimitGame limit_game() const {
    if (variant_ == Variant::Oscillating)
      throw ConfigError("the oscillating variant does not stabilize to a limit game");
    LimitGame limit;
    limit.oracle = std::make_shared<NashCournotOracle>(Variant::Limit, n_players());
    limit.mu = 1.0;
    if (gne_formula_exact()) {
      ActionProfile gne(static_cast<std::size_t>(n_players()));
      for (int i = 0; i < n_players(); ++i) {
        Eigen::VectorXd b(1);
        b << closed_form_limit_gne(i + 1);
        gne[static_cast<std::size_t>(i)] = b;
      }
      limit.known_gne = std::move(gne);
    }
    return limit;
  }

 protected:
  double do_cost_value(int i, int t, const ActionProfile& x) const override {
    double s = wave(t);
    double xi = x[static_cast<std::size_t>(i)][0];
    return xi * (s + 1.0) - xi * demand_price(i, s, profile_sum(x));
  }

  Eigen::VectorXd do_cost_grad(int i, int t, const ActionProfile& x) const override {
    double s = wave(t);
    double xi = x[static_cast<std::size_t>(i)][0];
    Eigen::VectorXd g(1);
    g << (s + 1.0) - demand_price(i, s, profile_sum(x)) + xi;
    return g;
  }

  Eigen::VectorXd do_constraint_value(int i, int t, const Eigen::VectorXd& xi) const override {
    (void)i;
    Eigen::VectorXd g(1);
    g << xi[0] - (2.0 + wave(t));
    return g;
  }

  Eigen::MatrixXd do_constraint_jacobian(int i, int t, const Eigen::VectorXd& xi) const override {
    (void)i;
    (void)t;
    (void)xi;
    return Eigen::MatrixXd::Ones(1, 1);
  }

 private:
  static int check_n(int n_players) {
    if (n_players < 2) throw ConfigError("nash-cournot needs at least 2 players");
    return n_players;
  }

  // Demand price seen by firm i (0-based index) at wave value s.
  double demand_price(int i, double s, double total) const {
    double firm = static_cast<double>(i + 1);
    return 22.0 + firm / 9.0 - 0.5 * firm * s - total;
  }

  static double profile_sum(const ActionProfile& x) {
    double total = 0.0;
    for (const auto& b : x) total += b[0];
    return total;
  }

  // L and M from exact corner maxima: the cost is affine in s and in every
  // x_j (j != i) and convex quadratic in x_i, so suprema over the box and
  // s ∈ [−1, 1] sit at corner combinations.
  static GameBounds compute_bounds(Variant variant, int n_players) {
    double n = static_cast<double>(n_players);
    double cost_sup = 0.0, grad_sup = 0.0;
    for (int firm = 1; firm <= n_players; ++firm) {
      for (double s : {-1.0, 1.0}) {
        for (double xi : {0.0, 30.0}) {
          for (double rest : {0.0, 30.0 * (n - 1.0)}) {
            double price = 22.0 + firm / 9.0 - 0.5 * firm * s - (xi + rest);
            cost_sup = std::max(cost_sup, std::abs(xi * (s + 1.0) - xi * price));
            grad_sup = std::max(grad_sup, std::abs((s + 1.0) - price + xi));
          }
        }
      }
    }
    GameBounds b;
    b.L = 1.01 * std::max({30.0, 30.0 * std::sqrt(n), cost_sup, 33.0});
    b.M = 1.01 * std::max(grad_sup, 1.0);
    b.mu_limit = variant == Variant::Oscillating ? 0.0 : 1.0;
    b.lambda_cap = 10.0;
    return b;
  }

  Variant variant_;
};

/// Declarative quadratic game: costs
///   J_{i,t}(x) = ½ xᵀ Q_i x + (q0_i + s_t·q1_i)ᵀ x,  s_t = sin(t/period),
/// and affine local constraints g_{i,t}(x_i) = E_i x_i − (b0_i + s_t·b1_i),
/// over per-player boxes. Q_i must be symmetric with a positive semidefinite
/// (i,i) block so J_{i,t}(·, x_{−i}) stays convex.
class QuadraticGameOracle final : public GameOracle {
 public:
  struct Spec {
    std::vector<int> dims;                  // n_i
    int constraint_dim = 1;                 // m
    double period = 12.0;                   // s_t = sin(t/period); 0 -> stationary
    std::vector<Eigen::MatrixXd> q_mat;     // Q_i, n x n
    std::vector<Eigen::VectorXd> q0, q1;    // linear terms, R^n
    std::vector<Eigen::MatrixXd> e_mat;     // E_i, m x n_i
    std::vector<Eigen::VectorXd> b0, b1;    // offsets, R^m
    std::vector<Eigen::VectorXd> lower, upper;  // boxes
    double mu_limit = 0.0;
    double lambda_cap = 10.0;
    std::optional<double> bound_l, bound_m;  // overrides for the sampled estimates
  };

  explicit QuadraticGameOracle(Spec spec)
      : GameOracle(spec.dims, spec.constraint_dim, make_sets(spec), make_bounds(spec)),
        spec_(std::move(spec)) {
    validate_spec();
  }

  bool constraints_affine() const override { return true; }
  double wave(int t) const {
    return spec_.period == 0.0 ? 0.0 : std::sin(static_cast<double>(t) / spec_.period);
  }

  LimitGame limit_game() const {
    if (!(spec_.mu_limit > 0.0))
      throw ConfigError("quadratic game has no declared strongly monotone limit");
    Spec limit = spec_;
    limit.period = 0.0;
    LimitGame out;
    out.oracle = std::make_shared<QuadraticGameOracle>(std::move(limit));
    out.mu = spec_.mu_limit;
    return out;
  }

 protected:
  double do_cost_value(int i, int t, const ActionProfile& x) const override {
    Eigen::VectorXd v = stack_profile(x);
    Eigen::VectorXd lin = spec_.q0[static_cast<std::size_t>(i)] +
                          wave(t) * spec_.q1[static_cast<std::size_t>(i)];
    return 0.5 * v.dot(spec_.q_mat[static_cast<std::size_t>(i)] * v) + lin.dot(v);
  }

  Eigen::VectorXd do_cost_grad(int i, int t, const ActionProfile& x) const override {
    Eigen::VectorXd v = stack_profile(x);
    Eigen::VectorXd full = spec_.q_mat[static_cast<std::size_t>(i)] * v +
                           spec_.q0[static_cast<std::size_t>(i)] +
                           wave(t) * spec_.q1[static_cast<std::size_t>(i)];
    return full.segment(block_offset(i), action_dims()[static_cast<std::size_t>(i)]);
  }

  Eigen::VectorXd do_constraint_value(int i, int t, const Eigen::VectorXd& xi) const override {
    return spec_.e_mat[static_cast<std::size_t>(i)] * xi -
           (spec_.b0[static_cast<std::size_t>(i)] +
            wave(t) * spec_.b1[static_cast<std::size_t>(i)]);
  }

  Eigen::MatrixXd do_constraint_jacobian(int i, int t, const Eigen::VectorXd& xi) const override {
    (void)t;
    (void)xi;
    return spec_.e_mat[static_cast<std::size_t>(i)].transpose();
  }

 private:
  Eigen::Index block_offset(int i) const {
    Eigen::Index at = 0;
    for (int j = 0; j < i; ++j) at += action_dims()[static_cast<std::size_t>(j)];
    return at;
  }

  static std::vector<FeasibleSet> make_sets(const Spec& spec) {
    if (spec.lower.size() != spec.dims.size() || spec.upper.size() != spec.dims.size())
      throw ConfigError("quadratic game: one box per player required");
    std::vector<FeasibleSet> sets;
    sets.reserve(spec.dims.size());
    for (std::size_t i = 0; i < spec.dims.size(); ++i)
      sets.push_back(FeasibleSet::box(spec.lower[i], spec.upper[i]));
    return sets;
  }

  // Sampled sup estimates with margin; overridable through the spec.
  static GameBounds make_bounds(const Spec& spec) {
    std::vector<FeasibleSet> sets = make_sets(spec);
    int n_players = static_cast<int>(spec.dims.size());
    SplitMix64 rng(0x51ab5eedULL);
    double cost_sup = 1e-9, grad_sup = 1e-9, act_sup = 1e-9;
    for (int trial = 0; trial < 512; ++trial) {
      double s = trial % 2 == 0 ? -1.0 : 1.0;
      if (trial >= 2) s = rng.uniform(-1.0, 1.0);
      ActionProfile x;
      for (int i = 0; i < n_players; ++i) {
        Eigen::VectorXd xi(spec.dims[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < xi.size(); ++j) {
          const auto& set = sets[static_cast<std::size_t>(i)];
          xi[j] = rng.next_u01() < 0.5
                      ? (rng.next_u01() < 0.5 ? set.box_lower()[j] : set.box_upper()[j])
                      : rng.uniform(set.box_lower()[j], set.box_upper()[j]);
        }
        act_sup = std::max(act_sup, xi.norm());
        x.push_back(std::move(xi));
      }
      Eigen::VectorXd v = stack_profile(x);
      Eigen::Index at = 0;
      for (int i = 0; i < n_players; ++i) {
        std::size_t ii = static_cast<std::size_t>(i);
        Eigen::VectorXd lin = spec.q0[ii] + s * spec.q1[ii];
        cost_sup = std::max(cost_sup, std::abs(0.5 * v.dot(spec.q_mat[ii] * v) + lin.dot(v)));
        Eigen::VectorXd full = spec.q_mat[ii] * v + lin;
        grad_sup = std::max(grad_sup,
                            full.segment(at, spec.dims[ii]).norm());
        cost_sup = std::max(cost_sup, (spec.e_mat[ii] * v.segment(at, spec.dims[ii]) -
                                       (spec.b0[ii] + s * spec.b1[ii]))
                                          .norm());
        grad_sup = std::max(grad_sup, spec.e_mat[ii].norm());
        at += spec.dims[ii];
      }
    }
    GameBounds b;
    b.L = spec.bound_l.value_or(1.1 * std::max(cost_sup, act_sup * 1.05));
    b.M = spec.bound_m.value_or(1.1 * grad_sup);
    b.mu_limit = spec.mu_limit;
    b.lambda_cap = spec.lambda_cap;
    return b;
  }

  void validate_spec() {
    std::size_t np = spec_.dims.size();
    if (spec_.q_mat.size() != np || spec_.q0.size() != np || spec_.q1.size() != np ||
        spec_.e_mat.size() != np || spec_.b0.size() != np || spec_.b1.size() != np)
      throw ConfigError("quadratic game: per-player coefficient counts differ");
    int n = action_dim_total();
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < np; ++i) {
      if (spec_.q_mat[i].rows() != n || spec_.q_mat[i].cols() != n)
        throw ConfigError("quadratic game: Q_i must be n x n over the stacked profile");
      if (!spec_.q_mat[i].isApprox(spec_.q_mat[i].transpose(), 1e-10))
        throw ConfigError("quadratic game: Q_i must be symmetric");
      Eigen::MatrixXd own_block =
          spec_.q_mat[i].block(at, at, spec_.dims[i], spec_.dims[i]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(own_block, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-10)
        throw ConfigError("quadratic game: own-block of Q_i must be positive semidefinite");
      if (spec_.q0[i].size() != n || spec_.q1[i].size() != n)
        throw ConfigError("quadratic game: linear terms must have the stacked dimension");
      if (spec_.e_mat[i].rows() != constraint_dim() || spec_.e_mat[i].cols() != spec_.dims[i])
        throw ConfigError("quadratic game: E_i must be m x n_i");
      if (spec_.b0[i].size() != constraint_dim() || spec_.b1[i].size() != constraint_dim())
        throw ConfigError("quadratic game: constraint offsets must have dimension m");
      at += spec_.dims[i];
    }
  }

  Spec spec_;
};

}  // namespace ogmd
