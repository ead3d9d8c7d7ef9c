#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/error.hpp"
#include "ogmd/game.hpp"
#include "ogmd/mirror.hpp"
#include "ogmd/rng.hpp"

namespace ogmd {

struct GneSolveOptions {
  long long max_iters = 500'000;
  std::uint64_t seed = 1;
  bool randomize_start = false;
};

namespace detail {

/// Affine representation a_k·x ≤ b_k (stacked coordinates) of the coupled
/// constraint, recovered from Jacobians and values at the sets' interior
/// points. Only valid when the oracle declares affine constraint maps.
struct CoupledHalfspaces {
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> offsets;
};

inline CoupledHalfspaces coupled_halfspaces(const GameOracle& oracle) {
  CoupledHalfspaces hs;
  const int m = oracle.constraint_dim();
  const int n = oracle.action_dim_total();
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, m);
  Eigen::VectorXd x0_stacked(n);
  Eigen::Index at = 0;
  for (int i = 0; i < oracle.n_players(); ++i) {
    const auto& set = oracle.feasible_sets()[static_cast<std::size_t>(i)];
    Eigen::VectorXd x0 = set.interior_point();
    g0 += oracle.constraint_value(i, 1, x0);
    jac.middleRows(at, set.dimension()) = oracle.constraint_jacobian(i, 1, x0);
    x0_stacked.segment(at, set.dimension()) = x0;
    at += set.dimension();
  }
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd a = jac.col(k);
    hs.normals.push_back(a);
    hs.offsets.push_back(a.dot(x0_stacked) - g0[k]);  // a·x ≤ a·x0 − g(x0)
  }
  return hs;
}

/// Projection onto (∏ Ω_i) ∩ {a·x ≤ b for each halfspace}. With a single
/// coupling row the dual of the projection problem is one-dimensional and
/// solved exactly by bisection on θ ↦ a·P_Ω(z − θ·a); with several rows a
/// Dykstra sweep over the base set and the halfspaces is used.
class IntersectionProjector {
 public:
  IntersectionProjector(const std::vector<FeasibleSet>& sets, CoupledHalfspaces hs)
      : sets_(sets), hs_(std::move(hs)) {}

  Eigen::VectorXd project_base(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(z.size());
    Eigen::Index at = 0;
    for (const auto& set : sets_) {
      out.segment(at, set.dimension()) = set.project(z.segment(at, set.dimension()));
      at += set.dimension();
    }
    return out;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    if (hs_.normals.size() == 1) return project_single(z);
    return project_dykstra(z);
  }

 private:
  Eigen::VectorXd project_single(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd& a = hs_.normals.front();
    const double b = hs_.offsets.front();
    Eigen::VectorXd p = project_base(z);
    if (a.dot(p) <= b + 1e-14) return p;
    // Find θ > 0 with a·P_Ω(z − θ a) = b; the map is nonincreasing in θ.
    double lo = 0.0, hi = 1.0;
    for (int grow = 0; grow < 200; ++grow) {
      if (a.dot(project_base(z - hi * a)) <= b) break;
      hi *= 2.0;
    }
    for (int iter = 0; iter < 200; ++iter) {
      double mid = 0.5 * (lo + hi);
      if (a.dot(project_base(z - mid * a)) > b)
        lo = mid;
      else
        hi = mid;
    }
    return project_base(z - hi * a);
  }

  Eigen::VectorXd project_dykstra(const Eigen::VectorXd& z) const {
    Eigen::VectorXd y = z;
    std::vector<Eigen::VectorXd> increments(hs_.normals.size() + 1,
                                            Eigen::VectorXd::Zero(z.size()));
    for (int sweep = 0; sweep < 2000; ++sweep) {
      Eigen::VectorXd before = y;
      for (std::size_t k = 0; k <= hs_.normals.size(); ++k) {
        Eigen::VectorXd w = y + increments[k];
        Eigen::VectorXd proj;
        if (k == hs_.normals.size()) {
          proj = project_base(w);
        } else {
          double overshoot = hs_.normals[k].dot(w) - hs_.offsets[k];
          proj = overshoot > 0.0
                     ? Eigen::VectorXd(w - (overshoot / hs_.normals[k].squaredNorm()) *
                                               hs_.normals[k])
                     : w;
        }
        increments[k] = w - proj;
        y = proj;
      }
      if ((y - before).norm() <= 1e-14 * std::max(1.0, y.norm())) break;
    }
    return y;
  }

  const std::vector<FeasibleSet>& sets_;
  CoupledHalfspaces hs_;
};

/// Natural residual of the KKT saddle map at (x, λ); zero iff (x, λ) is a
/// primal-dual solution under Slater's condition.
inline double kkt_residual(const LimitGame& limit, const ActionProfile& x,
                           const Eigen::VectorXd& lambda) {
  const auto& oracle = *limit.oracle;
  double rx2 = 0.0;
  for (int i = 0; i < oracle.n_players(); ++i) {
    std::size_t ii = static_cast<std::size_t>(i);
    Eigen::VectorXd grad = oracle.cost_grad(i, 1, x) +
                           oracle.constraint_jacobian(i, 1, x[ii]) * lambda;
    Eigen::VectorXd proj = oracle.feasible_sets()[ii].project(x[ii] - grad);
    rx2 += (x[ii] - proj).squaredNorm();
  }
  Eigen::VectorXd g = limit.coupled_constraint(x);
  Eigen::VectorXd lnext = (lambda + g).cwiseMax(0.0);
  return std::sqrt(rx2 + (lambda - lnext).squaredNorm());
}

/// Adaptive extragradient on the primal-dual saddle operator; fallback for
/// games whose coupled constraints are not affine.
inline ActionProfile saddle_extragradient(const LimitGame& limit, double tol,
                                          const GneSolveOptions& options,
                                          ActionProfile x) {
  const auto& oracle = *limit.oracle;
  const int n_players = oracle.n_players();
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(oracle.constraint_dim());

  auto apply_T = [&](const ActionProfile& xc, const Eigen::VectorXd& lc,
                     ActionProfile& tx, Eigen::VectorXd& tl) {
    tx.resize(xc.size());
    for (int i = 0; i < n_players; ++i) {
      std::size_t ii = static_cast<std::size_t>(i);
      tx[ii] = oracle.cost_grad(i, 1, xc) + oracle.constraint_jacobian(i, 1, xc[ii]) * lc;
    }
    tl = -oracle.coupled_constraint(1, xc);
  };

  double step = 1.0;
  ActionProfile tx, txm, xm(static_cast<std::size_t>(n_players));
  Eigen::VectorXd tl, tlm, lm;
  for (long long iter = 0; iter < options.max_iters; ++iter) {
    if (kkt_residual(limit, x, lambda) <= tol) return x;
    step = std::min(step * 1.05, 1.0);
    apply_T(x, lambda, tx, tl);
    for (;;) {
      for (int i = 0; i < n_players; ++i) {
        std::size_t ii = static_cast<std::size_t>(i);
        xm[ii] = oracle.feasible_sets()[ii].project(x[ii] - step * tx[ii]);
      }
      lm = (lambda - step * tl).cwiseMax(0.0);
      apply_T(xm, lm, txm, tlm);
      double tdiff2 = (tlm - tl).squaredNorm();
      double zdiff2 = (lm - lambda).squaredNorm();
      for (int i = 0; i < n_players; ++i) {
        std::size_t ii = static_cast<std::size_t>(i);
        tdiff2 += (txm[ii] - tx[ii]).squaredNorm();
        zdiff2 += (xm[ii] - x[ii]).squaredNorm();
      }
      if (step * std::sqrt(tdiff2) <= 0.9 * std::sqrt(zdiff2) || zdiff2 == 0.0) break;
      step *= 0.5;
      if (step < 1e-14)
        throw NoConvergenceError("extragradient stepsize underflow");
    }
    for (int i = 0; i < n_players; ++i) {
      std::size_t ii = static_cast<std::size_t>(i);
      x[ii] = oracle.feasible_sets()[ii].project(x[ii] - step * txm[ii]);
    }
    lambda = (lambda - step * tlm).cwiseMax(0.0);
  }
  throw NoConvergenceError("saddle extragradient hit the iteration cap");
}

}  // namespace detail

/// Solves the variational GNE of a strongly monotone limit game. With affine
/// coupled constraints (every in-repo game) this is projected pseudo-gradient
/// descent on the feasible intersection,
///   x ← P_{Ω ∩ {g ≤ 0}}(x − τ·F(x)),
/// which contracts linearly for τ = μ/L²; the stop rule is the natural VI
/// residual ‖x − P(x − F(x))‖ ≤ tol. Non-affine games fall back to an
/// adaptive extragradient on the primal-dual saddle. Throws
/// NoConvergenceError at the iteration cap, which usually signals a
/// mis-specified modulus or inconsistent constraints.
inline ActionProfile limit_gne_bruteforce(const LimitGame& limit, double tol,
                                          const GneSolveOptions& options = {}) {
  if (!(limit.mu > 0.0))
    throw DomainViolationError("limit_gne_bruteforce needs a strongly monotone limit (mu > 0)");
  if (!limit.oracle) throw MissingGneError("limit game has no oracle attached");
  const auto& oracle = *limit.oracle;
  const std::vector<int>& dims = oracle.action_dims();

  ActionProfile start(static_cast<std::size_t>(oracle.n_players()));
  SplitMix64 rng(options.seed);
  for (int i = 0; i < oracle.n_players(); ++i) {
    const auto& set = oracle.feasible_sets()[static_cast<std::size_t>(i)];
    start[static_cast<std::size_t>(i)] =
        options.randomize_start ? set.sample(rng)
                                : set.project(Eigen::VectorXd::Zero(set.dimension()));
  }

  if (!oracle.constraints_affine())
    return detail::saddle_extragradient(limit, tol, options, std::move(start));

  detail::IntersectionProjector projector(oracle.feasible_sets(),
                                          detail::coupled_halfspaces(oracle));

  auto pseudo_gradient = [&](const Eigen::VectorXd& stacked) {
    ActionProfile profile = unstack_profile(stacked, dims);
    Eigen::VectorXd f(stacked.size());
    Eigen::Index at = 0;
    for (int i = 0; i < oracle.n_players(); ++i) {
      Eigen::VectorXd gi = oracle.cost_grad(i, 1, profile);
      f.segment(at, gi.size()) = gi;
      at += gi.size();
    }
    return f;
  };

  // Lipschitz estimate of F over random feasible pairs (margin 1.3).
  double lip = limit.mu;
  {
    Eigen::VectorXd a(oracle.action_dim_total()), b(oracle.action_dim_total());
    for (int probe = 0; probe < 24; ++probe) {
      Eigen::Index at = 0;
      for (const auto& set : oracle.feasible_sets()) {
        a.segment(at, set.dimension()) = set.sample(rng);
        b.segment(at, set.dimension()) = set.sample(rng);
        at += set.dimension();
      }
      double dist = (a - b).norm();
      if (dist < 1e-12) continue;
      lip = std::max(lip, (pseudo_gradient(a) - pseudo_gradient(b)).norm() / dist);
    }
    lip *= 1.3;
  }
  double tau = limit.mu / (lip * lip);

  Eigen::VectorXd x = projector.project(stack_profile(start));
  double best_residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;
  for (long long iter = 0; iter < options.max_iters; ++iter) {
    Eigen::VectorXd f = pseudo_gradient(x);
    Eigen::VectorXd next = projector.project(x - tau * f);
    double residual = (x - next).norm() / tau * std::min(tau, 1.0);
    // Natural residual at unit scale for the stop rule.
    double unit_residual = (x - projector.project(x - f)).norm();
    if (unit_residual <= tol) return unstack_profile(x, dims);
    if (unit_residual < best_residual) {
      best_residual = unit_residual;
      best_x = x;
    } else if (unit_residual > 100.0 * best_residual && iter > 50) {
      // Diverging: the declared modulus was too optimistic for this game.
      tau *= 0.5;
      x = best_x;
      continue;
    }
    (void)residual;
    x = std::move(next);
  }
  throw NoConvergenceError("limit_gne_bruteforce hit the iteration cap at residual " +
                           std::to_string(best_residual));
}

/// Stabilization gaps between the time-t game and its limit:
///   H_{i,t} = max_x ‖∇_i J_{i,t}(x) − ∇_i J_i(x)‖,
///   K_t     = max_x ‖g_t(x) − g(x)‖,
/// estimated over Sobol samples of the feasible box product plus its corners
/// (all 2^n when n ≤ 16, otherwise the two extreme ones). The result is a
/// lower bound on the true maxima; for gap maps that are affine in x the
/// corner sweep makes it exact.
struct StabilizationGaps {
  double h_max = 0.0;  // max_i H_{i,t} estimate
  double k = 0.0;      // K_t estimate
};

inline StabilizationGaps stabilization_gaps(const GameOracle& oracle, const LimitGame& limit,
                                            int t, int n_samples = 1024) {
  const int n_players = oracle.n_players();
  const int dim = oracle.action_dim_total();
  std::vector<ActionProfile> probes;

  bool all_boxes = true;
  for (const auto& set : oracle.feasible_sets())
    all_boxes = all_boxes && set.kind() == FeasibleSet::Kind::Box;

  if (all_boxes) {
    if (dim <= 16) {
      for (std::uint64_t mask = 0; mask < (1ULL << dim); ++mask) {
        ActionProfile corner;
        int bit = 0;
        for (const auto& set : oracle.feasible_sets()) {
          Eigen::VectorXd xi(set.dimension());
          for (int j = 0; j < set.dimension(); ++j, ++bit)
            xi[j] = (mask >> bit) & 1ULL ? set.box_upper()[j] : set.box_lower()[j];
          corner.push_back(std::move(xi));
        }
        probes.push_back(std::move(corner));
      }
    } else {
      ActionProfile lo, hi;
      for (const auto& set : oracle.feasible_sets()) {
        lo.push_back(set.box_lower());
        hi.push_back(set.box_upper());
      }
      probes.push_back(std::move(lo));
      probes.push_back(std::move(hi));
    }
    boost::random::sobol qrng(static_cast<std::size_t>(dim));
    for (int k = 0; k < n_samples; ++k) {
      ActionProfile p;
      for (const auto& set : oracle.feasible_sets()) {
        Eigen::VectorXd xi(set.dimension());
        for (int j = 0; j < set.dimension(); ++j) {
          double u = static_cast<double>(qrng() >> 11) * 0x1.0p-53;
          xi[j] = set.box_lower()[j] + u * (set.box_upper()[j] - set.box_lower()[j]);
        }
        p.push_back(std::move(xi));
      }
      probes.push_back(std::move(p));
    }
  } else {
    SplitMix64 rng(0x57ab1117ULL);
    for (int k = 0; k < n_samples; ++k) {
      ActionProfile p;
      for (const auto& set : oracle.feasible_sets()) p.push_back(set.sample(rng));
      probes.push_back(std::move(p));
    }
  }

  StabilizationGaps gaps;
  for (const auto& x : probes) {
    for (int i = 0; i < n_players; ++i) {
      double h = (oracle.cost_grad(i, t, x) - limit.oracle->cost_grad(i, 1, x)).norm();
      gaps.h_max = std::max(gaps.h_max, h);
    }
    double k = (oracle.coupled_constraint(t, x) - limit.coupled_constraint(x)).norm();
    gaps.k = std::max(gaps.k, k);
  }
  return gaps;
}

}  // namespace ogmd
