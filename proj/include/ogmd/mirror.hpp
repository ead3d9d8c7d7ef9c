#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ogmd/error.hpp"
#include "ogmd/rng.hpp"

namespace ogmd {

enum class MirrorKind { SquaredNorm, NegativeEntropy };

/// Coordinates below this are clamped before any log is evaluated; the
/// simplex boundary sits outside the entropy map's differentiability domain.
inline constexpr double kEntropyClamp = 1e-12;

/// Mirror map φ together with the constants the regret analysis needs:
/// the strong-convexity modulus μ (conservative) and a Lipschitz constant K
/// of D_φ(·, ζ) on the feasible set.
///
/// SquaredNorm uses φ(θ) = ‖θ‖², so D(ξ,ζ) = ‖ξ−ζ‖² and μ = 2; the
/// closed-form primal step is x − αg/2 followed by Euclidean projection.
/// NegativeEntropy uses φ(ξ) = Σ ξ_j log ξ_j on the relative interior of the
/// simplex, giving the generalized KL divergence with μ = 1 per unit of
/// simplex scale.
struct MirrorMap {
  MirrorKind kind = MirrorKind::SquaredNorm;
  int dimension = 0;
  double mu = 2.0;
  double lipschitz_k = 1.0;

  /// diameter = Euclidean diameter of the feasible set; K = 2·diameter since
  /// |D(ξ1,ζ) − D(ξ2,ζ)| = |⟨ξ1−ξ2, ξ1+ξ2−2ζ⟩| ≤ 2Δ‖ξ1−ξ2‖.
  static MirrorMap squared_norm(int dimension, double diameter) {
    if (dimension <= 0 || !(diameter > 0.0))
      throw DomainViolationError("squared_norm map needs dimension > 0 and diameter > 0");
    return MirrorMap{MirrorKind::SquaredNorm, dimension, 2.0, 2.0 * diameter};
  }

  static MirrorMap negative_entropy(int dimension, double scale = 1.0) {
    if (dimension <= 0 || !(scale > 0.0))
      throw DomainViolationError("negative_entropy map needs dimension > 0 and scale > 0");
    // With iterates clamped at kEntropyClamp the first-argument gradient
    // log(ξ/ζ) is bounded coordinatewise by log(scale/clamp).
    double k = std::sqrt(static_cast<double>(dimension)) * std::log(scale / kEntropyClamp);
    return MirrorMap{MirrorKind::NegativeEntropy, dimension, 1.0 / scale, k};
  }
};

/// Compact convex per-player action set with an optional strictly interior
/// ball B_r(p) (required by the bandit query transform). Simplex sets live in
/// an affine subspace and therefore carry no full-dimensional interior ball.
class FeasibleSet {
 public:
  enum class Kind { Box, Simplex, Ball };

  static FeasibleSet box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw DimensionMismatchError("box: bound vectors must share a positive dimension");
    if (((upper - lower).array() <= 0.0).any())
      throw DomainViolationError("box: upper must exceed lower in every coordinate");
    FeasibleSet s;
    s.kind_ = Kind::Box;
    s.dim_ = static_cast<int>(lower.size());
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    s.interior_point_ = 0.5 * (s.lower_ + s.upper_);
    s.interior_radius_ = 0.5 * (s.upper_ - s.lower_).minCoeff();
    return s;
  }

  static FeasibleSet box1d(double lo, double hi) {
    Eigen::VectorXd l(1), u(1);
    l << lo;
    u << hi;
    return box(l, u);
  }

  /// {x ≥ 0, Σx = scale}.
  static FeasibleSet simplex(int dimension, double scale = 1.0) {
    if (dimension <= 0) throw DimensionMismatchError("simplex: dimension must be positive");
    if (!(scale > 0.0)) throw DomainViolationError("simplex: scale must be positive");
    FeasibleSet s;
    s.kind_ = Kind::Simplex;
    s.dim_ = dimension;
    s.scale_ = scale;
    s.interior_point_ =
        Eigen::VectorXd::Constant(dimension, scale / static_cast<double>(dimension));
    s.interior_radius_ = 0.0;  // no full-dimensional ball fits the affine hull
    return s;
  }

  static FeasibleSet ball(Eigen::VectorXd center, double radius) {
    if (center.size() == 0) throw DimensionMismatchError("ball: dimension must be positive");
    if (!(radius > 0.0)) throw DomainViolationError("ball: radius must be positive");
    FeasibleSet s;
    s.kind_ = Kind::Ball;
    s.dim_ = static_cast<int>(center.size());
    s.center_ = std::move(center);
    s.radius_ = radius;
    s.interior_point_ = s.center_;
    s.interior_radius_ = radius;
    return s;
  }

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  double simplex_scale() const { return scale_; }
  const Eigen::VectorXd& box_lower() const { return lower_; }
  const Eigen::VectorXd& box_upper() const { return upper_; }

  bool contains(const Eigen::VectorXd& x, double tol = 1e-10) const {
    check_dim(x);
    switch (kind_) {
      case Kind::Box:
        return ((x - lower_).array() >= -tol).all() && ((upper_ - x).array() >= -tol).all();
      case Kind::Simplex:
        return (x.array() >= -tol).all() &&
               std::abs(x.sum() - scale_) <= tol * std::max(1.0, scale_);
      case Kind::Ball:
        return (x - center_).norm() <= radius_ + tol;
    }
    return false;
  }

  /// Euclidean projection onto the set.
  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    check_dim(x);
    switch (kind_) {
      case Kind::Box:
        return x.cwiseMax(lower_).cwiseMin(upper_);
      case Kind::Simplex:
        return project_simplex(x, scale_);
      case Kind::Ball: {
        Eigen::VectorXd d = x - center_;
        double norm = d.norm();
        if (norm <= radius_) return x;
        return center_ + (radius_ / norm) * d;
      }
    }
    return x;
  }

  /// Interior point p with B_r(p) ⊆ set (r = 0 for simplex sets).
  const Eigen::VectorXd& interior_point() const { return interior_point_; }
  double interior_radius() const { return interior_radius_; }
  bool has_interior_ball() const { return interior_radius_ > 0.0; }

  /// Overrides the default interior ball; rejects (p, r) unless B_r(p) ⊆ set.
  void set_interior(Eigen::VectorXd p, double r) {
    check_dim(p);
    if (!(r > 0.0)) throw RadiusViolationError("interior radius must be positive");
    switch (kind_) {
      case Kind::Box:
        if (((p - lower_).array() < r - 1e-12).any() ||
            ((upper_ - p).array() < r - 1e-12).any())
          throw RadiusViolationError("interior ball leaves the box");
        break;
      case Kind::Ball:
        if ((p - center_).norm() + r > radius_ + 1e-12)
          throw RadiusViolationError("interior ball leaves the ball");
        break;
      case Kind::Simplex:
        throw RadiusViolationError(
            "simplex sets have no full-dimensional interior ball");
    }
    interior_point_ = std::move(p);
    interior_radius_ = r;
  }

  /// Euclidean diameter.
  double diameter() const {
    switch (kind_) {
      case Kind::Box:
        return (upper_ - lower_).norm();
      case Kind::Simplex:
        return scale_ * std::sqrt(2.0);
      case Kind::Ball:
        return 2.0 * radius_;
    }
    return 0.0;
  }

  /// Seeded feasible sample; uniform for boxes and balls, Dirichlet(1,...,1)
  /// (scaled) for simplices.
  Eigen::VectorXd sample(SplitMix64& rng) const {
    Eigen::VectorXd x(dim_);
    switch (kind_) {
      case Kind::Box:
        for (int j = 0; j < dim_; ++j) x[j] = rng.uniform(lower_[j], upper_[j]);
        return x;
      case Kind::Simplex: {
        double total = 0.0;
        for (int j = 0; j < dim_; ++j) {
          x[j] = -std::log(std::max(rng.next_u01(), 1e-300));
          total += x[j];
        }
        return (scale_ / total) * x;
      }
      case Kind::Ball: {
        for (int j = 0; j < dim_; ++j) x[j] = rng.normal();
        double norm = x.norm();
        if (norm == 0.0) return center_;
        double r = radius_ * std::pow(rng.next_u01(), 1.0 / static_cast<double>(dim_));
        return center_ + (r / norm) * x;
      }
    }
    return x;
  }

  /// Projection of a sorted-threshold type onto {y >= 0, sum y = s}.
  static Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double s) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0, tau = 0.0;
    int rho = 0;
    for (int j = 0; j < n; ++j) {
      running += u[static_cast<std::size_t>(j)];
      double candidate = (running - s) / static_cast<double>(j + 1);
      if (u[static_cast<std::size_t>(j)] - candidate > 0.0) {
        rho = j + 1;
        tau = candidate;
      }
    }
    (void)rho;
    return (v.array() - tau).cwiseMax(0.0).matrix();
  }

 private:
  void check_dim(const Eigen::VectorXd& x) const {
    if (static_cast<int>(x.size()) != dim_)
      throw DimensionMismatchError("feasible set: point has dimension " +
                                   std::to_string(x.size()) + ", expected " +
                                   std::to_string(dim_));
  }

  Kind kind_ = Kind::Box;
  int dim_ = 0;
  Eigen::VectorXd lower_, upper_;   // Box
  double scale_ = 1.0;              // Simplex
  Eigen::VectorXd center_;          // Ball
  double radius_ = 0.0;             // Ball
  Eigen::VectorXd interior_point_;
  double interior_radius_ = 0.0;
};

namespace detail {

inline void require_map_point(const MirrorMap& map, const Eigen::VectorXd& x,
                              const char* role) {
  if (static_cast<int>(x.size()) != map.dimension)
    throw DimensionMismatchError(std::string("mirror map: ") + role +
                                 " has wrong dimension");
  if (!x.allFinite())
    throw DomainViolationError(std::string("mirror map: ") + role + " is not finite");
  if (map.kind == MirrorKind::NegativeEntropy && (x.array() <= 0.0).any())
    throw DomainViolationError(std::string("entropy map: ") + role +
                               " must be strictly positive");
}

}  // namespace detail

/// ∇φ at a domain point.
inline Eigen::VectorXd mirror_grad(const MirrorMap& map, const Eigen::VectorXd& x) {
  detail::require_map_point(map, x, "point");
  if (map.kind == MirrorKind::SquaredNorm) return 2.0 * x;
  return (x.array().log() + 1.0).matrix();
}

/// Bregman divergence D_φ(ξ, ζ) = φ(ξ) − φ(ζ) − ⟨∇φ(ζ), ξ−ζ⟩.
/// Nonnegative; zero iff ξ = ζ.
inline double bregman(const MirrorMap& map, const Eigen::VectorXd& xi,
                      const Eigen::VectorXd& zeta) {
  detail::require_map_point(map, xi, "first argument");
  detail::require_map_point(map, zeta, "second argument");
  if (map.kind == MirrorKind::SquaredNorm) return (xi - zeta).squaredNorm();
  // Generalized KL divergence.
  double d = 0.0;
  for (Eigen::Index j = 0; j < xi.size(); ++j)
    d += xi[j] * std::log(xi[j] / zeta[j]) - xi[j] + zeta[j];
  return std::max(d, 0.0);
}

/// Residual of the generalized triangle identity
/// ⟨ξ−ζ, ∇φ(ζ)−∇φ(θ)⟩ = D(ξ,θ) − D(ξ,ζ) − D(ζ,θ); |residual| ≤ 1e-9 on valid
/// inputs for both supported maps.
inline double check_triangle(const MirrorMap& map, const Eigen::VectorXd& xi,
                             const Eigen::VectorXd& zeta, const Eigen::VectorXd& theta) {
  double lhs = (xi - zeta).dot(mirror_grad(map, zeta) - mirror_grad(map, theta));
  double rhs = bregman(map, xi, theta) - bregman(map, xi, zeta) - bregman(map, zeta, theta);
  return lhs - rhs;
}

/// Constrained mirror-descent inner step:
///   argmin_{y ∈ set} { α⟨y, g⟩ + D_φ(y, x) }.
///
/// Exact solvers only: SquaredNorm pairs with Box/Ball/Simplex via the
/// closed-form step x − αg/2 followed by Euclidean projection (D is the full
/// squared distance, so the quadratic completes exactly); NegativeEntropy
/// pairs with Simplex via the multiplicative update. Any other pairing throws
/// NoClosedFormError.
inline Eigen::VectorXd mirror_step(const MirrorMap& map, const FeasibleSet& set,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   double alpha) {
  if (set.dimension() != map.dimension)
    throw DimensionMismatchError("mirror_step: map and set dimensions differ");
  if (static_cast<int>(x.size()) != map.dimension ||
      static_cast<int>(g.size()) != map.dimension)
    throw DimensionMismatchError("mirror_step: point/gradient dimension mismatch");
  if (!(alpha > 0.0)) throw DomainViolationError("mirror_step: stepsize must be positive");
  if (!g.allFinite()) throw DomainViolationError("mirror_step: gradient is not finite");

  if (map.kind == MirrorKind::SquaredNorm)
    return set.project(x - (alpha / 2.0) * g);

  if (map.kind == MirrorKind::NegativeEntropy && set.kind() == FeasibleSet::Kind::Simplex) {
    Eigen::VectorXd base = x.cwiseMax(kEntropyClamp);
    // y_j ∝ x_j · exp(−α g_j); shift the exponent for overflow safety, the
    // normalization cancels it.
    Eigen::ArrayXd z = base.array().log() - alpha * g.array();
    z -= z.maxCoeff();
    Eigen::VectorXd y = z.exp().matrix();
    return (set.simplex_scale() / y.sum()) * y;
  }

  throw NoClosedFormError("mirror_step: no exact solver for this (map, set) pairing");
}

}  // namespace ogmd
