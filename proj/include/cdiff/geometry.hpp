// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdiff/error.hpp"
#include "cdiff/types.hpp"

namespace cdiff {

namespace tolerance {
/// Distance within which a point counts as lying on a constraint surface.
inline constexpr double surface = 1e-9;
/// Minimum boundary distance required of a seed point.
inline constexpr double interior_margin = 1e-6;
/// Rays with |<s, n>| below this slide along the face instead of hitting it.
inline constexpr double grazing = 1e-12;
/// Hits closer together than this are treated as a simultaneous corner hit.
inline constexpr double corner = 1e-12;
/// Inward displacement applied after every reflection.
inline constexpr double nudge = 1e-12;
}  // namespace tolerance

/// Half-space <normal, x> < offset with a unit-norm normal.
class LinearConstraint {
 public:
  LinearConstraint(Vec normal, double offset) : normal_(std::move(normal)), offset_(offset) {
    const double norm = normal_.norm();
    if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(offset_)) {
      throw Error(ErrorKind::config_error, "linear constraint needs a finite nonzero normal");
    }
    // Leave already-unit normals untouched so serialized domains reload bit-exactly.
    if (std::abs(norm - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
      normal_ /= norm;
      offset_ /= norm;
    }
  }

  const Vec& normal() const noexcept { return normal_; }
  double offset() const noexcept { return offset_; }
  double slack(const Vec& x) const { return offset_ - normal_.dot(x); }

 private:
  Vec normal_;
  double offset_;
};

/// Open ball ||x - center|| < radius.
class SphereConstraint {
 public:
  SphereConstraint(Vec center, double radius) : center_(std::move(center)), radius_(radius) {
    if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
      throw Error(ErrorKind::config_error, "sphere constraint needs a positive radius");
    }
  }

  const Vec& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }
  double slack(const Vec& x) const { return radius_ - (x - center_).norm(); }

 private:
  Vec center_;
  double radius_;
};

struct ConstraintId {
  enum class Kind { linear, sphere };
  Kind kind = Kind::linear;
  std::size_t index = 0;

  friend bool operator==(const ConstraintId&, const ConstraintId&) = default;
};

namespace detail {
inline Vec find_interior_point(std::size_t dim, const std::vector<LinearConstraint>& linear,
                        const std::vector<SphereConstraint>& spheres);
}

/// Open domain defined by linear and spherical inequality constraints.
/// Construction fails with infeasible-domain when the interior is empty.
class ConstraintSet {
 public:
  ConstraintSet() = default;

  ConstraintSet(std::size_t dim, std::vector<LinearConstraint> linear,
                std::vector<SphereConstraint> spheres = {})
      : dim_(dim), linear_(std::move(linear)), spheres_(std::move(spheres)) {
    for (const auto& c : linear_) {
      if (static_cast<std::size_t>(c.normal().size()) != dim_) {
        throw Error(ErrorKind::dimension_mismatch, "linear constraint dimension differs from set dimension");
      }
    }
    for (const auto& c : spheres_) {
      if (static_cast<std::size_t>(c.center().size()) != dim_) {
        throw Error(ErrorKind::dimension_mismatch, "sphere constraint dimension differs from set dimension");
      }
    }
    normals_.resize(static_cast<Eigen::Index>(linear_.size()), static_cast<Eigen::Index>(dim_));
    offsets_.resize(static_cast<Eigen::Index>(linear_.size()));
    for (std::size_t k = 0; k < linear_.size(); ++k) {
      normals_.row(static_cast<Eigen::Index>(k)) = linear_[k].normal().transpose();
      offsets_(static_cast<Eigen::Index>(k)) = linear_[k].offset();
    }
    interior_ = detail::find_interior_point(dim_, linear_, spheres_);
  }

  std::size_t dimension() const noexcept { return dim_; }
  const std::vector<LinearConstraint>& linear() const noexcept { return linear_; }
  const std::vector<SphereConstraint>& spheres() const noexcept { return spheres_; }
  std::size_t size() const noexcept { return linear_.size() + spheres_.size(); }
  bool has_constraints() const noexcept { return size() > 0; }
  bool linear_only() const noexcept { return spheres_.empty(); }

  /// Stacked unit normals, one row per linear constraint.
  const Mat& normals() const noexcept { return normals_; }
  const Vec& offsets() const noexcept { return offsets_; }

  /// Strictly feasible point located at construction.
  const Vec& interior_point() const noexcept { return interior_; }

 private:
  std::size_t dim_ = 0;
  std::vector<LinearConstraint> linear_;
  std::vector<SphereConstraint> spheres_;
  Mat normals_;
  Vec offsets_;
  Vec interior_;
};

/// Constrained coordinates followed by periodic coordinates on [0, 2pi).
class DomainSpec {
 public:
  DomainSpec() = default;
  explicit DomainSpec(ConstraintSet constrained, std::size_t periodic_dims = 0)
      : constrained_(std::move(constrained)), periodic_dims_(periodic_dims) {
    if (dimension() == 0) throw Error(ErrorKind::config_error, "domain must have at least one coordinate");
  }

  const ConstraintSet& constrained() const noexcept { return constrained_; }
  std::size_t constrained_dims() const noexcept { return constrained_.dimension(); }
  std::size_t periodic_dims() const noexcept { return periodic_dims_; }
  std::size_t dimension() const noexcept { return constrained_.dimension() + periodic_dims_; }

 private:
  ConstraintSet constrained_;
  std::size_t periodic_dims_ = 0;
};

// ---------------------------------------------------------------------------
// Pointwise queries
// ---------------------------------------------------------------------------

/// Smallest constraint slack; +inf for an unconstrained set. Does not validate.
inline double min_slack(const Vec& x, const ConstraintSet& set) {
  double best = std::numeric_limits<double>::infinity();
  if (set.normals().rows() > 0) {
    best = (set.offsets() - set.normals() * x).minCoeff();
  }
  for (const auto& s : set.spheres()) best = std::min(best, s.slack(x));
  return best;
}

inline double distance_to_boundary(const Vec& x, const ConstraintSet& set) {
  if (static_cast<std::size_t>(x.size()) != set.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "point dimension differs from constraint set");
  }
  const double d = min_slack(x, set);
  if (!(d > 0.0)) throw Error(ErrorKind::infeasible_point, "point is not strictly inside the domain");
  return d;
}

inline bool is_interior(const Vec& x, const ConstraintSet& set) { return min_slack(x, set) > 0.0; }

/// Inside the closed domain up to the surface tolerance.
inline bool is_inside_closed(const Vec& x, const ConstraintSet& set) {
  return min_slack(x, set) >= -tolerance::surface;
}

inline Vec reflect_direction(const Vec& s_hat, const Vec& n_hat) {
  return s_hat - 2.0 * s_hat.dot(n_hat) * n_hat;
}

namespace detail {
inline Vec sphere_normal(const SphereConstraint& s, const Vec& x_hit) {
  Vec n = x_hit - s.center();
  return n / n.norm();
}
}  // namespace detail

inline Vec outward_normal(const ConstraintSet& set, ConstraintId hit, const Vec& x_hit) {
  if (hit.kind == ConstraintId::Kind::linear) {
    if (hit.index >= set.linear().size()) throw Error(ErrorKind::config_error, "unknown linear constraint");
    const auto& c = set.linear()[hit.index];
    if (std::abs(c.slack(x_hit)) > tolerance::surface) {
      throw Error(ErrorKind::off_surface, "point is not on the linear constraint surface");
    }
    return c.normal();
  }
  if (hit.index >= set.spheres().size()) throw Error(ErrorKind::config_error, "unknown sphere constraint");
  const auto& s = set.spheres()[hit.index];
  if (std::abs(s.slack(x_hit)) > tolerance::surface) {
    throw Error(ErrorKind::off_surface, "point is not on the sphere surface");
  }
  return detail::sphere_normal(s, x_hit);
}

struct RayHit {
  double distance = 0.0;
  ConstraintId hit;
};

namespace detail {

/// Nearest forward intersection; empty when the ray escapes.
inline std::optional<RayHit> nearest_hit(const Vec& x, const Vec& s_hat, const ConstraintSet& set) {
  std::optional<RayHit> best;
  double best_cos = 0.0;

  auto consider = [&](double dist, ConstraintId id, double cos_abs) {
    if (!(dist > 0.0) || !std::isfinite(dist)) return;
    if (!best || dist < best->distance - tolerance::corner) {
      best = RayHit{dist, id};
      best_cos = cos_abs;
    } else if (std::abs(dist - best->distance) <= tolerance::corner && cos_abs > best_cos) {
      // corner: keep the most head-on face
      best = RayHit{std::min(dist, best->distance), id};
      best_cos = cos_abs;
    }
  };

  const auto& lin = set.linear();
  for (std::size_t k = 0; k < lin.size(); ++k) {
    const double cosine = lin[k].normal().dot(s_hat);
    if (cosine <= tolerance::grazing) continue;
    consider(lin[k].slack(x) / cosine, {ConstraintId::Kind::linear, k}, cosine);
  }
  const auto& sph = set.spheres();
  for (std::size_t k = 0; k < sph.size(); ++k) {
    const Vec y = x - sph[k].center();
    const double proj = s_hat.dot(y);
    const double disc = proj * proj - (y.squaredNorm() - sph[k].radius() * sph[k].radius());
    if (disc < 0.0) continue;
    const double dist = -proj + std::sqrt(disc);
    const Vec n = (y + dist * s_hat) / sph[k].radius();
    const double cosine = std::abs(n.dot(s_hat));
    if (cosine <= tolerance::grazing) continue;
    consider(dist, {ConstraintId::Kind::sphere, k}, cosine);
  }
  return best;
}

}  // namespace detail

/// Distance along x + t * s_hat to the first constraint surface, and which one.
inline RayHit ray_intersect(const Vec& x, const Vec& s_hat, const ConstraintSet& set) {
  if (static_cast<std::size_t>(x.size()) != set.dimension() || x.size() != s_hat.size()) {
    throw Error(ErrorKind::dimension_mismatch, "ray dimension differs from constraint set");
  }
  auto hit = detail::nearest_hit(x, s_hat, set);
  if (!hit) throw Error(ErrorKind::no_intersection, "ray does not meet any constraint");
  return *hit;
}

// ---------------------------------------------------------------------------
// Interior point search
// ---------------------------------------------------------------------------

namespace detail {

/// Maximizes the minimum slack s over (x, s) with a log-barrier path-following
/// method. Sphere constraints use the second-order-cone barrier
/// -log((r - s)^2 - ||x - c||^2). A large box keeps unbounded sets well posed.
inline Vec find_interior_point(std::size_t dim, const std::vector<LinearConstraint>& linear,
                               const std::vector<SphereConstraint>& spheres) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (linear.empty() && spheres.empty()) return Vec::Zero(d);

  constexpr double box = 1e6;
  const Eigen::Index n = d + 1;

  auto feasible = [&](const Vec& y) {
    const auto x = y.head(d);
    const double s = y(d);
    for (const auto& c : linear) {
      if (!(c.offset() - c.normal().dot(x) - s > 0.0)) return false;
    }
    for (const auto& c : spheres) {
      const double rs = c.radius() - s;
      if (!(rs > 0.0) || !(rs * rs - (x - c.center()).squaredNorm() > 0.0)) return false;
    }
    return (x.array().abs() < box).all();
  };

  auto barrier = [&](const Vec& y, double tau, Vec* grad, Mat* hess) {
    const auto x = y.head(d);
    const double s = y(d);
    double value = -tau * s;
    if (grad) {
      grad->setZero(n);
      (*grad)(d) = -tau;
    }
    if (hess) hess->setZero(n, n);
    Vec w(n);
    for (const auto& c : linear) {
      const double sigma = c.offset() - c.normal().dot(x) - s;
      value -= std::log(sigma);
      w.head(d) = c.normal();
      w(d) = 1.0;
      if (grad) *grad += w / sigma;
      if (hess) *hess += (w * w.transpose()) / (sigma * sigma);
    }
    for (const auto& c : spheres) {
      const Vec diff = x - c.center();
      const double rs = c.radius() - s;
      const double psi = rs * rs - diff.squaredNorm();
      value -= std::log(psi);
      Vec dpsi(n);
      dpsi.head(d) = -2.0 * diff;
      dpsi(d) = -2.0 * rs;
      if (grad) *grad -= dpsi / psi;
      if (hess) {
        *hess += (dpsi * dpsi.transpose()) / (psi * psi);
        hess->topLeftCorner(d, d).diagonal().array() += 2.0 / psi;
        (*hess)(d, d) -= 2.0 / psi;
      }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      const double up = box - x(i);
      const double lo = box + x(i);
      value -= std::log(up) + std::log(lo);
      if (grad) (*grad)(i) += 1.0 / up - 1.0 / lo;
      if (hess) (*hess)(i, i) += 1.0 / (up * up) + 1.0 / (lo * lo);
    }
    return value;
  };

  Vec y = Vec::Zero(n);
  double start = std::numeric_limits<double>::infinity();
  for (const auto& c : linear) start = std::min(start, c.offset());
  for (const auto& c : spheres) start = std::min(start, c.radius() - c.center().norm());
  y(d) = start - 1.0;

  const double barrier_count = static_cast<double>(linear.size() + spheres.size() + 2 * dim);
  Vec grad(n);
  Mat hess(n, n);
  for (double tau = 1.0; barrier_count / tau > 1e-10; tau *= 10.0) {
    for (int it = 0; it < 200; ++it) {
      const double f0 = barrier(y, tau, &grad, &hess);
      const Vec step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement) || decrement < 1e-14) break;
      double alpha = 1.0;
      Vec trial = y + step;
      while (alpha > 1e-16) {
        trial = y + alpha * step;
        if (feasible(trial) && barrier(trial, tau, nullptr, nullptr) <= f0 - 0.25 * alpha * decrement) break;
        alpha *= 0.5;
      }
      if (alpha <= 1e-16) break;
      y = trial;
    }
  }

  Vec x = y.head(d);
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& c : linear) slack = std::min(slack, c.slack(x));
  for (const auto& c : spheres) slack = std::min(slack, c.slack(x));
  if (!(slack >= tolerance::interior_margin)) {
    throw Error(ErrorKind::infeasible_domain, "constraint set has no interior point with positive slack");
  }
  return x;
}

}  // namespace detail

inline Vec interior_point(const ConstraintSet& set) { return set.interior_point(); }

// ---------------------------------------------------------------------------
// Canonical domains
// ---------------------------------------------------------------------------

/// Axis-aligned box lower < x < upper (per coordinate).
inline ConstraintSet make_box(const Vec& lower, const Vec& upper) {
  const auto d = lower.size();
  if (upper.size() != d || d < 1) throw Error(ErrorKind::config_error, "box bounds must share a positive dimension");
  std::vector<LinearConstraint> lin;
  for (Eigen::Index i = 0; i < d; ++i) {
    lin.emplace_back(Vec::Unit(d, i), upper(i));
    lin.emplace_back(-Vec::Unit(d, i), -lower(i));
  }
  return ConstraintSet(static_cast<std::size_t>(d), std::move(lin));
}

inline ConstraintSet make_interval(double lower, double upper) {
  return make_box(Vec::Constant(1, lower), Vec::Constant(1, upper));
}

/// [-1, 1]^d as 2d half-spaces.
inline ConstraintSet make_hypercube(std::size_t d) {
  if (d < 1) throw Error(ErrorKind::config_error, "hypercube dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  return make_box(Vec::Constant(n, -1.0), Vec::Constant(n, 1.0));
}

/// Free-coordinate chart of the standard simplex: x_i > 0, sum x_i < 1.
/// The implied last barycentric coordinate is 1 - sum x_i.
inline ConstraintSet make_simplex(std::size_t d) {
  if (d < 1) throw Error(ErrorKind::config_error, "simplex dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  std::vector<LinearConstraint> lin;
  for (Eigen::Index i = 0; i < n; ++i) lin.emplace_back(-Vec::Unit(n, i), 0.0);
  lin.emplace_back(Vec::Ones(n), 1.0);
  return ConstraintSet(d, std::move(lin));
}

/// Doubly stochastic n x n matrices charted by their top-left (n-1) x (n-1)
/// block (row-major). Every one of the n^2 entries must stay positive.
inline ConstraintSet make_birkhoff(std::size_t n) {
  if (n < 2) throw Error(ErrorKind::config_error, "Birkhoff polytope needs n >= 2");
  const auto m = static_cast<Eigen::Index>(n - 1);
  const Eigen::Index d = m * m;
  auto idx = [m](Eigen::Index i, Eigen::Index j) { return i * m + j; };
  std::vector<LinearConstraint> lin;
  for (Eigen::Index k = 0; k < d; ++k) lin.emplace_back(-Vec::Unit(d, k), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {  // last column entry of row i
    Vec a = Vec::Zero(d);
    for (Eigen::Index j = 0; j < m; ++j) a(idx(i, j)) = 1.0;
    lin.emplace_back(a, 1.0);
  }
  for (Eigen::Index j = 0; j < m; ++j) {  // last row entry of column j
    Vec a = Vec::Zero(d);
    for (Eigen::Index i = 0; i < m; ++i) a(idx(i, j)) = 1.0;
    lin.emplace_back(a, 1.0);
  }
  // bottom-right entry: 1 - (n - 1) + sum of the block > 0
  lin.emplace_back(-Vec::Ones(d), 2.0 - static_cast<double>(n));
  return ConstraintSet(static_cast<std::size_t>(d), std::move(lin));
}

/// Index of L(i, j), j <= i, in the packed row-major lower triangle.
inline std::size_t cholesky_index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

/// Lower-triangular factors L with positive diagonal and ||L||_F^2 < C, so
/// that trace(L L^T) < C.
inline ConstraintSet make_cholesky_ball(std::size_t d, double trace_bound) {
  if (d < 1 || !(trace_bound > 0.0)) throw Error(ErrorKind::config_error, "Cholesky ball needs d >= 1 and C > 0");
  const auto n = static_cast<Eigen::Index>(d * (d + 1) / 2);
  std::vector<LinearConstraint> lin;
  for (std::size_t i = 0; i < d; ++i) {
    lin.emplace_back(-Vec::Unit(n, static_cast<Eigen::Index>(cholesky_index(i, i))), 0.0);
  }
  std::vector<SphereConstraint> sph;
  sph.emplace_back(Vec::Zero(n), std::sqrt(trace_bound));
  return ConstraintSet(static_cast<std::size_t>(n), std::move(lin), std::move(sph));
}

/// Anchor-distance polytope of a chain with link lengths l_1..l_{N-1}; the
/// coordinates are the anchor distances r(1,3)..r(1,N-1), with r(1,2) = l_1.
inline ConstraintSet make_loop_polytope(const std::vector<double>& lengths, double d_anchor) {
  if (lengths.size() < 3) throw Error(ErrorKind::config_error, "loop polytope needs at least 3 link lengths");
  if (!(d_anchor >= 0.0)) throw Error(ErrorKind::config_error, "anchor distance must be >= 0");
  for (double l : lengths) {
    if (!(l > 0.0)) throw Error(ErrorKind::config_error, "link lengths must be positive");
  }
  // lengths[k] is l_{k+1}; N = lengths.size() + 1 atoms
  const std::size_t atoms = lengths.size() + 1;
  const auto d = static_cast<Eigen::Index>(atoms - 3);
  auto coord = [](std::size_t j) { return static_cast<Eigen::Index>(j - 3); };  // r(1, j)
  auto ell = [&](std::size_t j) { return lengths[j - 1]; };

  std::vector<LinearConstraint> lin;
  lin.emplace_back(Vec::Unit(d, 0), ell(1) + ell(2));
  lin.emplace_back(-Vec::Unit(d, 0), -std::abs(ell(1) - ell(2)));
  for (std::size_t j = 3; j + 2 <= atoms; ++j) {
    Vec a = Vec::Zero(d);
    a(coord(j)) = 1.0;
    a(coord(j + 1)) = -1.0;
    lin.emplace_back(a, ell(j));
    lin.emplace_back(-a, ell(j));
    Vec s = Vec::Zero(d);
    s(coord(j)) = -1.0;
    s(coord(j + 1)) = -1.0;
    lin.emplace_back(s, -ell(j));
  }
  lin.emplace_back(Vec::Unit(d, coord(atoms - 1)), ell(atoms - 1) + d_anchor);
  lin.emplace_back(-Vec::Unit(d, coord(atoms - 1)), -std::abs(ell(atoms - 1) - d_anchor));
  return ConstraintSet(static_cast<std::size_t>(d), std::move(lin));
}

}  // namespace cdiff
