// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdiff/error.hpp"
#include "cdiff/geometry.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

/// Log-barrier Hessian metric g = A^T S^-2 A evaluated at one point.
struct MetricEval {
  Vec x;
  Vec slacks;
  Mat g;
  Eigen::LLT<Mat> chol;

  Mat chol_lower() const { return chol.matrixL(); }
};

inline void require_polytope(const ConstraintSet& set) {
  if (!set.linear_only()) {
    throw Error(ErrorKind::unsupported_domain, "log-barrier geometry supports linear constraints only");
  }
  if (set.linear().empty()) throw Error(ErrorKind::unsupported_domain, "log-barrier geometry needs constraints");
}

namespace detail {
inline Vec checked_slacks(const Vec& x, const ConstraintSet& set) {
  Vec s = set.offsets() - set.normals() * x;
  if (!(s.minCoeff() > 0.0)) throw Error(ErrorKind::infeasible_point, "point is not strictly inside the polytope");
  return s;
}
}  // namespace detail

inline double log_barrier(const Vec& x, const ConstraintSet& set) {
  require_polytope(set);
  return -detail::checked_slacks(x, set).array().log().sum();
}

inline MetricEval metric_at(const Vec& x, const ConstraintSet& set) {
  require_polytope(set);
  MetricEval me;
  me.x = x;
  me.slacks = detail::checked_slacks(x, set);
  const auto& a = set.normals();
  const Mat scaled = me.slacks.array().inverse().matrix().asDiagonal() * a;
  me.g = scaled.transpose() * scaled;
  me.chol.compute(me.g);
  if (me.chol.info() != Eigen::Success) {
    throw Error(ErrorKind::degenerate_metric, "Cholesky factorization of the barrier metric failed");
  }
  return me;
}

/// Maps a standard normal z to a draw with covariance g^-1 by solving L^T u = z.
inline Vec noise_map(const MetricEval& me, const Vec& z) {
  return me.chol.matrixU().solve(z);
}

namespace detail {

/// div(g^-1) = -2 g^-1 A^T (h / s^3) with h_k = A_k g^-1 A_k^T = ||L^-1 A_k^T||^2.
/// `c` receives L^-1 A^T; `weights` and `out` are scratch/output.
inline void div_metric_inv_into(const Eigen::LLT<Mat>& llt, const Mat& a, const Vec& inv_slacks, Mat& c,
                                Vec& weights, Vec& out) {
  const Mat& l = llt.matrixLLT();
  const Eigen::Index d = a.cols();
  c = a.transpose();
  for (Eigen::Index k = 0; k < c.cols(); ++k) {
    double norm2 = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      double v = c(i, k);
      for (Eigen::Index j = 0; j < i; ++j) v -= l(i, j) * c(j, k);
      v /= l(i, i);
      c(i, k) = v;
      norm2 += v * v;
    }
    const double inv = inv_slacks(k);
    weights(k) = norm2 * inv * inv * inv;
  }
  out.noalias() = c.lazyProduct(weights);
  for (Eigen::Index i = d; i-- > 0;) {
    double v = out(i);
    for (Eigen::Index j = i + 1; j < d; ++j) v -= l(j, i) * out(j);
    out(i) = v / l(i, i);
  }
  out *= -2.0;
}

}  // namespace detail

/// Row-wise divergence of g^-1, the vector with entries sum_j d_j (g^-1)_ij.
inline Vec div_metric_inv(const MetricEval& me, const ConstraintSet& set) {
  Mat c;
  Vec weights(set.normals().rows());
  Vec out(set.dimension());
  detail::div_metric_inv_into(me.chol, set.normals(), me.slacks.cwiseInverse(), c, weights, out);
  return out;
}

inline Vec div_metric_inv(const Vec& x, const ConstraintSet& set) { return div_metric_inv(metric_at(x, set), set); }

/// Default retraction margin factor: retracted points keep slack >= eps * sqrt(gamma).
inline constexpr double default_retraction_eps = 1e-3;

/// One geodesic-random-walk step x -> retract(x + gamma * drift + sqrt(gamma) * g^-1/2 z).
inline Vec grw_step(const MetricEval& me, const Vec& drift, double gamma, const Vec& z, const ConstraintSet& set,
                    double eps = default_retraction_eps) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::config_error, "step size must be positive");
  Vec w = gamma * drift + std::sqrt(gamma) * noise_map(me, z);
  Vec candidate = me.x + w;
  if (min_slack(candidate, set) > 0.0) return candidate;

  // Never demand more margin than the current point has.
  const double target = std::min(eps * std::sqrt(gamma), 0.5 * me.slacks.minCoeff());
  for (int halving = 1; halving <= 60; ++halving) {
    w *= 0.5;
    candidate = me.x + w;
    if (min_slack(candidate, set) >= target) return candidate;
  }
  throw Error(ErrorKind::step_failure, "retraction failed to return inside after 60 halvings");
}

inline Vec grw_step(const Vec& x, const Vec& drift, double gamma, const Vec& z, const ConstraintSet& set,
                    double eps = default_retraction_eps) {
  return grw_step(metric_at(x, set), drift, gamma, z, set, eps);
}

/// Preallocated buffers for repeated barrier steps on one polytope. Computes
/// the same quantities as metric_at / div_metric_inv / grw_step without
/// per-step allocation.
class BarrierWorkspace {
 public:
  explicit BarrierWorkspace(const ConstraintSet& set) : set_(&set) {
    require_polytope(set);
    m_ = set.normals().rows();
    d_ = set.normals().cols();
    slacks_.resize(m_);
    inv_slacks_.resize(m_);
    l_.resize(d_, d_);
    c_.resize(d_, m_);
    weights_.resize(m_);
    drift_.resize(d_);
    w_.resize(d_);
    candidate_.resize(d_);
  }

  /// x <- retract(x + gamma beta/2 div(g^-1) + sqrt(gamma beta) g^-1/2 z).
  void forward_step(Vec& x, double beta, double gamma, const Vec& z, double eps = default_retraction_eps) {
    if (!(gamma > 0.0)) throw Error(ErrorKind::config_error, "step size must be positive");
    const Mat& a = set_->normals();
    const Vec& b = set_->offsets();
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m_; ++k) {
      double v = b(k);
      for (Eigen::Index i = 0; i < d_; ++i) v -= a(k, i) * x(i);
      slacks_(k) = v;
      inv_slacks_(k) = 1.0 / v;
      smallest = std::min(smallest, v);
    }
    if (!(smallest > 0.0)) throw Error(ErrorKind::infeasible_point, "point is not strictly inside the polytope");
    factor_metric(a);

    // c = L^-1 A^T, weights = ||c_k||^2 / s_k^3
    for (Eigen::Index k = 0; k < m_; ++k) {
      double norm2 = 0.0;
      for (Eigen::Index i = 0; i < d_; ++i) {
        double v = a(k, i);
        for (Eigen::Index j = 0; j < i; ++j) v -= l_(i, j) * c_(j, k);
        v /= l_(i, i);
        c_(i, k) = v;
        norm2 += v * v;
      }
      const double inv = inv_slacks_(k);
      weights_(k) = norm2 * inv * inv * inv;
    }
    for (Eigen::Index i = 0; i < d_; ++i) {
      double v = 0.0;
      for (Eigen::Index k = 0; k < m_; ++k) v += c_(i, k) * weights_(k);
      drift_(i) = v;
    }
    solve_upper(drift_);
    const double sqrt_beta = std::sqrt(beta);
    for (Eigen::Index i = 0; i < d_; ++i) w_(i) = sqrt_beta * z(i);
    solve_upper(w_);
    const double drift_scale = gamma * (-2.0 * 0.5 * beta);
    const double noise_scale = std::sqrt(gamma);
    for (Eigen::Index i = 0; i < d_; ++i) w_(i) = drift_scale * drift_(i) + noise_scale * w_(i);
    retract(x, gamma, eps, smallest);
  }

 private:
  /// Lower Cholesky factor of g = A^T S^-2 A into l_.
  void factor_metric(const Mat& a) {
    for (Eigen::Index j = 0; j < d_; ++j) {
      for (Eigen::Index i = j; i < d_; ++i) {
        double v = 0.0;
        for (Eigen::Index k = 0; k < m_; ++k) v += a(k, i) * a(k, j) * inv_slacks_(k) * inv_slacks_(k);
        l_(i, j) = v;
      }
    }
    for (Eigen::Index j = 0; j < d_; ++j) {
      double diag = l_(j, j);
      for (Eigen::Index p = 0; p < j; ++p) diag -= l_(j, p) * l_(j, p);
      if (!(diag > 0.0) || !std::isfinite(diag)) {
        throw Error(ErrorKind::degenerate_metric, "Cholesky factorization of the barrier metric failed");
      }
      diag = std::sqrt(diag);
      l_(j, j) = diag;
      for (Eigen::Index i = j + 1; i < d_; ++i) {
        double v = l_(i, j);
        for (Eigen::Index p = 0; p < j; ++p) v -= l_(i, p) * l_(j, p);
        l_(i, j) = v / diag;
      }
    }
  }

  /// v <- L^-T v.
  void solve_upper(Vec& v) const {
    for (Eigen::Index i = d_; i-- > 0;) {
      double r = v(i);
      for (Eigen::Index j = i + 1; j < d_; ++j) r -= l_(j, i) * v(j);
      v(i) = r / l_(i, i);
    }
  }

  double candidate_min_slack() const {
    const Mat& a = set_->normals();
    const Vec& b = set_->offsets();
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m_; ++k) {
      double v = b(k);
      for (Eigen::Index i = 0; i < d_; ++i) v -= a(k, i) * candidate_(i);
      smallest = std::min(smallest, v);
    }
    return smallest;
  }

  void retract(Vec& x, double gamma, double eps, double current_slack) {
    candidate_ = x + w_;
    if (candidate_min_slack() > 0.0) {
      x = candidate_;
      return;
    }
    const double target = std::min(eps * std::sqrt(gamma), 0.5 * current_slack);
    for (int halving = 1; halving <= 60; ++halving) {
      w_ *= 0.5;
      candidate_ = x + w_;
      if (candidate_min_slack() >= target) {
        x = candidate_;
        return;
      }
    }
    throw Error(ErrorKind::step_failure, "retraction failed to return inside after 60 halvings");
  }

  const ConstraintSet* set_;
  Eigen::Index m_ = 0, d_ = 0;
  Vec slacks_, inv_slacks_;
  Mat l_, c_;
  Vec weights_, drift_, w_, candidate_;
};

/// Forward barrier Langevin step at time t: drift beta/2 div(g^-1), noise sqrt(beta) g^-1/2.
inline Vec barrier_forward_step(const Vec& x, double t, const NoiseSchedule& schedule, const Vec& z,
                                const ConstraintSet& set, double eps = default_retraction_eps) {
  BarrierWorkspace ws(set);
  Vec next = x;
  ws.forward_step(next, schedule.beta(t), schedule.step_size(), z, eps);
  return next;
}

/// Time-reversal drift 1/2 div(g^-1) + g^-1 score, before beta scaling.
inline Vec barrier_backward_drift(const MetricEval& me, const Vec& score, const ConstraintSet& set) {
  return 0.5 * div_metric_inv(me, set) + me.chol.solve(score);
}

inline Vec barrier_backward_drift(const Vec& x, const Vec& score, const ConstraintSet& set) {
  return barrier_backward_drift(metric_at(x, set), score, set);
}

/// Probability-flow ODE drift 1/2 div(g^-1) - 1/2 g^-1 score.
inline Vec probability_flow_drift(const Vec& x, const Vec& score, const ConstraintSet& set) {
  const MetricEval me = metric_at(x, set);
  return 0.5 * div_metric_inv(me, set) - 0.5 * me.chol.solve(score);
}

}  // namespace cdiff
