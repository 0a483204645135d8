// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cdiff/error.hpp"
#include "cdiff/geometry.hpp"
#include "cdiff/mlp.hpp"
#include "cdiff/random.hpp"
#include "cdiff/trajectory.hpp"

namespace cdiff {

inline constexpr double default_delta = 0.01;

/// Score network s(t, x) = ReLU(d(x, boundary) - delta) * NN(x features, t / T).
/// Periodic coordinates enter the network as (cos, sin) pairs.
struct ScoreModel {
  Mlp net;
  double delta = default_delta;
  DomainSpec domain;
  double horizon = 1.0;
};

inline std::size_t feature_dim(const DomainSpec& domain) {
  return domain.constrained_dims() + 2 * domain.periodic_dims() + 1;
}

inline MlpShape score_network_shape(const DomainSpec& domain, std::size_t hidden_layers, std::size_t width) {
  return {feature_dim(domain), domain.dimension(), hidden_layers, width};
}

inline ScoreModel make_score_model(const DomainSpec& domain, double horizon, std::size_t hidden_layers,
                                   std::size_t width, double delta, Rng& rng) {
  if (!(delta >= 0.0)) throw Error(ErrorKind::config_error, "delta must be >= 0");
  return {Mlp::glorot(score_network_shape(domain, hidden_layers, width), rng), delta, domain, horizon};
}

/// Boundary gate ReLU(d(x) - delta) and its gradient in the full coordinate
/// vector (zero on periodic coordinates). Domains without constraints are
/// not gated.
struct Gate {
  double value = 1.0;
  Vec grad;
};

inline Gate boundary_gate(const DomainSpec& domain, double delta, const Vec& x) {
  Gate gate;
  gate.grad = Vec::Zero(x.size());
  const auto& set = domain.constrained();
  if (!set.has_constraints()) return gate;
  const auto dc = static_cast<Eigen::Index>(domain.constrained_dims());
  const Vec xc = x.head(dc);

  double best = std::numeric_limits<double>::infinity();
  Vec best_grad = Vec::Zero(dc);
  for (const auto& c : set.linear()) {
    const double s = c.slack(xc);
    if (s < best) {
      best = s;
      best_grad = -c.normal();
    }
  }
  for (const auto& c : set.spheres()) {
    const double s = c.slack(xc);
    if (s < best) {
      best = s;
      const Vec diff = xc - c.center();
      const double norm = diff.norm();
      best_grad = norm > 0.0 ? Vec(-diff / norm) : Vec::Zero(dc);
    }
  }
  if (best - delta > 0.0) {
    gate.value = best - delta;
    gate.grad.head(dc) = best_grad;
  } else {
    gate.value = 0.0;
  }
  return gate;
}

/// Network input for one point.
inline Vec score_features(const ScoreModel& model, double t, const Vec& x) {
  const auto dc = static_cast<Eigen::Index>(model.domain.constrained_dims());
  const auto dp = static_cast<Eigen::Index>(model.domain.periodic_dims());
  Vec u(dc + 2 * dp + 1);
  u.head(dc) = x.head(dc);
  for (Eigen::Index j = 0; j < dp; ++j) {
    u(dc + 2 * j) = std::cos(x(dc + j));
    u(dc + 2 * j + 1) = std::sin(x(dc + j));
  }
  u(dc + 2 * dp) = t / model.horizon;
  return u;
}

/// Pushes an x-space direction through the feature map at x.
inline Vec feature_tangent(const ScoreModel& model, const Vec& x, const Vec& direction) {
  const auto dc = static_cast<Eigen::Index>(model.domain.constrained_dims());
  const auto dp = static_cast<Eigen::Index>(model.domain.periodic_dims());
  Vec v = Vec::Zero(dc + 2 * dp + 1);
  v.head(dc) = direction.head(dc);
  for (Eigen::Index j = 0; j < dp; ++j) {
    v(dc + 2 * j) = -std::sin(x(dc + j)) * direction(dc + j);
    v(dc + 2 * j + 1) = std::cos(x(dc + j)) * direction(dc + j);
  }
  return v;
}

/// Scores for a batch: times(b) pairs with column b of states.
inline Mat score_batch(const ScoreModel& model, const Vec& times, const Mat& states) {
  const auto n = states.cols();
  Mat features(static_cast<Eigen::Index>(feature_dim(model.domain)), n);
  Vec gates(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const Vec x = states.col(b);
    features.col(b) = score_features(model, times(b), x);
    gates(b) = boundary_gate(model.domain, model.delta, x).value;
  }
  Mat out = model.net.forward(features);
  return out * gates.asDiagonal();
}

inline Vec score_eval(const ScoreModel& model, double t, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != model.domain.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "point dimension differs from the model domain");
  }
  const Gate gate = boundary_gate(model.domain, model.delta, x);
  if (gate.value == 0.0) return Vec::Zero(x.size());
  return gate.value * model.net.forward(score_features(model, t, x));
}

enum class DivergenceMode { exact, hutchinson };

/// Probe directions for one sample: unit vectors (exact) or Rademacher
/// vectors (Hutchinson). Each column is one direction.
inline Mat divergence_probes(std::size_t dim, DivergenceMode mode, std::size_t probes, Rng* rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (mode == DivergenceMode::exact) return Mat::Identity(d, d);
  if (!rng || probes < 1) throw Error(ErrorKind::config_error, "Hutchinson divergence needs an rng and >= 1 probe");
  Mat p(d, static_cast<Eigen::Index>(probes));
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) p(i, j) = rng->uniform() < 0.5 ? -1.0 : 1.0;
  }
  return p;
}

struct IsmEvaluation {
  double loss = 0.0;
  Vec divergence;       // per sample
  Vec gradient;         // flat parameter gradient (empty unless requested)
};

namespace detail {

inline IsmEvaluation evaluate_ism(const ScoreModel& model, const Vec& times, const Mat& states, bool with_gradient,
                                  DivergenceMode mode, std::size_t probes, Rng* rng) {
  const auto n = states.cols();
  if (n == 0) throw Error(ErrorKind::empty_input, "ISM batch is empty");
  const std::size_t dim = model.domain.dimension();
  const auto d = static_cast<Eigen::Index>(dim);
  const std::size_t k_count = mode == DivergenceMode::exact ? dim : probes;
  const auto k = static_cast<Eigen::Index>(k_count);
  const double probe_weight = mode == DivergenceMode::exact ? 1.0 : 1.0 / static_cast<double>(probes);
  const auto feat = static_cast<Eigen::Index>(feature_dim(model.domain));

  Mat features(feat, n);
  Mat tangents(feat, k * n);
  Mat out_dirs(d, k * n);
  Vec gate_value(n);
  Mat gate_grad(d, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const Vec x = states.col(b);
    features.col(b) = score_features(model, times(b), x);
    const Gate gate = boundary_gate(model.domain, model.delta, x);
    gate_value(b) = gate.value;
    gate_grad.col(b) = gate.grad;
    const Mat dirs = divergence_probes(dim, mode, probes, rng);
    for (Eigen::Index j = 0; j < k; ++j) {
      tangents.col(j * n + b) = feature_tangent(model, x, dirs.col(j));
      out_dirs.col(j * n + b) = dirs.col(j);
    }
  }

  const TangentPass pass = forward_with_tangents(model.net, features, tangents, k_count);

  IsmEvaluation result;
  result.divergence.resize(n);
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    double net_div = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) net_div += out_dirs.col(j * n + b).dot(pass.out_dot.col(j * n + b));
    net_div *= probe_weight;
    const double g = gate_value(b);
    const double div = gate_grad.col(b).dot(pass.out.col(b)) + g * net_div;
    result.divergence(b) = div;
    const double weight = times(b) + 1.0;
    total += weight * (0.5 * g * g * pass.out.col(b).squaredNorm() + div);
  }
  result.loss = total / static_cast<double>(n);

  if (with_gradient) {
    const double inv_n = 1.0 / static_cast<double>(n);
    Mat out_adj(d, n);
    Mat out_dot_adj(d, k * n);
    for (Eigen::Index b = 0; b < n; ++b) {
      const double weight = (times(b) + 1.0) * inv_n;
      const double g = gate_value(b);
      out_adj.col(b) = weight * (g * g * pass.out.col(b) + gate_grad.col(b));
      for (Eigen::Index j = 0; j < k; ++j) {
        out_dot_adj.col(j * n + b) = (weight * g * probe_weight) * out_dirs.col(j * n + b);
      }
    }
    result.gradient = backward_with_tangents(model.net, pass, out_adj, out_dot_adj);
  }
  return result;
}

}  // namespace detail

/// Exact divergence sum_i d s_i / d x_i, including the gate derivative.
inline double divergence(const ScoreModel& model, double t, const Vec& x) {
  return detail::evaluate_ism(model, Vec::Constant(1, t), Mat(x), false, DivergenceMode::exact, 0, nullptr)
      .divergence(0);
}

/// Unbiased Rademacher trace estimate of the divergence.
inline double divergence_hutchinson(const ScoreModel& model, double t, const Vec& x, Rng& rng, std::size_t probes) {
  return detail::evaluate_ism(model, Vec::Constant(1, t), Mat(x), false, DivergenceMode::hutchinson, probes, &rng)
      .divergence(0);
}

/// Mean over the batch of (t + 1) (1/2 ||s||^2 + div s).
inline double ism_loss(const ScoreModel& model, const Vec& times, const Mat& states,
                       DivergenceMode mode = DivergenceMode::exact, std::size_t probes = 1, Rng* rng = nullptr) {
  return detail::evaluate_ism(model, times, states, false, mode, probes, rng).loss;
}

struct LossAndGradient {
  double loss = 0.0;
  Vec gradient;
};

inline LossAndGradient ism_loss_gradient(const ScoreModel& model, const Vec& times, const Mat& states,
                                         DivergenceMode mode = DivergenceMode::exact, std::size_t probes = 1,
                                         Rng* rng = nullptr) {
  auto eval = detail::evaluate_ism(model, times, states, true, mode, probes, rng);
  return {eval.loss, std::move(eval.gradient)};
}

inline double ism_loss(const ScoreModel& model, const TrajectorySlices& batch) {
  return ism_loss(model, batch.times, batch.states);
}

inline LossAndGradient ism_loss_gradient(const ScoreModel& model, const TrajectorySlices& batch) {
  return ism_loss_gradient(model, batch.times, batch.states);
}

}  // namespace cdiff
