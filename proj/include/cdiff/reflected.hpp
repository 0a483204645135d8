// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cdiff/error.hpp"
#include "cdiff/geometry.hpp"
#include "cdiff/random.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

inline constexpr std::size_t max_bounces = 1'000'000;

struct ReflectedStepTrace {
  Vec endpoint;
  std::size_t bounces = 0;
  double path_length_used = 0.0;
};

inline double wrap_angle(double theta) {
  double r = std::fmod(theta, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

namespace detail {

/// True when every face is farther than `reach` from x.
inline bool clear_of_faces(const Vec& x, const ConstraintSet& set, double reach) {
  for (const auto& c : set.linear()) {
    if (!(c.slack(x) > reach)) return false;
  }
  for (const auto& c : set.spheres()) {
    if (!(c.slack(x) > reach)) return false;
  }
  return true;
}

/// Moves x along v inside the set, reflecting specularly at every face.
/// Returns the bounce count; x is updated in place.
inline std::size_t reflect_in_place(Vec& x, const Vec& v, const ConstraintSet& set, double* travelled = nullptr) {
  double remaining = v.norm();
  double used = 0.0;
  std::size_t bounces = 0;
  if (remaining > 0.0 && clear_of_faces(x, set, remaining + tolerance::nudge)) {
    x += v;
    if (travelled) *travelled = remaining;
    return 0;
  }
  if (remaining > 0.0) {
    Vec s = v / remaining;
    while (remaining > 0.0) {
      const auto hit = nearest_hit(x, s, set);
      if (!hit || hit->distance >= remaining) {
        x += remaining * s;
        used += remaining;
        break;
      }
      x += hit->distance * s;
      used += hit->distance;
      remaining -= hit->distance;
      if (hit->hit.kind == ConstraintId::Kind::linear) {
        const Vec& n = set.linear()[hit->hit.index].normal();
        s -= 2.0 * s.dot(n) * n;
        x -= tolerance::nudge * n;
      } else {
        const Vec n = sphere_normal(set.spheres()[hit->hit.index], x);
        s -= 2.0 * s.dot(n) * n;
        x -= tolerance::nudge * n;
      }
      if (++bounces > max_bounces) {
        throw Error(ErrorKind::runaway_reflection, "step exceeded the bounce limit");
      }
    }
  }
  // Landing exactly on a face (or a rounding hair past it) would strand the
  // next step; push such points back inside.
  for (const auto& c : set.linear()) {
    const double slack = c.slack(x);
    if (slack <= 0.0) x -= (tolerance::nudge - slack) * c.normal();
  }
  for (const auto& c : set.spheres()) {
    if (c.slack(x) <= 0.0) x = c.center() + (x - c.center()) * ((c.radius() - tolerance::nudge) / (x - c.center()).norm());
  }
  if (travelled) *travelled = used;
  return bounces;
}

/// Start-point check without temporaries.
inline bool starts_inside(const Vec& x, const ConstraintSet& set) {
  for (const auto& c : set.linear()) {
    if (!(c.slack(x) > -tolerance::surface)) return false;
  }
  for (const auto& c : set.spheres()) {
    if (!(c.slack(x) > -tolerance::surface)) return false;
  }
  return true;
}

/// reflected_step on x in place; returns the bounce count.
inline std::size_t reflected_step_in_place(Vec& x, const Vec& v, const DomainSpec& domain,
                                           double* constrained_length = nullptr) {
  const auto dc = static_cast<Eigen::Index>(domain.constrained_dims());
  const auto dp = static_cast<Eigen::Index>(domain.periodic_dims());
  if (x.size() != dc + dp || v.size() != dc + dp) {
    throw Error(ErrorKind::dimension_mismatch, "step dimension differs from domain");
  }
  std::size_t bounces = 0;
  if (dc > 0) {
    const auto& set = domain.constrained();
    if (dp == 0) {
      if (!starts_inside(x, set)) throw Error(ErrorKind::infeasible_point, "reflected step must start strictly inside");
      bounces = reflect_in_place(x, v, set, constrained_length);
    } else {
      Vec xc = x.head(dc);
      if (!starts_inside(xc, set)) throw Error(ErrorKind::infeasible_point, "reflected step must start strictly inside");
      bounces = reflect_in_place(xc, v.head(dc), set, constrained_length);
      x.head(dc) = xc;
    }
  } else if (constrained_length) {
    *constrained_length = 0.0;
  }
  for (Eigen::Index i = dc; i < dc + dp; ++i) x(i) = wrap_angle(x(i) + v(i));
  return bounces;
}

}  // namespace detail

/// Straight-line step of total length ||v|| with specular reflection at the
/// constraint faces; periodic coordinates wrap modulo 2 pi.
inline ReflectedStepTrace reflected_step(const Vec& x, const Vec& v, const DomainSpec& domain) {
  ReflectedStepTrace trace;
  trace.endpoint = x;
  double constrained_length = 0.0;
  trace.bounces = detail::reflected_step_in_place(trace.endpoint, v, domain, &constrained_length);
  const auto dp = static_cast<Eigen::Index>(domain.periodic_dims());
  const double periodic_length = dp > 0 ? v.tail(dp).norm() : 0.0;
  trace.path_length_used = std::hypot(constrained_length, periodic_length);
  return trace;
}

/// Reflected Euler scheme for dX = beta b(t, X) dt + sqrt(beta) dB - dk.
/// Returns all N + 1 states.
template <typename DriftFn>
std::vector<Vec> reflected_random_walk(const Vec& x0, DriftFn&& drift_fn, const NoiseSchedule& schedule,
                                       const DomainSpec& domain, Rng& rng) {
  const double gamma = schedule.step_size();
  std::vector<Vec> path;
  path.reserve(schedule.steps() + 1);
  path.push_back(x0);
  Vec x = x0;
  Vec z(x0.size());
  for (std::size_t k = 0; k < schedule.steps(); ++k) {
    const double t = static_cast<double>(k) * gamma;
    const double beta = schedule.beta(t);
    rng.fill_normal(z);
    const Vec v = gamma * beta * drift_fn(t, x) + std::sqrt(gamma * beta) * z;
    x = reflected_step(x, v, domain).endpoint;
    path.push_back(x);
  }
  return path;
}

/// Zero-drift convenience overload (pure reflected Brownian motion).
inline std::vector<Vec> reflected_random_walk(const Vec& x0, const NoiseSchedule& schedule, const DomainSpec& domain,
                                              Rng& rng) {
  const Vec zero = Vec::Zero(x0.size());
  return reflected_random_walk(x0, [&](double, const Vec&) -> const Vec& { return zero; }, schedule, domain, rng);
}

/// One step of the reversed reflected SDE at backward time t; `score` is the
/// model evaluated at forward time T - t.
inline Vec reflected_backward_step(const Vec& x, double t, const Vec& score, const NoiseSchedule& schedule,
                                   const DomainSpec& domain, Rng& rng, double score_scale = 1.0,
                                   double noise_scale = 1.0) {
  const double gamma = schedule.step_size();
  const double beta = schedule.beta(schedule.horizon() - t);
  Vec z = rng.normal_vector(x.size());
  const Vec v = gamma * beta * score_scale * score + noise_scale * std::sqrt(gamma * beta) * z;
  return reflected_step(x, v, domain).endpoint;
}

}  // namespace cdiff
