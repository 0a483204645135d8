// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cdiff/barrier.hpp"
#include "cdiff/domain_io.hpp"
#include "cdiff/error.hpp"
#include "cdiff/geometry.hpp"
#include "cdiff/random.hpp"
#include "cdiff/reflected.hpp"
#include "cdiff/schedule.hpp"
#include "cdiff/score.hpp"
#include "cdiff/trajectory.hpp"

namespace cdiff {

enum class Method { barrier, reflected };

inline std::string to_string(Method m) { return m == Method::barrier ? "barrier" : "reflected"; }

inline Method method_from_string(const std::string& s) {
  if (s == "barrier") return Method::barrier;
  if (s == "reflected") return Method::reflected;
  throw Error(ErrorKind::config_error, "unknown method '" + s + "' (expected barrier or reflected)");
}

inline void require_method_supported(Method method, const DomainSpec& domain) {
  if (method == Method::barrier) require_polytope(domain.constrained());
}

/// Splits [0, n) into contiguous chunks, one thread per chunk.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        if (begin < end) fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Uniform reference
// ---------------------------------------------------------------------------

/// Hit-and-run: move to a uniform point on the chord through x along a
/// uniform random direction.
inline Vec hit_and_run(const ConstraintSet& set, const Vec& x0, std::size_t n_steps, Rng& rng) {
  Vec x = x0;
  const auto d = static_cast<Eigen::Index>(set.dimension());
  for (std::size_t step = 0; step < n_steps; ++step) {
    const Vec u = rng.direction(d);
    const double forward = ray_intersect(x, u, set).distance;
    const double backward = ray_intersect(x, -u, set).distance;
    Vec candidate;
    do {
      candidate = x + rng.uniform(-backward, forward) * u;
    } while (!is_interior(candidate, set));
    x = std::move(candidate);
  }
  return x;
}

inline constexpr std::size_t hit_and_run_burn_in = 200;

inline bool is_ball_only(const ConstraintSet& set) { return set.linear().empty() && set.spheres().size() == 1; }

/// n independent uniform draws, one stream per sample (columns of the result).
inline Samples uniform_reference(const DomainSpec& domain, std::size_t n, const RandomStreams& streams,
                                 std::size_t workers = 1) {
  const auto dc = static_cast<Eigen::Index>(domain.constrained_dims());
  const auto dp = static_cast<Eigen::Index>(domain.periodic_dims());
  const auto& set = domain.constrained();
  if (dc > 0 && !set.has_constraints()) {
    throw Error(ErrorKind::unsupported_domain, "uniform reference needs a bounded domain");
  }
  Samples out(dc + dp, static_cast<Eigen::Index>(n));
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = streams.stream(i);
      const auto col = static_cast<Eigen::Index>(i);
      if (dc > 0) {
        if (is_ball_only(set)) {
          const auto& ball = set.spheres().front();
          const double radius =
              ball.radius() * std::pow(rng.uniform(), 1.0 / static_cast<double>(dc));
          out.col(col).head(dc) = ball.center() + radius * rng.direction(dc);
        } else {
          try {
            out.col(col).head(dc) = hit_and_run(set, set.interior_point(), hit_and_run_burn_in, rng);
          } catch (const Error& e) {
            if (e.kind() == ErrorKind::no_intersection) {
              throw Error(ErrorKind::unsupported_domain, "uniform reference needs a bounded domain");
            }
            throw;
          }
        }
      }
      for (Eigen::Index j = 0; j < dp; ++j) out(dc + j, col) = rng.uniform(0.0, two_pi);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Forward noising
// ---------------------------------------------------------------------------

namespace detail {

/// Forward step on x in place; `ws` must be set for the barrier method.
inline void forward_step_in_place(Vec& x, double t, Method method, const DomainSpec& domain,
                                  const NoiseSchedule& schedule, Vec& z, BarrierWorkspace* ws) {
  const auto dc = static_cast<Eigen::Index>(domain.constrained_dims());
  const auto dp = static_cast<Eigen::Index>(domain.periodic_dims());
  const double beta = schedule.beta(t);
  const double scale = std::sqrt(schedule.step_size() * beta);
  if (method == Method::reflected) {
    z *= scale;
    reflected_step_in_place(x, z, domain);
    return;
  }
  if (dc > 0) {
    if (dp == 0) {
      ws->forward_step(x, beta, schedule.step_size(), z);
    } else {
      Vec xc = x.head(dc);
      const Vec zc = z.head(dc);
      ws->forward_step(xc, beta, schedule.step_size(), zc);
      x.head(dc) = xc;
    }
  }
  for (Eigen::Index j = dc; j < dc + dp; ++j) x(j) = wrap_angle(x(j) + scale * z(j));
}

}  // namespace detail

/// One forward step of either noising process at time t with noise z.
/// Periodic coordinates always follow plain wrapped Brownian motion.
inline Vec forward_step(const Vec& x, double t, Method method, const DomainSpec& domain,
                        const NoiseSchedule& schedule, const Vec& z) {
  require_method_supported(method, domain);
  Vec next = x;
  Vec noise = z;
  std::optional<BarrierWorkspace> ws;
  if (method == Method::barrier && domain.constrained_dims() > 0) ws.emplace(domain.constrained());
  detail::forward_step_in_place(next, t, method, domain, schedule, noise, ws ? &*ws : nullptr);
  return next;
}

/// Per data point, one forward trajectory with k slices at stratified times
/// t_j in ((j-1) T / k, j T / k], each rounded up to the step grid.
inline TrajectorySlices forward_slices(const Samples& data, Method method, const DomainSpec& domain,
                                       const NoiseSchedule& schedule, std::size_t k, const RandomStreams& streams,
                                       std::size_t workers = 1) {
  if (k < 1) throw Error(ErrorKind::config_error, "slice count must be >= 1");
  require_method_supported(method, domain);
  const auto n = static_cast<std::size_t>(data.cols());
  const auto d = data.rows();
  if (static_cast<std::size_t>(d) != domain.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "data dimension differs from domain");
  }
  const double gamma = schedule.step_size();
  const double horizon = schedule.horizon();
  const std::size_t steps = schedule.steps();

  TrajectorySlices slices;
  slices.times.resize(static_cast<Eigen::Index>(n * k));
  slices.states.resize(d, static_cast<Eigen::Index>(n * k));
  slices.origin_index.resize(n * k);

  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> targets(k);
    Vec z(d);
    std::optional<BarrierWorkspace> ws;
    if (method == Method::barrier && domain.constrained_dims() > 0) ws.emplace(domain.constrained());
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = streams.stream(i);
      for (std::size_t j = 0; j < k; ++j) {
        const double t = (static_cast<double>(j) + rng.uniform()) * horizon / static_cast<double>(k);
        auto step = static_cast<std::size_t>(std::ceil(t / gamma - 1e-9));
        targets[j] = std::clamp<std::size_t>(step, 1, steps);
      }
      Vec x = data.col(static_cast<Eigen::Index>(i));
      const std::size_t last = *std::max_element(targets.begin(), targets.end());
      for (std::size_t s = 1; s <= last; ++s) {
        rng.fill_normal(z);
        detail::forward_step_in_place(x, static_cast<double>(s - 1) * gamma, method, domain, schedule, z,
                                      ws ? &*ws : nullptr);
        for (std::size_t j = 0; j < k; ++j) {
          if (targets[j] != s) continue;
          const auto col = static_cast<Eigen::Index>(i * k + j);
          slices.times(col) = static_cast<double>(s) * gamma;
          slices.states.col(col) = x;
          slices.origin_index[i * k + j] = i;
        }
      }
    }
  });
  return slices;
}

// ---------------------------------------------------------------------------
// Backward sampling
// ---------------------------------------------------------------------------

struct LowTempConfig {
  double lambda0 = 1.0;
  double psi = 0.0;
};

/// lambda_t = lambda0 / (alpha_t + (1 - alpha_t) lambda0) at forward time t.
inline double low_temperature_lambda(const NoiseSchedule& schedule, double lambda0, double t) {
  const double alpha = schedule.alpha(t);
  return lambda0 / (alpha + (1.0 - alpha) * lambda0);
}

/// Factor applied to the score: lambda_t + lambda0 psi / 2.
inline double low_temperature_multiplier(const NoiseSchedule& schedule, const LowTempConfig& cfg, double t) {
  return low_temperature_lambda(schedule, cfg.lambda0, t) + 0.5 * cfg.lambda0 * cfg.psi;
}

inline void validate(const LowTempConfig& cfg) {
  if (!(cfg.lambda0 >= 1.0) || !(cfg.psi >= 0.0)) {
    throw Error(ErrorKind::config_error, "low-temperature sampling needs lambda0 >= 1 and psi >= 0");
  }
}

/// One reverse step at backward time t for a point x, given the (already
/// scaled) score at forward time T - t.
inline Vec backward_step(const Vec& x, double t, const Vec& score, Method method, const DomainSpec& domain,
                         const NoiseSchedule& schedule, double noise_scale, Rng& rng) {
  if (method == Method::reflected) {
    return reflected_backward_step(x, t, score, schedule, domain, rng, 1.0, noise_scale);
  }
  const auto dc = static_cast<Eigen::Index>(domain.constrained_dims());
  const auto dp = static_cast<Eigen::Index>(domain.periodic_dims());
  const double gamma = schedule.step_size();
  const double beta = schedule.beta(schedule.horizon() - t);
  const Vec z = rng.normal_vector(x.size());
  Vec next(x.size());
  if (dc > 0) {
    const auto& set = domain.constrained();
    const MetricEval me = metric_at(x.head(dc), set);
    const Vec drift = beta * barrier_backward_drift(me, score.head(dc), set);
    next.head(dc) = grw_step(me, drift, gamma, noise_scale * std::sqrt(beta) * z.head(dc), set);
  }
  for (Eigen::Index j = dc; j < dc + dp; ++j) {
    next(j) = wrap_angle(x(j) + gamma * beta * score(j) + noise_scale * std::sqrt(gamma * beta) * z(j));
  }
  return next;
}

/// Integrates the reverse process from the uniform reference over all N
/// steps and returns the terminal states (one per column).
inline Samples backward_sample(const ScoreModel& model, Method method, const DomainSpec& domain,
                               const NoiseSchedule& schedule, std::size_t n, const LowTempConfig& lowtemp,
                               const RandomStreams& streams, std::size_t workers = 1) {
  if (domain_hash(model.domain) != domain_hash(domain)) {
    throw Error(ErrorKind::model_domain_mismatch, "score model was trained on a different domain");
  }
  validate(lowtemp);
  require_method_supported(method, domain);

  Samples x = uniform_reference(domain, n, streams.child(0), workers);
  std::vector<Rng> rngs;
  rngs.reserve(n);
  const RandomStreams noise_streams = streams.child(1);
  for (std::size_t i = 0; i < n; ++i) rngs.push_back(noise_streams.stream(i));

  const double gamma = schedule.step_size();
  const double noise_scale = std::sqrt(1.0 + lowtemp.psi);
  for (std::size_t step = 0; step < schedule.steps(); ++step) {
    const double t = static_cast<double>(step) * gamma;
    const double forward_time = schedule.horizon() - t;
    const double multiplier = low_temperature_multiplier(schedule, lowtemp, forward_time);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
      const auto b = static_cast<Eigen::Index>(begin);
      const auto count = static_cast<Eigen::Index>(end - begin);
      const Mat scores =
          multiplier * score_batch(model, Vec::Constant(count, forward_time), x.middleCols(b, count));
      for (Eigen::Index i = 0; i < count; ++i) {
        x.col(b + i) = backward_step(x.col(b + i), t, scores.col(i), method, domain, schedule, noise_scale,
                                     rngs[static_cast<std::size_t>(b + i)]);
      }
    });
  }
  return x;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct MixtureComponent {
  double weight = 1.0;
  Vec center;
};

/// Mixture of "wrapped normals": each component pushes N(0, sigma2 I)
/// through a reflected step from its center.
struct MixtureSpec {
  std::vector<MixtureComponent> components;
  double sigma2 = 0.25;
};

/// 0.7 at (0.5, ..., 0.5) and 0.3 at (-0.5, ..., -0.5), sigma^2 = 0.25.
inline MixtureSpec hypercube_mixture(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {{{0.7, Vec::Constant(n, 0.5)}, {0.3, Vec::Constant(n, -0.5)}}, 0.25};
}

/// Two-mode mixture inside the simplex chart, sigma^2 = 0.01.
inline MixtureSpec simplex_mixture(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  const double base = 0.5 / static_cast<double>(d + 1);
  Vec a = Vec::Constant(n, base);
  a(0) = 0.5;
  Vec b = Vec::Constant(n, base);
  b(n - 1) = 0.5;
  if (d == 1) b(0) = base;
  return {{{0.7, a}, {0.3, b}}, 0.01};
}

inline Samples make_synthetic_dataset(const DomainSpec& domain, const MixtureSpec& mixture, std::size_t n,
                                      const RandomStreams& streams, std::size_t workers = 1) {
  if (mixture.components.empty()) throw Error(ErrorKind::config_error, "mixture has no components");
  if (!(mixture.sigma2 >= 0.0)) throw Error(ErrorKind::config_error, "mixture variance must be >= 0");
  const auto d = static_cast<Eigen::Index>(domain.dimension());
  const auto dc = static_cast<Eigen::Index>(domain.constrained_dims());
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& c : mixture.components) {
    if (c.center.size() != d) throw Error(ErrorKind::dimension_mismatch, "mixture center dimension differs from domain");
    if (dc > 0 && !is_interior(c.center.head(dc), domain.constrained())) {
      throw Error(ErrorKind::infeasible_point, "mixture center is not inside the domain");
    }
    if (!(c.weight > 0.0)) throw Error(ErrorKind::config_error, "mixture weights must be positive");
    total += c.weight;
    cumulative.push_back(total);
  }
  const double sigma = std::sqrt(mixture.sigma2);
  Samples out(d, static_cast<Eigen::Index>(n));
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = streams.stream(i);
      const double u = rng.uniform() * total;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const auto comp = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
          it - cumulative.begin(), static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
      const Vec v = sigma * rng.normal_vector(d);
      out.col(static_cast<Eigen::Index>(i)) = reflected_step(mixture.components[comp].center, v, domain).endpoint;
    }
  });
  return out;
}

/// Which mixture component produced each sample is not recorded; this
/// helper re-derives it from the stream for tests and summaries.
inline std::vector<std::size_t> synthetic_components(const MixtureSpec& mixture, std::size_t n,
                                                     const RandomStreams& streams) {
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& c : mixture.components) cumulative.push_back(total += c.weight);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = streams.stream(i);
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    out[i] = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                               static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
  }
  return out;
}

}  // namespace cdiff
