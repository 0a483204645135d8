// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "cdiff/error.hpp"
#include "cdiff/random.hpp"
#include "cdiff/sampling.hpp"
#include "cdiff/score.hpp"

namespace cdiff {

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t total_iters = 100000;
  double peak_lr = 2e-4;
  std::size_t warmup_iters = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t slices_per_trajectory = 4;
  DivergenceMode divergence = DivergenceMode::exact;
  std::size_t hutchinson_probes = 1;
  std::size_t workers = 1;

  /// H=3, W=128, 20k iterations.
  static TrainConfig desk() {
    TrainConfig cfg;
    cfg.total_iters = 20000;
    return cfg;
  }
};

inline void validate(const TrainConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::config_error, std::string("training configuration: ") + what);
  };
  require(cfg.batch_size > 0, "batch_size must be positive");
  require(cfg.peak_lr > 0.0, "peak_lr must be positive");
  require(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0, "adam_beta1 must lie in (0, 1)");
  require(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0, "adam_beta2 must lie in (0, 1)");
  require(cfg.adam_eps > 0.0, "adam_eps must be positive");
  require(cfg.slices_per_trajectory > 0, "slices_per_trajectory must be positive");
  require(cfg.workers > 0, "workers must be positive");
  require(cfg.total_iters == 0 || cfg.warmup_iters < cfg.total_iters, "warmup_iters must be below total_iters");
}

/// Linear warmup from 0 to the peak, then cosine decay to 0 at total_iters.
inline double learning_rate(const TrainConfig& cfg, std::size_t iter) {
  if (iter >= cfg.total_iters) return 0.0;
  if (iter < cfg.warmup_iters) {
    return cfg.peak_lr * static_cast<double>(iter) / static_cast<double>(cfg.warmup_iters);
  }
  const double progress =
      static_cast<double>(iter - cfg.warmup_iters) / static_cast<double>(cfg.total_iters - cfg.warmup_iters);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

class Adam {
 public:
  Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(Vec::Zero(static_cast<Eigen::Index>(n))),
        v_(Vec::Zero(static_cast<Eigen::Index>(n))),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  void step(Vec& params, const Vec& grad, double lr) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  Vec m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
};

using TrainCallback = std::function<void(const TrainRecord&)>;

/// Adam on the ISM loss over forward-trajectory slices of random data batches.
/// Each iteration draws its batch and trajectories from streams keyed by the
/// iteration index, so runs are reproducible for a given seed.
inline std::vector<TrainRecord> train(ScoreModel& model, const Samples& dataset, Method method,
                                      const NoiseSchedule& schedule, const TrainConfig& cfg,
                                      const TrainCallback& on_iteration = {}) {
  validate(cfg);
  require_method_supported(method, model.domain);
  if (dataset.cols() == 0) throw Error(ErrorKind::empty_input, "training dataset is empty");
  if (static_cast<std::size_t>(dataset.rows()) != model.domain.dimension()) {
    throw Error(ErrorKind::dimension_mismatch, "dataset dimension differs from the model domain");
  }
  const RandomStreams streams(cfg.seed);
  Adam adam(model.net.num_params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::vector<TrainRecord> history;
  history.reserve(cfg.total_iters);
  Samples batch(dataset.rows(), static_cast<Eigen::Index>(cfg.batch_size));

  for (std::size_t iter = 0; iter < cfg.total_iters; ++iter) {
    const RandomStreams iter_streams = streams.child(iter);
    Rng picker = iter_streams.stream(~std::uint64_t{0});
    for (Eigen::Index b = 0; b < batch.cols(); ++b) {
      const auto idx = static_cast<Eigen::Index>(picker.engine()() % static_cast<std::uint64_t>(dataset.cols()));
      batch.col(b) = dataset.col(idx);
    }
    const TrajectorySlices slices =
        forward_slices(batch, method, model.domain, schedule, cfg.slices_per_trajectory, iter_streams, cfg.workers);
    const auto eval = ism_loss_gradient(model, slices.times, slices.states, cfg.divergence, cfg.hutchinson_probes,
                                        &picker);
    if (!std::isfinite(eval.loss) || !eval.gradient.allFinite()) {
      throw Error(ErrorKind::divergence_failure, "non-finite loss at iteration " + std::to_string(iter));
    }
    const double lr = learning_rate(cfg, iter);
    adam.step(model.net.params(), eval.gradient, lr);
    history.push_back({iter, eval.loss, lr});
    if (on_iteration) on_iteration(history.back());
  }
  return history;
}

}  // namespace cdiff
