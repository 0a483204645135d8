// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>

#include "cdiff/error.hpp"

namespace cdiff {

/// Horizon T split into N steps with a linear rate beta(t) on [0, T].
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(double horizon, std::size_t steps, double beta_min, double beta_max)
      : horizon_(horizon), steps_(steps), beta_min_(beta_min), beta_max_(beta_max) {
    if (!(horizon_ > 0.0) || steps_ < 1 || !(beta_min_ > 0.0) || !(beta_min_ <= beta_max_)) {
      throw Error(ErrorKind::config_error, "schedule needs T > 0, N >= 1 and 0 < beta_min <= beta_max");
    }
  }

  /// beta identically equal to 1.
  static NoiseSchedule unit_rate(double horizon, std::size_t steps) { return {horizon, steps, 1.0, 1.0}; }

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  double beta_min() const noexcept { return beta_min_; }
  double beta_max() const noexcept { return beta_max_; }
  double step_size() const noexcept { return horizon_ / static_cast<double>(steps_); }

  double beta(double t) const noexcept { return beta_min_ + (beta_max_ - beta_min_) * (t / horizon_); }

  /// Integral of beta over [0, t].
  double integrated_beta(double t) const noexcept {
    return beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t / horizon_;
  }

  /// exp(-2 * integral of beta over [0, t]).
  double alpha(double t) const noexcept { return std::exp(-2.0 * integrated_beta(t)); }

 private:
  double horizon_ = 1.0;
  std::size_t steps_ = 1000;
  double beta_min_ = 0.001;
  double beta_max_ = 6.0;
};

}  // namespace cdiff
