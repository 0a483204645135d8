// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "cdiff/types.hpp"

namespace cdiff {

/// (time, state) pairs harvested from forward trajectories; column i of
/// `states` pairs with times(i) and came from data point origin_index[i].
struct TrajectorySlices {
  Vec times;
  Mat states;
  std::vector<std::size_t> origin_index;

  std::size_t size() const noexcept { return static_cast<std::size_t>(times.size()); }
};

}  // namespace cdiff
