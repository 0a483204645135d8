// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace cdiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Sample sets are stored column-wise: one point per column.
using Samples = Eigen::MatrixXd;

inline constexpr double two_pi = 6.283185307179586476925286766559;

}  // namespace cdiff
