// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdiff {

enum class ErrorKind {
  infeasible_point,
  infeasible_domain,
  no_intersection,
  off_surface,
  unsupported_domain,
  degenerate_metric,
  step_failure,
  runaway_reflection,
  empty_input,
  insufficient_samples,
  divergence_failure,
  model_domain_mismatch,
  dimension_mismatch,
  config_error,
  io_error,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::infeasible_point: return "infeasible-point";
    case ErrorKind::infeasible_domain: return "infeasible-domain";
    case ErrorKind::no_intersection: return "no-intersection";
    case ErrorKind::off_surface: return "off-surface";
    case ErrorKind::unsupported_domain: return "unsupported-domain";
    case ErrorKind::degenerate_metric: return "degenerate-metric";
    case ErrorKind::step_failure: return "step-failure";
    case ErrorKind::runaway_reflection: return "runaway-reflection";
    case ErrorKind::empty_input: return "empty-input";
    case ErrorKind::insufficient_samples: return "insufficient-samples";
    case ErrorKind::divergence_failure: return "divergence-failure";
    case ErrorKind::model_domain_mismatch: return "model-domain-mismatch";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::config_error: return "config-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

/// Numerical failures map to CLI exit code 3, everything else to 2.
inline bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::degenerate_metric:
    case ErrorKind::step_failure:
    case ErrorKind::runaway_reflection:
    case ErrorKind::divergence_failure:
    case ErrorKind::no_intersection:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cdiff
