// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "cdiff/error.hpp"
#include "cdiff/sampling.hpp"
#include "cdiff/types.hpp"

namespace cdiff {

// ---------------------------------------------------------------------------
// Maximum mean discrepancy
// ---------------------------------------------------------------------------

/// RBF kernel exp(-||x - y||^2 / (2 sigma^2)); an empty bandwidth means the
/// median heuristic on the pooled samples.
struct KernelSpec {
  std::optional<double> bandwidth;

  static KernelSpec median_heuristic() { return {}; }
  static KernelSpec fixed(double sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorKind::config_error, "kernel bandwidth must be positive");
    return {sigma};
  }
};

inline constexpr std::size_t median_subsample_limit = 2000;

/// Median pairwise distance over a stride subsample of at most 2000 points,
/// floored at 1e-6.
inline double median_heuristic_bandwidth(const Samples& z) {
  const auto n = static_cast<std::size_t>(z.cols());
  if (n < 2) throw Error(ErrorKind::insufficient_samples, "median heuristic needs at least 2 points");
  const std::size_t stride = (n + median_subsample_limit - 1) / median_subsample_limit;
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(static_cast<Eigen::Index>(i));
  std::vector<double> dist;
  dist.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) dist.push_back((z.col(idx[i]) - z.col(idx[j])).norm());
  }
  if (dist.empty()) return 1e-6;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return std::max(median, 1e-6);
}

inline double resolve_bandwidth(const KernelSpec& kernel, const Samples& x, const Samples& y) {
  if (kernel.bandwidth) return *kernel.bandwidth;
  Samples pooled(x.rows(), x.cols() + y.cols());
  pooled << x, y;
  return median_heuristic_bandwidth(pooled);
}

namespace detail {

/// Sum of k(a_i, b_j) over all pairs (or i != j when `skip_diagonal`), with
/// per-row partial sums reduced in row order.
inline double kernel_sum(const Samples& a, const Samples& b, double sigma, bool skip_diagonal, std::size_t workers) {
  const double scale = -0.5 / (sigma * sigma);
  const auto n = static_cast<std::size_t>(a.cols());
  std::vector<double> rows(n, 0.0);
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        if (skip_diagonal && j == ii) continue;
        acc += std::exp(scale * (a.col(ii) - b.col(j)).squaredNorm());
      }
      rows[i] = acc;
    }
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

}  // namespace detail

/// Unbiased U-statistic estimate of MMD^2 between two sample sets.
inline double mmd2(const Samples& x, const Samples& y, double sigma, std::size_t workers = 1) {
  if (x.rows() != y.rows()) throw Error(ErrorKind::dimension_mismatch, "sample sets differ in dimension");
  const auto m = static_cast<double>(x.cols());
  const auto n = static_cast<double>(y.cols());
  if (x.cols() < 2 || y.cols() < 2) throw Error(ErrorKind::insufficient_samples, "MMD needs at least 2 samples each");
  const double kxx = detail::kernel_sum(x, x, sigma, true, workers) / (m * (m - 1.0));
  const double kyy = detail::kernel_sum(y, y, sigma, true, workers) / (n * (n - 1.0));
  const double kxy = detail::kernel_sum(x, y, sigma, false, workers) / (m * n);
  return kxx + kyy - 2.0 * kxy;
}

inline double mmd2(const Samples& x, const Samples& y, const KernelSpec& kernel = {}, std::size_t workers = 1) {
  if (x.rows() != y.rows()) throw Error(ErrorKind::dimension_mismatch, "sample sets differ in dimension");
  if (x.cols() < 2 || y.cols() < 2) throw Error(ErrorKind::insufficient_samples, "MMD needs at least 2 samples each");
  return mmd2(x, y, resolve_bandwidth(kernel, x, y), workers);
}

// ---------------------------------------------------------------------------
// Reflected heat kernel on [0, 1]
// ---------------------------------------------------------------------------

inline constexpr int default_heat_terms = 200;

/// Transition density of reflected Brownian motion (generator Laplacian / 2)
/// on [0, 1]: 1 + 2 sum_k exp(-k^2 pi^2 t / 2) cos(k pi x) cos(k pi x0).
inline double reflected_heat_kernel_1d(double x, double x0, double t, int terms = default_heat_terms) {
  double sum = 1.0;
  for (int k = 1; k <= terms; ++k) {
    const double kp = k * std::numbers::pi;
    sum += 2.0 * std::exp(-0.5 * kp * kp * t) * std::cos(kp * x) * std::cos(kp * x0);
  }
  return sum;
}

inline double reflected_heat_kernel_dx_1d(double x, double x0, double t, int terms = default_heat_terms) {
  double sum = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double kp = k * std::numbers::pi;
    sum -= 2.0 * kp * std::exp(-0.5 * kp * kp * t) * std::sin(kp * x) * std::cos(kp * x0);
  }
  return sum;
}

/// d/dx log p_t(x | x0).
inline double score_1d(double x, double x0, double t, int terms = default_heat_terms) {
  return reflected_heat_kernel_dx_1d(x, x0, t, terms) / reflected_heat_kernel_1d(x, x0, t, terms);
}

/// CDF of the reflected heat kernel in x over [0, 1].
inline double reflected_heat_cdf_1d(double x, double x0, double t, int terms = default_heat_terms) {
  double sum = x;
  for (int k = 1; k <= terms; ++k) {
    const double kp = k * std::numbers::pi;
    sum += 2.0 * std::exp(-0.5 * kp * kp * t) * std::cos(kp * x0) * std::sin(kp * x) / kp;
  }
  return sum;
}

/// Kolmogorov-Smirnov distance between an empirical sample and a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw Error(ErrorKind::insufficient_samples, "KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct Histogram {
  std::size_t bins = 0;
  std::vector<double> lower;   // per coordinate
  std::vector<double> upper;
  std::vector<std::vector<std::size_t>> marginals;
  std::vector<std::size_t> joint;  // bins x bins, row-major in (x0, x1), only for d = 2

  double edge(std::size_t coord, std::size_t i) const {
    return lower[coord] + (upper[coord] - lower[coord]) * static_cast<double>(i) / static_cast<double>(bins);
  }
};

namespace detail {
inline std::size_t bin_index(double v, double lo, double hi, std::size_t bins) {
  const double u = (v - lo) / (hi - lo) * static_cast<double>(bins);
  if (!(u > 0.0)) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(u));
}
}  // namespace detail

/// Per-coordinate marginal counts on fixed edges (values outside the range
/// land in the end bins), plus the joint grid when d = 2.
inline Histogram histogram(const Samples& x, std::size_t bins, const std::vector<double>& lower,
                           const std::vector<double>& upper) {
  if (bins < 1) throw Error(ErrorKind::config_error, "histogram needs at least one bin");
  const auto d = static_cast<std::size_t>(x.rows());
  if (lower.size() != d || upper.size() != d) throw Error(ErrorKind::dimension_mismatch, "range per coordinate required");
  for (std::size_t c = 0; c < d; ++c) {
    if (!(upper[c] > lower[c])) throw Error(ErrorKind::config_error, "histogram range must be increasing");
  }
  Histogram h;
  h.bins = bins;
  h.lower = lower;
  h.upper = upper;
  h.marginals.assign(d, std::vector<std::size_t>(bins, 0));
  if (d == 2) h.joint.assign(bins * bins, 0);
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    std::size_t first = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const std::size_t bin = detail::bin_index(x(static_cast<Eigen::Index>(c), s), lower[c], upper[c], bins);
      ++h.marginals[c][bin];
      if (c == 0) first = bin;
      if (d == 2 && c == 1) ++h.joint[first * bins + bin];
    }
  }
  return h;
}

/// Marginal counts as CSV: coord,bin,lower_edge,upper_edge,count.
inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os.precision(17);
  os << "coord,bin,lower_edge,upper_edge,count\n";
  for (std::size_t c = 0; c < h.marginals.size(); ++c) {
    for (std::size_t i = 0; i < h.bins; ++i) {
      os << c << ',' << i << ',' << h.edge(c, i) << ',' << h.edge(c, i + 1) << ',' << h.marginals[c][i] << '\n';
    }
  }
}

/// Joint 2-D grid as CSV with both bin-edge pairs per row.
inline void write_joint_histogram_csv(std::ostream& os, const Histogram& h) {
  if (h.joint.empty()) throw Error(ErrorKind::dimension_mismatch, "joint histogram exists only for 2-D samples");
  os.precision(17);
  os << "bin0,bin1,lower_edge0,upper_edge0,lower_edge1,upper_edge1,count\n";
  for (std::size_t i = 0; i < h.bins; ++i) {
    for (std::size_t j = 0; j < h.bins; ++j) {
      os << i << ',' << j << ',' << h.edge(0, i) << ',' << h.edge(0, i + 1) << ',' << h.edge(1, j) << ','
         << h.edge(1, j + 1) << ',' << h.joint[i * h.bins + j] << '\n';
    }
  }
}

}  // namespace cdiff
