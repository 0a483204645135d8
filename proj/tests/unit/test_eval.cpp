// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "cdiff/eval.hpp"
#include "oracles.hpp"

using namespace cdiff;

namespace {

template <typename F>
void expect_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

Samples line(std::initializer_list<double> xs) {
  Samples out(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(0, i++) = x;
  return out;
}

Samples gaussian(Eigen::Index d, Eigen::Index n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  Samples out(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) out(i, j) = n01(gen) + shift;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// MMD
// ---------------------------------------------------------------------------

TEST(Mmd, TwoPointHandEvaluation) {
  const Samples x = line({0.0, 1.0});
  EXPECT_NEAR(mmd2(x, x, 1.0), std::exp(-0.5) - 1.0, 1e-15);
  EXPECT_NEAR(mmd2(x, x, KernelSpec::fixed(1.0)), -0.3935, 1e-4);
}

TEST(Mmd, SeparatedPointMasses) {
  const Samples x = Samples::Zero(1, 100);
  const Samples y = Samples::Constant(1, 100, 10.0);
  EXPECT_NEAR(mmd2(x, y, 1.0), 2.0, 1e-12);
}

TEST(Mmd, MatchesReferenceImplementation) {
  const Samples x = gaussian(3, 150, 1);
  const Samples y = gaussian(3, 90, 2, 0.3);
  for (double sigma : {0.3, 1.0, 4.0}) {
    EXPECT_NEAR(mmd2(x, y, sigma), oracle::mmd2_reference(x, y, sigma), 1e-12) << sigma;
  }
  const double sigma = median_heuristic_bandwidth((Samples(3, 240) << x, y).finished());
  EXPECT_NEAR(mmd2(x, y), oracle::mmd2_reference(x, y, sigma), 1e-12);
}

TEST(Mmd, NullDistributionNearZero) {
  const Eigen::Index m = 200;
  const Samples x = gaussian(2, m, 3);
  const Samples y = gaussian(2, m, 4);
  const double stat = mmd2(x, y, 1.0);
  Samples pooled(2, 2 * m);
  pooled << x, y;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(2 * m));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 gen(5);
  double sum = 0.0, sq = 0.0;
  const int perms = 200;
  for (int p = 0; p < perms; ++p) {
    std::shuffle(idx.begin(), idx.end(), gen);
    Samples a(2, m), b(2, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      a.col(i) = pooled.col(idx[static_cast<std::size_t>(i)]);
      b.col(i) = pooled.col(idx[static_cast<std::size_t>(m + i)]);
    }
    const double s = mmd2(a, b, 1.0);
    sum += s;
    sq += s * s;
  }
  const double sd = std::sqrt(sq / perms - (sum / perms) * (sum / perms));
  EXPECT_LE(std::abs(stat), 3.0 * sd);
}

TEST(Mmd, PermutationAndTranslationInvariance) {
  Samples x = gaussian(2, 120, 6);
  const Samples y = gaussian(2, 100, 7, 0.5);
  const double base = mmd2(x, y, 0.8);
  Samples shuffled = x;
  std::mt19937_64 gen(8);
  for (Eigen::Index i = shuffled.cols() - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    shuffled.col(i).swap(shuffled.col(pick(gen)));
  }
  EXPECT_NEAR(mmd2(shuffled, y, 0.8), base, 1e-12);
  const Eigen::Vector2d shift(3.0, -7.0);
  const Samples xs = x.colwise() + shift;
  const Samples ys = y.colwise() + shift;
  EXPECT_NEAR(mmd2(xs, ys, 0.8), base, 1e-12);
}

TEST(Mmd, IndependentOfWorkerCount) {
  const Samples x = gaussian(2, 300, 9);
  const Samples y = gaussian(2, 300, 10);
  EXPECT_EQ(mmd2(x, y, 1.0, 1), mmd2(x, y, 1.0, 4));
}

TEST(Mmd, Errors) {
  expect_kind([] { mmd2(line({0.0}), line({0.0, 1.0}), 1.0); }, ErrorKind::insufficient_samples);
  expect_kind([] { mmd2(line({0.0, 1.0}), Samples::Zero(2, 2), 1.0); }, ErrorKind::dimension_mismatch);
  expect_kind([] { KernelSpec::fixed(0.0); }, ErrorKind::config_error);
}

TEST(MedianHeuristic, Examples) {
  EXPECT_EQ(median_heuristic_bandwidth(line({0.0, 1.0})), 1.0);
  EXPECT_EQ(median_heuristic_bandwidth(line({0.0, 1.0, 2.0})), 1.0);
  EXPECT_EQ(median_heuristic_bandwidth(Samples::Constant(2, 10, 3.0)), 1e-6);
  expect_kind([] { median_heuristic_bandwidth(line({0.0})); }, ErrorKind::insufficient_samples);
}

TEST(MedianHeuristic, StrideSubsample) {
  const Samples z = gaussian(2, 5000, 11);
  // stride 3 keeps points 0, 3, 6, ... (1667 of them)
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < z.cols(); i += 3) {
    for (Eigen::Index j = i + 3; j < z.cols(); j += 3) dist.push_back((z.col(i) - z.col(j)).norm());
  }
  std::sort(dist.begin(), dist.end());
  const std::size_t n = dist.size();
  const double want = n % 2 ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(z), want);
}

// ---------------------------------------------------------------------------
// Reflected heat kernel
// ---------------------------------------------------------------------------

TEST(HeatKernel, LongTimeIsUniform) {
  for (double x : {0.0, 0.3, 0.77, 1.0}) EXPECT_NEAR(reflected_heat_kernel_1d(x, 0.2, 50.0), 1.0, 1e-12);
}

TEST(HeatKernel, Symmetry) {
  for (double t : {0.01, 0.3}) {
    EXPECT_NEAR(reflected_heat_kernel_1d(0.2, 0.7, t), reflected_heat_kernel_1d(0.7, 0.2, t), 1e-13);
  }
}

TEST(HeatKernel, IntegratesToOne) {
  for (double t : {0.01, 0.1, 1.0}) {
    const int n = 10'000;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      integral += w * reflected_heat_kernel_1d(static_cast<double>(i) / n, 0.35, t);
    }
    EXPECT_NEAR(integral / n, 1.0, 1e-8) << t;
  }
}

TEST(HeatKernel, NeumannBoundary) {
  for (double t : {0.01, 0.5}) {
    EXPECT_NEAR(reflected_heat_kernel_dx_1d(0.0, 0.4, t), 0.0, 1e-9);
    EXPECT_NEAR(reflected_heat_kernel_dx_1d(1.0, 0.4, t), 0.0, 1e-9);
  }
}

TEST(HeatKernel, MatchesMethodOfImages) {
  for (double t : {0.01, 0.1, 0.3, 1.0}) {
    for (double x : {0.0, 0.05, 0.4, 0.9, 1.0}) {
      EXPECT_NEAR(reflected_heat_kernel_1d(x, 0.3, t), oracle::heat_kernel_images(x, 0.3, t), 1e-10);
      EXPECT_NEAR(reflected_heat_cdf_1d(x, 0.3, t), oracle::image_cdf(x, 0.3, t, 50), 1e-10);
    }
  }
}

TEST(HeatKernel, ScoreMatchesFiniteDifferences) {
  for (double t : {0.05, 0.3, 1.0}) {
    for (double x = 0.05; x <= 0.95 + 1e-12; x += 0.05) {
      const double h = 1e-6;
      const double fd =
          (std::log(reflected_heat_kernel_1d(x + h, 0.3, t)) - std::log(reflected_heat_kernel_1d(x - h, 0.3, t))) /
          (2.0 * h);
      EXPECT_LT(oracle::rel_err(score_1d(x, 0.3, t), fd, 1e-3), 1e-6) << t << ' ' << x;
    }
  }
}

TEST(KsStatistic, MatchesReference) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(500);
  for (auto& x : s) x = u(gen) * u(gen);
  auto cdf = [](double y) { return y; };
  EXPECT_DOUBLE_EQ(ks_statistic(s, cdf), oracle::ks(s, cdf));
  expect_kind([&] { ks_statistic(std::vector<double>{}, cdf); }, ErrorKind::insufficient_samples);
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

TEST(Histogram, SingleSampleSingleBin) {
  const Histogram h = histogram(line({0.4}), 1, {0.0}, {1.0});
  EXPECT_EQ(h.marginals[0], std::vector<std::size_t>{1});
}

TEST(Histogram, UniformBinsAndConservation) {
  const std::size_t n = 100'000;
  const Samples x = oracle::uniform_box(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0), n, 13);
  const Histogram h = histogram(x, 10, {0.0, 0.0}, {1.0, 1.0});
  const double sd = std::sqrt(n * 0.1 * 0.9);
  for (std::size_t c = 0; c < 2; ++c) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < 10; ++b) {
      EXPECT_NEAR(static_cast<double>(h.marginals[c][b]), 1e4, 4.0 * sd);
      total += h.marginals[c][b];
    }
    EXPECT_EQ(total, n);
  }
  ASSERT_EQ(h.joint.size(), 100u);
  EXPECT_EQ(std::accumulate(h.joint.begin(), h.joint.end(), std::size_t{0}), n);
  for (std::size_t b = 0; b < 10; ++b) {
    std::size_t row_total = 0;
    for (std::size_t j = 0; j < 10; ++j) row_total += h.joint[b * 10 + j];
    EXPECT_EQ(row_total, h.marginals[0][b]);
  }
}

TEST(Histogram, OutOfRangeValuesLandInEndBins) {
  const Histogram h = histogram(line({-5.0, 0.0, 0.5, 1.0, 7.0}), 2, {0.0}, {1.0});
  EXPECT_EQ(h.marginals[0], (std::vector<std::size_t>{2, 3}));
}

TEST(Histogram, CsvLayout) {
  const Histogram h = histogram(line({0.1, 0.2, 0.8}), 2, {0.0}, {1.0});
  std::ostringstream os;
  write_histogram_csv(os, h);
  EXPECT_EQ(os.str(), "coord,bin,lower_edge,upper_edge,count\n0,0,0,0.5,2\n0,1,0.5,1,1\n");
  std::ostringstream joint;
  expect_kind([&] { write_joint_histogram_csv(joint, h); }, ErrorKind::dimension_mismatch);
  const Histogram h2 = histogram(Samples::Constant(2, 3, 0.75), 2, {0.0, 0.0}, {1.0, 1.0});
  write_joint_histogram_csv(joint, h2);
  EXPECT_NE(joint.str().find("1,1,0.5,1,0.5,1,3\n"), std::string::npos);
}

TEST(Histogram, Errors) {
  expect_kind([] { histogram(line({0.1}), 0, {0.0}, {1.0}); }, ErrorKind::config_error);
  expect_kind([] { histogram(line({0.1}), 2, {0.0, 0.0}, {1.0, 1.0}); }, ErrorKind::dimension_mismatch);
  expect_kind([] { histogram(line({0.1}), 2, {1.0}, {1.0}); }, ErrorKind::config_error);
}
