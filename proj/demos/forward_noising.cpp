// SPDX-License-Identifier: Apache-2.0
// Reflected Brownian motion on (0, 1) against the Neumann heat kernel.
#include <cstdio>
#include <vector>

#include "cdiff/eval.hpp"
#include "cdiff/reflected.hpp"

using namespace cdiff;

int main() {
  const DomainSpec interval(make_interval(0.0, 1.0));
  const RandomStreams streams(1);
  const double x0 = 0.2;
  const std::size_t paths = 20'000;
  for (double t : {0.01, 0.05, 0.3}) {
    const auto sched = NoiseSchedule::unit_rate(t, 500);
    Samples end(1, static_cast<Eigen::Index>(paths));
    std::vector<double> values(paths);
    for (std::size_t p = 0; p < paths; ++p) {
      Rng rng = streams.stream(p);
      values[p] = end(0, static_cast<Eigen::Index>(p)) =
          reflected_random_walk(Vec::Constant(1, x0), sched, interval, rng).back()(0);
    }
    const std::size_t bins = 10;
    const Histogram h = histogram(end, bins, {0.0}, {1.0});
    std::printf("t = %.2f  KS = %.4f\n  bin      empirical  heat kernel\n", t,
                ks_statistic(values, [&](double y) { return reflected_heat_cdf_1d(y, x0, t); }));
    for (std::size_t b = 0; b < bins; ++b) {
      const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
      const double want = reflected_heat_cdf_1d(hi, x0, t) - reflected_heat_cdf_1d(lo, x0, t);
      std::printf("  [%.1f,%.1f)  %.4f     %.4f\n", lo, hi,
                  static_cast<double>(h.marginals[0][b]) / static_cast<double>(paths), want);
    }
  }
}
