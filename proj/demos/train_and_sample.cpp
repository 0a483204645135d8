// SPDX-License-Identifier: Apache-2.0
// Fits a small score model on the 2-D hypercube mixture, then compares
// generated samples with held-out data and with the uniform reference.
#include <cstdio>
#include <cstdlib>

#include "cdiff/cdiff.hpp"

using namespace cdiff;

int main(int argc, char** argv) {
  const std::size_t iters = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const Method method = argc > 2 ? method_from_string(argv[2]) : Method::reflected;

  const DomainSpec cube(make_hypercube(2));
  const RandomStreams streams(5);
  const Samples data = make_synthetic_dataset(cube, hypercube_mixture(2), 4000, streams.child(0));
  const Samples held_out = make_synthetic_dataset(cube, hypercube_mixture(2), 2000, streams.child(1));

  const NoiseSchedule sched;
  Rng init = streams.stream(2);
  ScoreModel model = make_score_model(cube, sched.horizon(), 2, 64, default_delta, init);
  TrainConfig cfg = TrainConfig::desk();
  cfg.total_iters = iters;
  cfg.warmup_iters = std::min<std::size_t>(cfg.warmup_iters, iters / 10);
  cfg.batch_size = 128;
  train(model, data, method, sched, cfg, [&](const TrainRecord& r) {
    if ((r.iteration + 1) % std::max<std::size_t>(1, iters / 10) == 0) {
      std::printf("iter %5zu  loss %+.4f  lr %.2e\n", r.iteration + 1, r.loss, r.lr);
    }
  });

  const Samples generated = backward_sample(model, method, cube, sched, 2000, LowTempConfig{}, streams.child(3));
  const Samples uniform = uniform_reference(cube, 2000, streams.child(4));
  std::printf("%s: MMD2(generated, held-out) = %.5f, MMD2(uniform, held-out) = %.5f\n", to_string(method).c_str(),
              mmd2(generated, held_out), mmd2(uniform, held_out));
}
