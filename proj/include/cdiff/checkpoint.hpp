// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "cdiff/domain_io.hpp"
#include "cdiff/error.hpp"
#include "cdiff/sampling.hpp"
#include "cdiff/schedule.hpp"
#include "cdiff/score.hpp"
#include "cdiff/train.hpp"

namespace cdiff {

inline constexpr const char* checkpoint_format = "cdiff-ckpt";
inline constexpr int checkpoint_version = 1;

inline Json schedule_to_json(const NoiseSchedule& s) {
  return {{"T", s.horizon()}, {"N", s.steps()}, {"beta_min", s.beta_min()}, {"beta_max", s.beta_max()}};
}

inline NoiseSchedule schedule_from_json(const Json& j) {
  const NoiseSchedule defaults;
  try {
    return {j.value("T", defaults.horizon()), j.value("N", defaults.steps()), j.value("beta_min", defaults.beta_min()),
            j.value("beta_max", defaults.beta_max())};
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config_error, std::string("schedule: ") + e.what());
  }
}

inline Json train_config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"total_iters", c.total_iters},
          {"peak_lr", c.peak_lr},
          {"warmup_iters", c.warmup_iters},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed},
          {"slices_per_trajectory", c.slices_per_trajectory},
          {"divergence", c.divergence == DivergenceMode::exact ? "exact" : "hutchinson"},
          {"hutchinson_probes", c.hutchinson_probes}};
}

/// Missing keys keep their defaults.
inline TrainConfig train_config_from_json(const Json& j, TrainConfig c = {}) {
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.total_iters = j.value("total_iters", c.total_iters);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.warmup_iters = j.value("warmup_iters", c.warmup_iters);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.seed = j.value("seed", c.seed);
    c.slices_per_trajectory = j.value("slices_per_trajectory", c.slices_per_trajectory);
    c.hutchinson_probes = j.value("hutchinson_probes", c.hutchinson_probes);
    const std::string div = j.value("divergence", std::string("exact"));
    if (div == "exact") {
      c.divergence = DivergenceMode::exact;
    } else if (div == "hutchinson") {
      c.divergence = DivergenceMode::hutchinson;
    } else {
      throw Error(ErrorKind::config_error, "divergence must be exact or hutchinson");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config_error, std::string("train config: ") + e.what());
  }
  return c;
}

struct Checkpoint {
  ScoreModel model;
  Method method = Method::reflected;
  NoiseSchedule schedule;
  TrainConfig train;
  std::size_t iteration = 0;
};

inline Json checkpoint_header(const Checkpoint& c) {
  const auto& shape = c.model.net.shape();
  Json layers = Json::array();
  for (std::size_t l = 0; l < c.model.net.num_layers(); ++l) {
    layers.push_back({{"rows", c.model.net.rows(l)}, {"cols", c.model.net.cols(l)}});
  }
  return {{"format", checkpoint_format},
          {"version", checkpoint_version},
          {"architecture",
           {{"input_dim", shape.input_dim},
            {"output_dim", shape.output_dim},
            {"hidden_layers", shape.hidden_layers},
            {"width", shape.width},
            {"activation", "sin"}}},
          {"layers", layers},
          {"delta", c.model.delta},
          {"domain", domain_to_json(c.model.domain)},
          {"domain_hash", domain_hash(c.model.domain)},
          {"schedule", schedule_to_json(c.schedule)},
          {"method", to_string(c.method)},
          {"train", train_config_to_json(c.train)},
          {"iteration", c.iteration},
          {"num_params", c.model.net.num_params()}};
}

/// One line of JSON, then every parameter as a little-endian f64, layer by
/// layer (weights column-major, then biases).
inline void save_checkpoint(std::ostream& os, const Checkpoint& c) {
  os << checkpoint_header(c).dump() << '\n';
  const Vec& p = c.model.net.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(p(i));
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    os.write(bytes, 8);
  }
}

inline Checkpoint load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::io_error, "checkpoint is empty");
  Json header;
  try {
    header = Json::parse(line);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::io_error, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", std::string()) != checkpoint_format || header.value("version", 0) != checkpoint_version) {
    throw Error(ErrorKind::io_error, "not a version-1 cdiff checkpoint");
  }
  Checkpoint c;
  try {
    const Json& a = header.at("architecture");
    const MlpShape shape{a.at("input_dim").get<std::size_t>(), a.at("output_dim").get<std::size_t>(),
                         a.at("hidden_layers").get<std::size_t>(), a.at("width").get<std::size_t>()};
    c.model.net = Mlp(shape);
    c.model.delta = header.at("delta").get<double>();
    c.model.domain = domain_from_json(header.at("domain"));
    c.schedule = schedule_from_json(header.at("schedule"));
    c.model.horizon = c.schedule.horizon();
    c.method = method_from_string(header.at("method").get<std::string>());
    c.train = train_config_from_json(header.at("train"));
    c.iteration = header.at("iteration").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::io_error, std::string("checkpoint header: ") + e.what());
  }
  if (domain_hash(c.model.domain) != header.value("domain_hash", std::string())) {
    throw Error(ErrorKind::model_domain_mismatch, "checkpoint domain hash does not match its domain");
  }
  if (score_network_shape(c.model.domain, c.model.net.shape().hidden_layers, c.model.net.shape().width) !=
      c.model.net.shape()) {
    throw Error(ErrorKind::io_error, "checkpoint architecture does not fit its domain");
  }
  if (header.value("num_params", std::size_t{0}) != c.model.net.num_params()) {
    throw Error(ErrorKind::io_error, "checkpoint parameter count does not match its architecture");
  }
  Vec& p = c.model.net.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorKind::io_error, "checkpoint is truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    p(i) = std::bit_cast<double>(bits);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::io_error, "trailing bytes in checkpoint");
  if (!c.model.net.all_finite()) throw Error(ErrorKind::io_error, "checkpoint holds non-finite parameters");
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_error, "cannot write " + path);
  save_checkpoint(os, c);
  if (!os) throw Error(ErrorKind::io_error, "write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io_error, "cannot read " + path);
  return load_checkpoint(is);
}

}  // namespace cdiff
