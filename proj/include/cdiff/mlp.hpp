// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cdiff/error.hpp"
#include "cdiff/random.hpp"
#include "cdiff/types.hpp"

#if defined(CDIFF_USE_LIBMVEC) && defined(__AVX2__)
#include <immintrin.h>
extern "C" __m256d _ZGVdN4v_sin(__m256d);
extern "C" __m256d _ZGVdN4v_cos(__m256d);
#define CDIFF_VECTOR_TRIG 1
#endif

namespace cdiff {

namespace detail {

/// Elementwise sin and cos; uses the glibc vector math routines when built
/// with CDIFF_USE_LIBMVEC on AVX2.
inline void sin_cos(const Mat& z, Mat& s, Mat* c) {
  s.resize(z.rows(), z.cols());
  if (c) c->resize(z.rows(), z.cols());
  const double* in = z.data();
  const Eigen::Index n = z.size();
  Eigen::Index i = 0;
#ifdef CDIFF_VECTOR_TRIG
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(in + i);
    _mm256_storeu_pd(s.data() + i, _ZGVdN4v_sin(v));
    if (c) _mm256_storeu_pd(c->data() + i, _ZGVdN4v_cos(v));
  }
#endif
  for (; i < n; ++i) {
    s.data()[i] = std::sin(in[i]);
    if (c) c->data()[i] = std::cos(in[i]);
  }
}

}  // namespace detail

struct MlpShape {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t hidden_layers = 3;
  std::size_t width = 128;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Dense network with sin activations on every hidden layer and a linear
/// output layer. Parameters live in one flat vector, layer by layer, each
/// layer as its column-major weight matrix followed by its bias.
class Mlp {
 public:
  using MatMap = Eigen::Map<Mat>;
  using ConstMatMap = Eigen::Map<const Mat>;
  using VecMap = Eigen::Map<Vec>;
  using ConstVecMap = Eigen::Map<const Vec>;

  Mlp() = default;

  explicit Mlp(const MlpShape& shape) : shape_(shape) {
    if (shape.input_dim < 1 || shape.output_dim < 1 || shape.width < 1) {
      throw Error(ErrorKind::config_error, "network dimensions must be positive");
    }
    std::size_t fan_in = shape.input_dim;
    std::size_t offset = 0;
    for (std::size_t l = 0; l <= shape.hidden_layers; ++l) {
      const std::size_t fan_out = l == shape.hidden_layers ? shape.output_dim : shape.width;
      layers_.push_back({fan_out, fan_in, offset});
      offset += fan_out * fan_in + fan_out;
      fan_in = fan_out;
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(offset));
  }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp glorot(const MlpShape& shape, Rng& rng) {
    Mlp net(shape);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      auto w = net.weight(l);
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
      }
    }
    return net;
  }

  const MlpShape& shape() const noexcept { return shape_; }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t num_params() const noexcept { return static_cast<std::size_t>(params_.size()); }

  Vec& params() noexcept { return params_; }
  const Vec& params() const noexcept { return params_; }

  MatMap weight(std::size_t l) { return {params_.data() + layers_[l].offset, rows(l), cols(l)}; }
  ConstMatMap weight(std::size_t l) const { return {params_.data() + layers_[l].offset, rows(l), cols(l)}; }
  VecMap bias(std::size_t l) { return {params_.data() + layers_[l].offset + layers_[l].rows * layers_[l].cols, rows(l)}; }
  ConstVecMap bias(std::size_t l) const {
    return {params_.data() + layers_[l].offset + layers_[l].rows * layers_[l].cols, rows(l)};
  }

  Eigen::Index rows(std::size_t l) const { return static_cast<Eigen::Index>(layers_[l].rows); }
  Eigen::Index cols(std::size_t l) const { return static_cast<Eigen::Index>(layers_[l].cols); }
  std::size_t offset(std::size_t l) const { return layers_[l].offset; }

  /// Batched forward pass; one input per column.
  Mat forward(const Mat& inputs) const {
    Mat h = inputs;
    Mat z;
    for (std::size_t l = 0; l + 1 < num_layers(); ++l) {
      z.noalias() = weight(l) * h;
      z.colwise() += bias(l);
      detail::sin_cos(z, h, nullptr);
    }
    const std::size_t last = num_layers() - 1;
    return (weight(last) * h).colwise() + bias(last);
  }

  Vec forward(const Vec& input) const { return forward(Mat(input)).col(0); }

  bool all_finite() const { return params_.allFinite(); }

 private:
  struct Layer {
    std::size_t rows;
    std::size_t cols;
    std::size_t offset;
  };

  MlpShape shape_;
  std::vector<Layer> layers_;
  Vec params_;
};

/// Forward pass that also pushes K tangent directions per input through the
/// network. Tangent columns are ordered tangent-major: column k * B + b holds
/// tangent k of sample b. Keeps every intermediate for the reverse sweep.
struct TangentPass {
  std::size_t batch = 0;
  std::size_t tangents = 0;
  std::vector<Mat> pre;       // z_l, width x B
  std::vector<Mat> pre_dot;   // dz_l, width x (K B)
  std::vector<Mat> cos;       // cos(z_l)
  std::vector<Mat> act;       // h_l (act[0] = inputs)
  std::vector<Mat> act_dot;   // dh_l (act_dot[0] = input tangents)
  Mat out;                    // output_dim x B
  Mat out_dot;                // output_dim x (K B)
};

inline TangentPass forward_with_tangents(const Mlp& net, const Mat& inputs, const Mat& input_tangents,
                                         std::size_t tangents) {
  TangentPass pass;
  pass.batch = static_cast<std::size_t>(inputs.cols());
  pass.tangents = tangents;
  const auto b = inputs.cols();
  pass.act.push_back(inputs);
  pass.act_dot.push_back(input_tangents);
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    Mat z = net.weight(l) * pass.act.back();
    z.colwise() += net.bias(l);
    Mat zdot = net.weight(l) * pass.act_dot.back();
    Mat sn, c;
    detail::sin_cos(z, sn, &c);
    Mat hdot(zdot.rows(), zdot.cols());
    for (std::size_t k = 0; k < tangents; ++k) {
      const auto first = static_cast<Eigen::Index>(k) * b;
      hdot.middleCols(first, b) = c.cwiseProduct(zdot.middleCols(first, b));
    }
    pass.act.push_back(std::move(sn));
    pass.act_dot.push_back(std::move(hdot));
    pass.cos.push_back(std::move(c));
    pass.pre.push_back(std::move(z));
    pass.pre_dot.push_back(std::move(zdot));
  }
  const std::size_t last = net.num_layers() - 1;
  pass.out = (net.weight(last) * pass.act.back()).colwise() + net.bias(last);
  pass.out_dot = net.weight(last) * pass.act_dot.back();
  return pass;
}

/// Reverse sweep through a TangentPass given adjoints of the outputs and of
/// the output tangents. Returns the flat parameter gradient.
inline Vec backward_with_tangents(const Mlp& net, const TangentPass& pass, const Mat& out_adj,
                                  const Mat& out_dot_adj) {
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(net.num_params()));
  const auto b = static_cast<Eigen::Index>(pass.batch);
  const std::size_t last = net.num_layers() - 1;

  auto write_layer = [&](std::size_t l, const Mat& z_adj, const Mat& zdot_adj) {
    Eigen::Map<Mat> gw(grad.data() + net.offset(l), net.rows(l), net.cols(l));
    gw.noalias() = z_adj * pass.act[l].transpose();
    gw.noalias() += zdot_adj * pass.act_dot[l].transpose();
    Eigen::Map<Vec> gb(grad.data() + net.offset(l) + net.rows(l) * net.cols(l), net.rows(l));
    gb = z_adj.rowwise().sum();
  };

  write_layer(last, out_adj, out_dot_adj);
  Mat h_adj = net.weight(last).transpose() * out_adj;
  Mat hdot_adj = net.weight(last).transpose() * out_dot_adj;

  for (std::size_t l = last; l-- > 0;) {
    const Mat& zdot = pass.pre_dot[l];
    const Mat& c = pass.cos[l];
    const Mat& s = pass.act[l + 1];
    Mat z_adj = c.cwiseProduct(h_adj);
    Mat zdot_adj(zdot.rows(), zdot.cols());
    for (std::size_t k = 0; k < pass.tangents; ++k) {
      const auto first = static_cast<Eigen::Index>(k) * b;
      zdot_adj.middleCols(first, b) = c.cwiseProduct(hdot_adj.middleCols(first, b));
      z_adj.array() -= s.array() * zdot.middleCols(first, b).array() * hdot_adj.middleCols(first, b).array();
    }
    write_layer(l, z_adj, zdot_adj);
    if (l > 0) {
      h_adj = net.weight(l).transpose() * z_adj;
      hdot_adj = net.weight(l).transpose() * zdot_adj;
    }
  }
  return grad;
}

}  // namespace cdiff
