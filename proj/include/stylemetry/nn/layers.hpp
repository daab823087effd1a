// Copyright 2026 The Stylemetry Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STYLEMETRY_NN_LAYERS_HPP
#define STYLEMETRY_NN_LAYERS_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "stylemetry/error.hpp"
#include "stylemetry/nn/tensor.hpp"

namespace stylemetry::nn {

enum class Activation { identity, relu, tanh };

inline std::string dims(const Mat &m) {
  return "[" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "]";
}

// ---------------------------------------------------------------------------
// Dense

struct DenseLayerParams {
  Param W;  // out x in
  Param b;  // out

  DenseLayerParams() = default;
  DenseLayerParams(const std::string &name, std::size_t in, std::size_t out)
      : W(name + ".W", {out, in}), b(name + ".b", {out}) {}

  std::size_t in() const { return W.value.cols(); }
  std::size_t out() const { return W.value.rows(); }
};

inline Mat activate(const Mat &a, Activation act) {
  switch (act) {
    case Activation::relu:
      return a.cwiseMax(0.0);
    case Activation::tanh:
      return a.array().tanh().matrix();
    case Activation::identity:
    default:
      return a;
  }
}

/// y = act(x W^T + b), one sample per row of x.
inline Mat dense_forward(const Mat &x, const DenseLayerParams &p, Activation act) {
  if (static_cast<std::size_t>(x.cols()) != p.in())
    throw ShapeError("dense " + p.W.name + ": input " + dims(x) + " vs weight " +
                     shape_string(p.W.shape()));
  Mat a = x * p.W.value.mat().transpose();
  a.rowwise() += p.b.value.row();
  return activate(a, act);
}

/// Accumulates dW, db from upstream dy and returns dx. `y` is the forward
/// output, which is all the activation derivatives need.
inline Mat dense_backward(const Mat &x, const Mat &y, const Mat &dy, DenseLayerParams &p,
                          Activation act) {
  if (dy.rows() != x.rows() || static_cast<std::size_t>(dy.cols()) != p.out())
    throw ShapeError("dense " + p.W.name + ": upstream " + dims(dy) + " vs output " + dims(y));
  Mat da;
  switch (act) {
    case Activation::relu:
      da = (y.array() > 0.0).select(dy, 0.0);
      break;
    case Activation::tanh:
      da = (dy.array() * (1.0 - y.array().square())).matrix();
      break;
    case Activation::identity:
    default:
      da = dy;
  }
  p.W.grad.mat().noalias() += da.transpose() * x;
  p.b.grad.row() += da.colwise().sum();
  return da * p.W.value.mat();
}

// ---------------------------------------------------------------------------
// GRU:  z = s(W_z x + U_z h + b_z),  r = s(W_r x + U_r h + b_r),
//       c = tanh(W_h x + U_h (r*h) + b_h),  h' = (1 - z)*h + z*c

struct GruLayerParams {
  Param W_z, W_r, W_h;  // hidden x input
  Param U_z, U_r, U_h;  // hidden x hidden
  Param b_z, b_r, b_h;  // hidden

  GruLayerParams() = default;
  GruLayerParams(const std::string &name, std::size_t input, std::size_t hidden)
      : W_z(name + ".W_z", {hidden, input}),
        W_r(name + ".W_r", {hidden, input}),
        W_h(name + ".W_h", {hidden, input}),
        U_z(name + ".U_z", {hidden, hidden}),
        U_r(name + ".U_r", {hidden, hidden}),
        U_h(name + ".U_h", {hidden, hidden}),
        b_z(name + ".b_z", {hidden}),
        b_r(name + ".b_r", {hidden}),
        b_h(name + ".b_h", {hidden}) {}

  std::size_t input() const { return W_z.value.cols(); }
  std::size_t hidden() const { return W_z.value.rows(); }

  std::vector<Param *> params() { return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &b_z, &b_r, &b_h}; }
  std::vector<const Param *> params() const {
    return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &b_z, &b_r, &b_h};
  }
};

/// Per-step activations kept for the backward pass.
struct GruStepCache {
  Mat x, h_prev, z, r, c, rh;
};

inline Mat sigmoid(const Mat &a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

inline Mat gru_cell(const Mat &x, const Mat &h_prev, const GruLayerParams &p,
                    GruStepCache *cache = nullptr) {
  if (static_cast<std::size_t>(x.cols()) != p.input())
    throw ShapeError("gru " + p.W_z.name + ": input " + dims(x) + " vs weight " +
                     shape_string(p.W_z.shape()));
  if (static_cast<std::size_t>(h_prev.cols()) != p.hidden() || h_prev.rows() != x.rows())
    throw ShapeError("gru " + p.U_z.name + ": state " + dims(h_prev) + " vs input " + dims(x));
  Mat az = x * p.W_z.value.mat().transpose() + h_prev * p.U_z.value.mat().transpose();
  az.rowwise() += p.b_z.value.row();
  Mat ar = x * p.W_r.value.mat().transpose() + h_prev * p.U_r.value.mat().transpose();
  ar.rowwise() += p.b_r.value.row();
  Mat z = sigmoid(az);
  Mat r = sigmoid(ar);
  Mat rh = r.cwiseProduct(h_prev);
  Mat ac = x * p.W_h.value.mat().transpose() + rh * p.U_h.value.mat().transpose();
  ac.rowwise() += p.b_h.value.row();
  Mat c = ac.array().tanh().matrix();
  Mat h = h_prev + z.cwiseProduct(c - h_prev);
  if (cache) *cache = GruStepCache{x, h_prev, std::move(z), std::move(r), std::move(c), std::move(rh)};
  return h;
}

/// Backward through one step. Accumulates parameter grads, writes the input
/// grad to `dx` and returns the grad with respect to h_prev.
inline Mat gru_cell_backward(const GruStepCache &k, const Mat &dh, GruLayerParams &p, Mat &dx) {
  Mat dz = dh.cwiseProduct(k.c - k.h_prev);
  Mat dc = dh.cwiseProduct(k.z);
  Mat dh_prev = dh - dc;  // dh * (1 - z)

  Mat dac = (dc.array() * (1.0 - k.c.array().square())).matrix();
  Mat daz = (dz.array() * k.z.array() * (1.0 - k.z.array())).matrix();

  p.W_h.grad.mat().noalias() += dac.transpose() * k.x;
  p.U_h.grad.mat().noalias() += dac.transpose() * k.rh;
  p.b_h.grad.row() += dac.colwise().sum();

  Mat drh = dac * p.U_h.value.mat();
  Mat dr = drh.cwiseProduct(k.h_prev);
  dh_prev += drh.cwiseProduct(k.r);
  Mat dar = (dr.array() * k.r.array() * (1.0 - k.r.array())).matrix();

  p.W_z.grad.mat().noalias() += daz.transpose() * k.x;
  p.U_z.grad.mat().noalias() += daz.transpose() * k.h_prev;
  p.b_z.grad.row() += daz.colwise().sum();
  p.W_r.grad.mat().noalias() += dar.transpose() * k.x;
  p.U_r.grad.mat().noalias() += dar.transpose() * k.h_prev;
  p.b_r.grad.row() += dar.colwise().sum();

  dh_prev.noalias() += daz * p.U_z.value.mat();
  dh_prev.noalias() += dar * p.U_r.value.mat();
  dx = daz * p.W_z.value.mat();
  dx.noalias() += dar * p.W_r.value.mat();
  dx.noalias() += dac * p.W_h.value.mat();
  return dh_prev;
}

/// A sequence is one batch matrix (samples x features) per time step.
using Sequence = std::vector<Mat>;

struct GruSequenceCache {
  std::vector<GruStepCache> steps;
};

/// Runs the cell from h_0 = 0 over every step and returns all hidden states.
inline Sequence gru_sequence(const Sequence &xs, const GruLayerParams &p,
                             GruSequenceCache *cache = nullptr) {
  if (xs.empty()) throw ShapeError("gru " + p.W_z.name + ": empty input sequence");
  Sequence hs;
  hs.reserve(xs.size());
  if (cache) cache->steps.assign(xs.size(), {});
  Mat h = Mat::Zero(xs.front().rows(), static_cast<Eigen::Index>(p.hidden()));
  for (std::size_t t = 0; t < xs.size(); ++t) {
    h = gru_cell(xs[t], h, p, cache ? &cache->steps[t] : nullptr);
    hs.push_back(h);
  }
  return hs;
}

/// Full backpropagation through time. `dhs[t]` is the upstream grad on the
/// step-t output (empty matrices count as zero). Returns per-step input grads.
inline Sequence gru_sequence_backward(const GruSequenceCache &cache, const Sequence &dhs,
                                      GruLayerParams &p) {
  const std::size_t steps = cache.steps.size();
  if (dhs.size() != steps) throw ShapeError("gru " + p.W_z.name + ": grad sequence length mismatch");
  Sequence dxs(steps);
  Mat carry = Mat::Zero(cache.steps.back().h_prev.rows(), static_cast<Eigen::Index>(p.hidden()));
  for (std::size_t t = steps; t-- > 0;) {
    Mat dh = carry;
    if (dhs[t].size() != 0) dh += dhs[t];
    carry = gru_cell_backward(cache.steps[t], dh, p, dxs[t]);
  }
  return dxs;
}

/// Backward for a layer that only exposed its final hidden state.
inline Sequence gru_final_backward(const GruSequenceCache &cache, const Mat &dh_last,
                                   GruLayerParams &p) {
  Sequence dhs(cache.steps.size());
  dhs.back() = dh_last;
  return gru_sequence_backward(cache, dhs, p);
}

// ---------------------------------------------------------------------------
// Inverted dropout

enum class Mode { train, infer };

struct DropoutResult {
  Mat y;
  Mat mask;  // 0/1 keep indicators
  double keep_scale = 1.0;
};

template <typename Rng>
DropoutResult dropout(const Mat &x, double p_drop, Mode mode, Rng &rng) {
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw ValidationError("dropout probability must be in [0, 1), got " + std::to_string(p_drop));
  DropoutResult out;
  if (mode == Mode::infer || p_drop == 0.0) {
    out.y = x;
    out.mask = Mat::Ones(x.rows(), x.cols());
    return out;
  }
  out.keep_scale = 1.0 / (1.0 - p_drop);
  out.mask.resize(x.rows(), x.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) out.mask(i, j) = u(rng) >= p_drop ? 1.0 : 0.0;
  out.y = (x.array() * out.mask.array() * out.keep_scale).matrix();
  return out;
}

inline Mat dropout_backward(const DropoutResult &d, const Mat &dy) {
  return (dy.array() * d.mask.array() * d.keep_scale).matrix();
}

}  // namespace stylemetry::nn

#endif  // STYLEMETRY_NN_LAYERS_HPP
