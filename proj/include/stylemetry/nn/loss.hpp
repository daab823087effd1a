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

#ifndef STYLEMETRY_NN_LOSS_HPP
#define STYLEMETRY_NN_LOSS_HPP

#include <cmath>
#include <span>
#include <string>

#include "stylemetry/error.hpp"
#include "stylemetry/nn/layers.hpp"
#include "stylemetry/nn/tensor.hpp"

namespace stylemetry::nn {

/// Row-wise softmax with max subtraction.
inline Mat softmax(const Mat &logits) {
  Mat p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  Eigen::VectorXd sums = p.rowwise().sum();
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= sums(i);
  return p;
}

struct XentResult {
  double loss = 0.0;  // mean over the batch
  Mat grad;           // d loss / d logits
};

inline XentResult softmax_xent(const Mat &logits, std::span<const int> labels) {
  const auto n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  XentResult out;
  out.grad = softmax(logits);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw ValidationError("label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(logits.cols()) + ")");
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.loss += lse - logits(i, y);
    out.grad(i, y) -= 1.0;
  }
  out.loss /= static_cast<double>(n);
  out.grad /= static_cast<double>(n);
  return out;
}

struct ReconstructionResult {
  double loss = 0.0;  // mean over the batch of |recon - target|^2 + lambda |code|_1
  Mat grad_recon;
  Mat grad_target;
  Mat grad_code;
};

/// Squared reconstruction error plus an l1 penalty on the code, averaged per
/// sample. The l1 subgradient at 0 is 0.
inline ReconstructionResult mse_l1(const Mat &recon, const Mat &target, const Mat &code,
                                   double lambda) {
  if (lambda < 0.0) throw ValidationError("l1 weight must be nonnegative");
  if (recon.rows() != target.rows() || recon.cols() != target.cols())
    throw ShapeError("mse_l1: reconstruction " + dims(recon) + " vs target " + dims(target));
  if (code.rows() != recon.rows())
    throw ShapeError("mse_l1: code " + dims(code) + " vs reconstruction " + dims(recon));
  const double n = static_cast<double>(recon.rows());
  Mat diff = recon - target;
  ReconstructionResult out;
  out.loss = (diff.squaredNorm() + lambda * code.cwiseAbs().sum()) / n;
  out.grad_recon = diff * (2.0 / n);
  out.grad_target = -out.grad_recon;
  out.grad_code = code.unaryExpr([&](double v) {
    return v > 0.0 ? lambda / n : (v < 0.0 ? -lambda / n : 0.0);
  });
  return out;
}

}  // namespace stylemetry::nn

#endif  // STYLEMETRY_NN_LOSS_HPP
