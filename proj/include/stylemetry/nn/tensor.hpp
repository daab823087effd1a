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

#ifndef STYLEMETRY_NN_TENSOR_HPP
#define STYLEMETRY_NN_TENSOR_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stylemetry/error.hpp"

namespace stylemetry::nn {

/// Row-major batch matrix: one sample per row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline std::string shape_string(const std::vector<std::size_t> &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array of doubles with an explicit shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    }
    data.assign(count(shape), fill);
  }

  static std::size_t count(const std::vector<std::size_t> &s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : size() / shape[0]; }

  // A 1-d tensor maps to a single row.
  Eigen::Map<Mat> mat() {
    return shape.size() == 1 ? Eigen::Map<Mat>(data.data(), 1, static_cast<Eigen::Index>(shape[0]))
                             : Eigen::Map<Mat>(data.data(), static_cast<Eigen::Index>(rows()),
                                               static_cast<Eigen::Index>(cols()));
  }
  Eigen::Map<const Mat> mat() const {
    return shape.size() == 1
               ? Eigen::Map<const Mat>(data.data(), 1, static_cast<Eigen::Index>(shape[0]))
               : Eigen::Map<const Mat>(data.data(), static_cast<Eigen::Index>(rows()),
                                       static_cast<Eigen::Index>(cols()));
  }
  Eigen::Map<RowVec> row() { return {data.data(), static_cast<Eigen::Index>(size())}; }
  Eigen::Map<const RowVec> row() const { return {data.data(), static_cast<Eigen::Index>(size())}; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// A learnable tensor with its gradient and ADADELTA accumulators.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor acc_grad_sq;
  Tensor acc_update_sq;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(shape), acc_grad_sq(shape), acc_update_sq(shape) {}

  const std::vector<std::size_t> &shape() const { return value.shape; }
  void zero_grad() { grad.fill(0.0); }
};

/// Glorot-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename Rng>
void glorot_uniform(Param &p, Rng &rng) {
  const double fan_out = static_cast<double>(p.value.rows());
  const double fan_in = static_cast<double>(p.value.cols());
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto &v : p.value.data) v = dist(rng);
}

}  // namespace stylemetry::nn

#endif  // STYLEMETRY_NN_TENSOR_HPP
