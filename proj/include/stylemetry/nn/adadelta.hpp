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

#ifndef STYLEMETRY_NN_ADADELTA_HPP
#define STYLEMETRY_NN_ADADELTA_HPP

#include <cmath>

#include "stylemetry/nn/tensor.hpp"

namespace stylemetry::nn {

struct AdadeltaConfig {
  double lr = 1.0;
  double rho = 0.95;
  double eps = 1e-8;
};

/// One ADADELTA update from the gradient currently stored in `p`; zeroes the
/// gradient afterwards.
inline void adadelta_step(Param &p, double rho, double eps, double lr) {
  auto &g = p.grad.data;
  auto &eg2 = p.acc_grad_sq.data;
  auto &edx2 = p.acc_update_sq.data;
  auto &w = p.value.data;
  for (std::size_t i = 0; i < w.size(); ++i) {
    eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
    const double dx = -std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps) * g[i];
    edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
    w[i] += lr * dx;
    g[i] = 0.0;
  }
}

inline void adadelta_step(Param &p, const AdadeltaConfig &cfg) {
  adadelta_step(p, cfg.rho, cfg.eps, cfg.lr);
}

}  // namespace stylemetry::nn

#endif  // STYLEMETRY_NN_ADADELTA_HPP
