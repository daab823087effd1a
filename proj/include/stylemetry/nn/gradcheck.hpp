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

#ifndef STYLEMETRY_NN_GRADCHECK_HPP
#define STYLEMETRY_NN_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include "stylemetry/nn/tensor.hpp"

namespace stylemetry::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  const Param *worst = nullptr;
  std::size_t worst_index = 0;
};

/// Compares analytic gradients against central differences.
///
/// `loss(true)` must accumulate gradients into every Param's `grad` (which is
/// zeroed before the call) and return the loss; `loss(false)` only evaluates.
/// With `probes_per_param == 0` every coordinate is checked, otherwise that
/// many coordinates per param are drawn from `seed`.
inline GradCheckResult gradient_check(const std::function<double(bool)> &loss,
                                      std::span<Param *const> params,
                                      std::size_t probes_per_param = 0, double h = 1e-5,
                                      std::uint64_t seed = 0) {
  for (auto *p : params) p->zero_grad();
  loss(true);
  std::mt19937_64 rng(seed);
  GradCheckResult res;
  for (auto *p : params) {
    std::vector<std::size_t> coords;
    if (probes_per_param == 0 || probes_per_param >= p->value.size()) {
      coords.resize(p->value.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, p->value.size() - 1);
      for (std::size_t k = 0; k < probes_per_param; ++k) coords.push_back(pick(rng));
    }
    for (std::size_t i : coords) {
      double &w = p->value.data[i];
      const double saved = w;
      w = saved + h;
      const double up = loss(false);
      w = saved - h;
      const double down = loss(false);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++res.probes;
      if (res.worst == nullptr || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst = p;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace stylemetry::nn

#endif  // STYLEMETRY_NN_GRADCHECK_HPP
