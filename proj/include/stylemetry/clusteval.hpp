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

#ifndef STYLEMETRY_CLUSTEVAL_HPP
#define STYLEMETRY_CLUSTEVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stylemetry/error.hpp"
#include "stylemetry/nn/tensor.hpp"

namespace stylemetry {

using SimilarityMatrix = nn::Mat;

/// s(i,j) = -|x_i - x_j|^2 off the diagonal, `preference` on it.
inline SimilarityMatrix similarity(std::span<const std::vector<double>> points, double preference) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n == 0) throw ValidationError("similarity needs at least one point");
  if (!std::isfinite(preference)) throw ValidationError("preference must be finite");
  const std::size_t dim = points.front().size();
  for (const auto &p : points) {
    if (p.size() != dim) throw ShapeError("points have different dimensions");
    for (double v : p)
      if (!std::isfinite(v)) throw ValidationError("similarity input contains a non-finite value");
  }
  SimilarityMatrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = preference;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      const auto &a = points[static_cast<std::size_t>(i)];
      const auto &b = points[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < dim; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
      s(i, j) = s(j, i) = -d2;
    }
  }
  return s;
}

/// Median of the off-diagonal similarities (the usual default preference).
inline double median_similarity(const SimilarityMatrix &s) {
  std::vector<double> off;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (i != j) off.push_back(s(i, j));
  if (off.empty()) return 0.0;
  std::sort(off.begin(), off.end());
  const std::size_t m = off.size() / 2;
  return off.size() % 2 ? off[m] : 0.5 * (off[m - 1] + off[m]);
}

struct ApParams {
  double damping = 0.5;
  std::size_t max_iter = 200;
  std::size_t convergence_iter = 15;
};

struct ClusterResult {
  std::vector<std::size_t> labels;     // exemplar index of each point
  std::vector<std::size_t> exemplars;  // ascending
  std::size_t n_clusters = 0;
  bool converged = false;
  std::size_t iterations = 0;
};

namespace detail {

inline ClusterResult assign_to_exemplars(const SimilarityMatrix &s, std::vector<std::size_t> exemplars) {
  ClusterResult res;
  const auto n = static_cast<std::size_t>(s.rows());
  res.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = exemplars.front();
    for (std::size_t e : exemplars) {
      if (e == i) {
        best = i;
        break;
      }
      if (s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e)) >
          s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)))
        best = e;
    }
    res.labels[i] = best;
  }
  res.n_clusters = exemplars.size();
  res.exemplars = std::move(exemplars);
  return res;
}

inline ClusterResult singletons(std::size_t n) {
  ClusterResult res;
  for (std::size_t i = 0; i < n; ++i) {
    res.labels.push_back(i);
    res.exemplars.push_back(i);
  }
  res.n_clusters = n;
  return res;
}

}  // namespace detail

/// Affinity propagation by responsibility/availability message passing.
///
/// Similarities get a fixed-seed perturbation (relative size ~1e-16, plus
/// 1e-12 of the largest magnitude) before the messages run, which breaks
/// exact ties between symmetric candidates.
/// Points are then labeled with their most similar exemplar (lowest index on
/// ties) on the unperturbed similarities.
inline ClusterResult affinity_propagation(const SimilarityMatrix &s_in, const ApParams &params = {}) {
  if (s_in.rows() != s_in.cols() || s_in.rows() == 0) throw ShapeError("similarity matrix must be square and nonempty");
  if (!(params.damping >= 0.5 && params.damping < 1.0)) throw ValidationError("damping must be in [0.5, 1)");
  if (params.convergence_iter < 1 || params.max_iter < params.convergence_iter)
    throw ValidationError("need max_iter >= convergence_iter >= 1");
  if (!s_in.allFinite()) throw ValidationError("similarity matrix has non-finite entries");
  const Eigen::Index n = s_in.rows();
  const auto un = static_cast<std::size_t>(n);

  if (n == 1) {
    ClusterResult r = detail::singletons(1);
    r.converged = true;
    return r;
  }
  // All similarities equal and all preferences equal: messages cannot pick
  // anyone, so decide directly.
  {
    bool flat = true;
    for (Eigen::Index i = 0; i < n && flat; ++i)
      for (Eigen::Index j = 0; j < n && flat; ++j) {
        if (i == j) flat = s_in(i, i) == s_in(0, 0);
        else flat = s_in(i, j) == s_in(0, 1);
      }
    if (flat) {
      ClusterResult r = s_in(0, 0) > s_in(0, 1) ? detail::singletons(un) : detail::assign_to_exemplars(s_in, {0});
      r.converged = true;
      return r;
    }
  }

  nn::Mat s = s_in;
  {
    std::mt19937_64 rng(0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double eps = std::numeric_limits<double>::epsilon();
    const double tiny = std::numeric_limits<double>::min();
    // Exact duplicates have s = 0, so part of the noise scales with the matrix.
    const double floor = 1e-12 * s.cwiseAbs().maxCoeff() + tiny * 100.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) s(i, j) += (eps * std::abs(s(i, j)) + floor) * gauss(rng);
  }

  const double keep = params.damping, take = 1.0 - params.damping;
  nn::Mat r = nn::Mat::Zero(n, n), a = nn::Mat::Zero(n, n);
  nn::Mat r_new(n, n), a_new(n, n);
  std::vector<bool> exemplar(un, false), prev(un, false);
  std::size_t stable = 0;
  ClusterResult res;

  for (std::size_t it = 1; it <= params.max_iter; ++it) {
    // Responsibilities.
    for (Eigen::Index i = 0; i < n; ++i) {
      double first = -std::numeric_limits<double>::infinity(), second = first;
      Eigen::Index arg = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double v = a(i, k) + s(i, k);
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (Eigen::Index k = 0; k < n; ++k) r_new(i, k) = s(i, k) - (k == arg ? second : first);
    }
    r = keep * r + take * r_new;

    // Availabilities.
    for (Eigen::Index k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != k) pos_sum += std::max(0.0, r(i, k));
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == k) a_new(k, k) = pos_sum;
        else a_new(i, k) = std::min(0.0, r(k, k) + pos_sum - std::max(0.0, r(i, k)));
      }
    }
    a = keep * a + take * a_new;

    bool any = false;
    for (std::size_t k = 0; k < un; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      exemplar[k] = r(kk, kk) + a(kk, kk) > 0.0;
      any = any || exemplar[k];
    }
    stable = (it > 1 && exemplar == prev) ? stable + 1 : 1;
    prev = exemplar;
    res.iterations = it;
    if (any && stable >= params.convergence_iter) {
      res.converged = true;
      break;
    }
  }

  std::vector<std::size_t> ex;
  for (std::size_t k = 0; k < un; ++k)
    if (exemplar[k]) ex.push_back(k);
  ClusterResult out = ex.empty() ? detail::singletons(un) : detail::assign_to_exemplars(s_in, ex);
  out.converged = res.converged;
  out.iterations = res.iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Adjusted mutual information

struct Contingency {
  std::vector<std::vector<std::size_t>> table;  // rows: first labeling
  std::vector<std::size_t> a;                   // row sums
  std::vector<std::size_t> b;                   // column sums
  std::size_t n = 0;
};

template <typename L1, typename L2>
Contingency contingency(std::span<const L1> u, std::span<const L2> v) {
  if (u.size() != v.size())
    throw ValidationError("labelings differ in length: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  std::map<L1, std::size_t> ru;
  std::map<L2, std::size_t> rv;
  for (const auto &x : u) ru.try_emplace(x, 0);
  for (const auto &x : v) rv.try_emplace(x, 0);
  std::size_t idx = 0;
  for (auto &[k, i] : ru) i = idx++;
  idx = 0;
  for (auto &[k, i] : rv) i = idx++;
  Contingency c;
  c.n = u.size();
  c.table.assign(ru.size(), std::vector<std::size_t>(rv.size(), 0));
  c.a.assign(ru.size(), 0);
  c.b.assign(rv.size(), 0);
  for (std::size_t t = 0; t < u.size(); ++t) {
    const std::size_t i = ru[u[t]], j = rv[v[t]];
    ++c.table[i][j];
    ++c.a[i];
    ++c.b[j];
  }
  return c;
}

inline double entropy(std::span<const std::size_t> counts, std::size_t n) {
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

inline double mutual_information(const Contingency &c) {
  const double n = static_cast<double>(c.n);
  double mi = 0.0;
  for (std::size_t i = 0; i < c.a.size(); ++i)
    for (std::size_t j = 0; j < c.b.size(); ++j) {
      const double nij = static_cast<double>(c.table[i][j]);
      if (nij == 0.0) continue;
      mi += nij / n * std::log(n * nij / (static_cast<double>(c.a[i]) * static_cast<double>(c.b[j])));
    }
  return mi;
}

/// E[MI] under the hypergeometric (fixed-marginals permutation) model.
inline double expected_mutual_information(const Contingency &c) {
  const std::size_t n = c.n;
  std::vector<double> lf(n + 1, 0.0);  // log k!
  for (std::size_t k = 2; k <= n; ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
  const double dn = static_cast<double>(n);
  double emi = 0.0;
  for (auto ai : c.a) {
    for (auto bj : c.b) {
      const std::size_t lo = std::max<std::size_t>(1, ai + bj > n ? ai + bj - n : 0);
      const std::size_t hi = std::min(ai, bj);
      const double base = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj] - lf[n];
      for (std::size_t nij = lo; nij <= hi; ++nij) {
        const double x = static_cast<double>(nij);
        const double term = x / dn * std::log(dn * x / (static_cast<double>(ai) * static_cast<double>(bj)));
        const double logp = base - lf[nij] - lf[ai - nij] - lf[bj - nij] - lf[n - ai - bj + nij];
        emi += term * std::exp(logp);
      }
    }
  }
  return emi;
}

// True when the contingency table is a permutation matrix pattern.
inline bool same_partition(const Contingency &c) {
  if (c.a.size() != c.b.size()) return false;
  for (const auto &row : c.table)
    if (std::count_if(row.begin(), row.end(), [](std::size_t x) { return x != 0; }) != 1) return false;
  for (std::size_t j = 0; j < c.b.size(); ++j) {
    std::size_t nz = 0;
    for (const auto &row : c.table) nz += row[j] != 0;
    if (nz != 1) return false;
  }
  return true;
}

/// AMI = (MI - E[MI]) / (max(H(U), H(V)) - E[MI]), natural logs. Identical
/// partitions score exactly 1; a vanishing denominator otherwise scores 0.
template <typename L1, typename L2>
double ami(std::span<const L1> labels_true, std::span<const L2> labels_pred) {
  Contingency c = contingency(labels_true, labels_pred);
  if (c.n == 0) throw ValidationError("ami needs at least one sample");
  if (same_partition(c)) return 1.0;
  const double mi = mutual_information(c);
  const double emi = expected_mutual_information(c);
  const double hu = entropy(c.a, c.n), hv = entropy(c.b, c.n);
  const double denom = std::max(hu, hv) - emi;
  if (std::abs(denom) <= 1e-15 * std::max(1.0, std::max(hu, hv))) return 0.0;
  return (mi - emi) / denom;
}

template <typename L1, typename L2>
double ami(const std::vector<L1> &u, const std::vector<L2> &v) {
  return ami(std::span<const L1>(u), std::span<const L2>(v));
}

inline std::size_t abs_error(std::size_t true_k, std::size_t est_k) {
  return true_k > est_k ? true_k - est_k : est_k - true_k;
}

}  // namespace stylemetry

#endif  // STYLEMETRY_CLUSTEVAL_HPP
