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

#ifndef STYLEMETRY_TRIP2VEC_HPP
#define STYLEMETRY_TRIP2VEC_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stylemetry/arnet.hpp"
#include "stylemetry/error.hpp"
#include "stylemetry/featurize.hpp"
#include "stylemetry/text.hpp"

namespace stylemetry {

struct TripVector {
  std::string driver_id;
  std::string trip_id;
  std::size_t q = 0;  // segment count
  std::vector<double> values;
};

/// Sum of the segment codes divided by its largest coordinate; the all-zero
/// sum maps to the zero vector. Codes are rows of `codes`.
///
/// The divisor is the largest magnitude, which is the largest coordinate for
/// the nonnegative codes of arnet/ronet models and keeps the scale invariance
/// for signed conet features.
inline std::vector<double> normalized_code_sum(const Mat &codes) {
  if (codes.rows() == 0) throw ValidationError("trip has no segments");
  nn::RowVec sigma = codes.colwise().sum();
  const double top = sigma.cwiseAbs().maxCoeff();
  std::vector<double> out(static_cast<std::size_t>(sigma.size()), 0.0);
  if (top > 0.0)
    for (Eigen::Index j = 0; j < sigma.size(); ++j) out[static_cast<std::size_t>(j)] = sigma(j) / top;
  return out;
}

inline void check_single_trip(std::span<const FeatureMatrix> segments) {
  if (segments.empty()) throw ValidationError("trip has no segments");
  for (const auto &s : segments) {
    if (s.meta.driver_id != segments.front().meta.driver_id || s.meta.trip_id != segments.front().meta.trip_id)
      throw ValidationError("segments belong to different trips: " + segments.front().meta.trip_id + " and " +
                            s.meta.trip_id);
  }
}

inline TripVector encode_trip(const ArnetModel &model, std::span<const FeatureMatrix> segments) {
  check_single_trip(segments);
  TripVector v;
  v.driver_id = segments.front().meta.driver_id;
  v.trip_id = segments.front().meta.trip_id;
  v.q = segments.size();
  v.values = normalized_code_sum(style_features(model, segments));
  return v;
}

struct TripPrediction {
  int top1 = 0;
  std::vector<int> ranking;   // classes by descending vote, ties by index
  std::vector<double> votes;  // summed segment distributions
};

/// Confidence-weighted vote over segment distributions (rows of `dists`).
inline TripPrediction vote(const Mat &dists) {
  if (dists.rows() == 0) throw ValidationError("trip has no segments");
  TripPrediction p;
  nn::RowVec v = dists.colwise().sum();
  p.votes.assign(v.data(), v.data() + v.size());
  p.ranking.resize(p.votes.size());
  std::iota(p.ranking.begin(), p.ranking.end(), 0);
  std::stable_sort(p.ranking.begin(), p.ranking.end(),
                   [&](int a, int b) { return p.votes[static_cast<std::size_t>(a)] > p.votes[static_cast<std::size_t>(b)]; });
  p.top1 = p.ranking.front();
  return p;
}

inline TripPrediction predict_trip(const ArnetModel &model, std::span<const FeatureMatrix> segments) {
  require_classifier(model);
  check_single_trip(segments);
  return vote(predict_segments(model, segments));
}

/// Indices of the segments of each trip, trips in order of first appearance.
struct TripGroup {
  std::string driver_id;
  std::string trip_id;
  std::vector<std::size_t> segments;
};

inline std::vector<TripGroup> group_by_trip(std::span<const FeatureMatrix> segments) {
  std::vector<TripGroup> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto &m = segments[i].meta;
    auto [it, inserted] = index.try_emplace({m.driver_id, m.trip_id}, groups.size());
    if (inserted) groups.push_back(TripGroup{m.driver_id, m.trip_id, {}});
    groups[it->second].segments.push_back(i);
  }
  return groups;
}

/// Trip vectors for every trip in a flat segment list, encoded in one pass.
inline std::vector<TripVector> encode_trips(const ArnetModel &model, std::span<const FeatureMatrix> segments) {
  Mat feats = style_features(model, segments);
  std::vector<TripVector> out;
  for (const auto &g : group_by_trip(segments)) {
    Mat codes(static_cast<Eigen::Index>(g.segments.size()), feats.cols());
    for (std::size_t i = 0; i < g.segments.size(); ++i)
      codes.row(static_cast<Eigen::Index>(i)) = feats.row(static_cast<Eigen::Index>(g.segments[i]));
    out.push_back(TripVector{g.driver_id, g.trip_id, g.segments.size(), normalized_code_sum(codes)});
  }
  return out;
}

inline void write_trip_vectors(std::ostream &out, std::span<const TripVector> vecs) {
  const std::size_t k = vecs.empty() ? 0 : vecs.front().values.size();
  out << "driver_id,trip_id,q";
  for (std::size_t j = 0; j < k; ++j) out << ",v" << j;
  out << '\n';
  for (const auto &v : vecs) {
    out << v.driver_id << ',' << v.trip_id << ',' << v.q;
    for (double x : v.values) out << ',' << text::format_sig(x, 9);
    out << '\n';
  }
}

inline std::vector<TripVector> read_trip_vectors(std::istream &in) {
  std::vector<TripVector> out;
  std::string line;
  std::size_t lineno = 0, width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto row = text::trim(line);
    if (row.empty()) continue;
    auto cells = text::split(row, ',');
    if (lineno == 1 && cells.size() >= 3 && cells[0] == "driver_id") {
      width = cells.size();
      continue;
    }
    if (cells.size() < 3 || (width && cells.size() != width))
      throw ParseError(lineno, "wrong column count");
    TripVector v;
    v.driver_id = std::string(cells[0]);
    v.trip_id = std::string(cells[1]);
    auto q = text::parse_int(cells[2]);
    if (!q || *q < 1) throw ParseError(lineno, "bad segment count");
    v.q = static_cast<std::size_t>(*q);
    for (std::size_t j = 3; j < cells.size(); ++j) {
      auto x = text::parse_double(cells[j]);
      if (!x) throw ParseError(lineno, "bad value '" + std::string(cells[j]) + "'");
      v.values.push_back(*x);
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace stylemetry

#endif  // STYLEMETRY_TRIP2VEC_HPP
