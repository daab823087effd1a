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

#ifndef STYLEMETRY_PIPELINE_HPP
#define STYLEMETRY_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stylemetry/arnet.hpp"
#include "stylemetry/featurize.hpp"
#include "stylemetry/ingest.hpp"
#include "stylemetry/parallel.hpp"

namespace stylemetry {

/// Validates and featurizes every trip; output keeps the input trip order.
inline std::vector<FeatureMatrix> featurize_trips(std::span<const RawTrip> trips, const FeaturizeConfig &cfg = {},
                                                  std::int64_t max_gap = 3) {
  cfg.validate();
  std::vector<std::vector<FeatureMatrix>> per_trip(trips.size());
  parallel_for(trips.size(), [&](std::size_t i) {
    for (const auto &piece : validate_trip(trips[i], max_gap)) {
      if (piece.points.size() < cfg.segment_len) continue;
      auto mats = featurize_trip(piece, cfg);
      for (auto &m : mats) per_trip[i].push_back(std::move(m));
    }
  });
  std::vector<FeatureMatrix> out;
  for (auto &v : per_trip)
    for (auto &m : v) out.push_back(std::move(m));
  return out;
}

/// Class index = rank of the driver id among the sorted distinct ids.
inline std::vector<std::string> make_label_map(std::span<const FeatureMatrix> segments) {
  std::set<std::string> ids;
  for (const auto &s : segments) ids.insert(s.meta.driver_id);
  return {ids.begin(), ids.end()};
}

inline std::vector<int> assign_labels(std::span<const FeatureMatrix> segments,
                                      const std::vector<std::string> &label_map) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < label_map.size(); ++i) index[label_map[i]] = static_cast<int>(i);
  std::vector<int> y;
  y.reserve(segments.size());
  for (const auto &s : segments) {
    auto it = index.find(s.meta.driver_id);
    if (it == index.end()) throw ValidationError("driver " + s.meta.driver_id + " is not in the label map");
    y.push_back(it->second);
  }
  return y;
}

struct TripSplit {
  std::vector<FeatureMatrix> train;
  std::vector<FeatureMatrix> test;
};

/// Per driver, a seeded shuffle of its trips sends round(fraction * trips)
/// of them (at least one) to `train`; all segments of a trip stay together.
inline TripSplit split_by_trip(std::span<const FeatureMatrix> segments, double train_fraction, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> trips_of;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto &s : segments)
    if (seen.insert({s.meta.driver_id, s.meta.trip_id}).second) trips_of[s.meta.driver_id].push_back(s.meta.trip_id);
  std::set<std::pair<std::string, std::string>> train_trips;
  for (auto &[driver, trips] : trips_of) {
    std::sort(trips.begin(), trips.end());
    std::mt19937_64 rng(derive_seed(seed, {fnv1a(driver)}));
    std::shuffle(trips.begin(), trips.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(trips.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, trips.size());
    for (std::size_t i = 0; i < n_train; ++i) train_trips.insert({driver, trips[i]});
  }
  TripSplit out;
  for (const auto &s : segments)
    (train_trips.count({s.meta.driver_id, s.meta.trip_id}) ? out.train : out.test).push_back(s);
  return out;
}

/// Fits the input scaler on `train_x`, trains, and returns the best snapshot.
inline TrainResult fit_arnet(ArnetConfig cfg, std::span<const FeatureMatrix> train_x,
                             std::span<const FeatureMatrix> val_x, const TrainCallbacks &callbacks = {}) {
  auto labels = make_label_map(train_x);
  cfg.n_classes = std::max<std::size_t>(1, labels.size());
  ArnetModel model = make_arnet(cfg);
  model.labels = labels;
  fit_input_scaler(model, train_x);
  auto ty = assign_labels(train_x, labels);
  auto vy = assign_labels(val_x, labels);
  return train(std::move(model), Dataset{train_x, ty}, Dataset{val_x, vy}, callbacks);
}

}  // namespace stylemetry

#endif  // STYLEMETRY_PIPELINE_HPP
