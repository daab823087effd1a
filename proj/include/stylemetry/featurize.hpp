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

#ifndef STYLEMETRY_FEATURIZE_HPP
#define STYLEMETRY_FEATURIZE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stylemetry/error.hpp"
#include "stylemetry/ingest.hpp"
#include "stylemetry/text.hpp"

namespace stylemetry {

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr std::size_t kBasicFeatures = 5;
inline constexpr std::size_t kFrameStatistics = 7;
inline constexpr std::size_t kFeatureRows = kBasicFeatures * kFrameStatistics;

enum BasicFeature : std::size_t {
  kSpeed = 0,
  kSpeedDiff = 1,
  kAcceleration = 2,
  kAccelerationDiff = 3,
  kAngularSpeed = 4,
};

// mean, min, max, q25, q50, q75, std
enum FrameStatistic : std::size_t {
  kMean = 0,
  kMin = 1,
  kMax = 2,
  kQ25 = 3,
  kQ50 = 4,
  kQ75 = 5,
  kStd = 6,
};

struct FeaturizeConfig {
  std::size_t segment_len = 256;  // seconds
  std::size_t frame_len = 4;      // seconds

  std::size_t columns() const { return 2 * segment_len / frame_len; }

  void validate() const {
    if (frame_len == 0 || frame_len % 2 != 0)
      throw ValidationError("frame length must be a positive even number");
    if (frame_len >= segment_len)
      throw ValidationError("frame length must be shorter than the segment length");
    if (segment_len % frame_len != 0)
      throw ValidationError("segment length must be divisible by the frame length");
  }
};

/// Five per-point movement signals, one column per GPS point.
struct BasicFeatureSeries {
  std::array<std::vector<double>, kBasicFeatures> rows;

  std::size_t size() const { return rows[0].size(); }
};

struct SegmentMeta {
  std::string driver_id;
  std::string trip_id;
  std::size_t segment_index = 0;

  friend bool operator==(const SegmentMeta &, const SegmentMeta &) = default;
};

/// 35 x C statistics matrix, row 7*feature + statistic, stored row-major.
struct FeatureMatrix {
  std::size_t cols = 0;
  std::vector<double> values;
  SegmentMeta meta;

  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t c) : cols(c), values(kFeatureRows * c, 0.0) {}

  static constexpr std::size_t rows() { return kFeatureRows; }
  double &at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct GeoStep {
  double distance = 0.0;  // meters
  double bearing = 0.0;   // radians in (-pi, pi], 0 = north, pi/2 = east
};

inline GeoStep geo_step(const GpsPoint &a, const GpsPoint &b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double phi1 = a.lat * deg, phi2 = b.lat * deg;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon - a.lon) * deg;
  const double sp = std::sin(dphi / 2.0), sl = std::sin(dlambda / 2.0);
  const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  GeoStep out;
  out.distance = 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
  if (out.distance == 0.0) return out;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double bearing = std::atan2(y, x);
  if (bearing <= -std::numbers::pi) bearing = std::numbers::pi;
  out.bearing = bearing + 0.0;  // folds -0 into +0
  return out;
}

// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

/// Speed, speed difference, acceleration norm |dv|, its difference and
/// angular speed for a validated 1 Hz trip. Warm-up columns are copied
/// (speed) or zeroed (everything else) so column i lines up with point i.
inline BasicFeatureSeries basic_features(const RawTrip &trip) {
  const auto &p = trip.points;
  const std::size_t n = p.size();
  if (n < 3)
    throw ValidationError("trip " + trip.driver_id + "/" + trip.trip_id +
                          " has fewer than 3 points");
  BasicFeatureSeries s;
  for (auto &row : s.rows) row.assign(n, 0.0);
  auto &speed = s.rows[kSpeed];
  auto &dspeed = s.rows[kSpeedDiff];
  auto &acc = s.rows[kAcceleration];
  auto &dacc = s.rows[kAccelerationDiff];
  auto &ang = s.rows[kAngularSpeed];

  std::vector<double> bearing(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    auto step = geo_step(p[i - 1], p[i]);
    speed[i] = step.distance;
    bearing[i] = step.bearing;
  }
  speed[0] = speed[1];
  for (std::size_t i = 1; i < n; ++i) {
    dspeed[i] = speed[i] - speed[i - 1];
    acc[i] = std::abs(dspeed[i]);
    dacc[i] = acc[i] - acc[i - 1];
  }
  for (std::size_t i = 2; i < n; ++i) ang[i] = wrap_angle(bearing[i] - bearing[i - 1]);
  return s;
}

/// Start columns of the full L_s windows taken with shift L_s/2.
inline std::vector<std::size_t> segment_starts(std::size_t n, const FeaturizeConfig &cfg) {
  std::vector<std::size_t> starts;
  const std::size_t shift = cfg.segment_len / 2;
  for (std::size_t s = 0; s + cfg.segment_len <= n; s += shift) starts.push_back(s);
  return starts;
}

inline std::vector<BasicFeatureSeries> segment_series(const BasicFeatureSeries &series,
                                                      const FeaturizeConfig &cfg) {
  cfg.validate();
  std::vector<BasicFeatureSeries> out;
  for (std::size_t start : segment_starts(series.size(), cfg)) {
    BasicFeatureSeries seg;
    for (std::size_t f = 0; f < kBasicFeatures; ++f) {
      auto first = series.rows[f].begin() + static_cast<std::ptrdiff_t>(start);
      seg.rows[f].assign(first, first + static_cast<std::ptrdiff_t>(cfg.segment_len));
    }
    out.push_back(std::move(seg));
  }
  return out;
}

// Quantile by linear interpolation at position p*(n-1) of the sorted values.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

/// The seven statistics of one feature row over one frame.
inline std::array<double, kFrameStatistics> row_statistics(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  var /= n;
  // Summation order can push the mean a rounding step outside [min, max].
  mean = std::clamp(mean, sorted.front(), sorted.back());
  return {mean,
          sorted.front(),
          sorted.back(),
          sorted_quantile(sorted, 0.25),
          sorted_quantile(sorted, 0.50),
          sorted_quantile(sorted, 0.75),
          std::sqrt(var)};
}

/// `window` holds the 5 feature rows of one frame, `frame_len` values each,
/// row-major. Returns the 35 statistics in row order 7*feature + statistic.
inline std::array<double, kFeatureRows> frame_statistics(std::span<const double> window,
                                                         std::size_t frame_len) {
  if (window.size() != kBasicFeatures * frame_len)
    throw ShapeError("frame window has " + std::to_string(window.size()) + " values, expected " +
                     std::to_string(kBasicFeatures * frame_len));
  std::array<double, kFeatureRows> out{};
  for (std::size_t f = 0; f < kBasicFeatures; ++f) {
    auto stats = row_statistics(window.subspan(f * frame_len, frame_len));
    std::copy(stats.begin(), stats.end(), out.begin() + static_cast<std::ptrdiff_t>(f * kFrameStatistics));
  }
  return out;
}

/// Turns one 5 x L_s segment into its 35 x (2 L_s / L_f) statistics matrix.
/// The segment is right-padded with L_f/2 copies of its last column so the
/// half-overlapping frames tile it exactly 2 L_s / L_f times.
inline FeatureMatrix segment_matrix(const BasicFeatureSeries &segment, const FeaturizeConfig &cfg) {
  const std::size_t half = cfg.frame_len / 2;
  const std::size_t cols = cfg.columns();
  FeatureMatrix m(cols);
  std::vector<double> window(kBasicFeatures * cfg.frame_len);
  const std::size_t len = segment.size();
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t start = c * half;
    for (std::size_t f = 0; f < kBasicFeatures; ++f) {
      for (std::size_t k = 0; k < cfg.frame_len; ++k) {
        window[f * cfg.frame_len + k] = segment.rows[f][std::min(start + k, len - 1)];
      }
    }
    auto stats = frame_statistics(window, cfg.frame_len);
    for (std::size_t r = 0; r < kFeatureRows; ++r) m.at(r, c) = stats[r];
  }
  return m;
}

inline std::vector<FeatureMatrix> featurize_trip(const RawTrip &trip, const FeaturizeConfig &cfg = {}) {
  cfg.validate();
  auto series = basic_features(trip);
  auto segments = segment_series(series, cfg);
  std::vector<FeatureMatrix> out;
  out.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    FeatureMatrix m = segment_matrix(segments[i], cfg);
    m.meta = SegmentMeta{trip.driver_id, trip.trip_id, i};
    out.push_back(std::move(m));
  }
  return out;
}

// Feature-matrix file: a `driver_id,trip_id,segment_index` line followed by
// 35 lines of comma-separated values; records simply concatenate.
inline void write_feature_matrices(std::ostream &out, std::span<const FeatureMatrix> mats) {
  for (const auto &m : mats) {
    out << m.meta.driver_id << ',' << m.meta.trip_id << ',' << m.meta.segment_index << '\n';
    for (std::size_t r = 0; r < kFeatureRows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) {
        if (c) out << ',';
        out << text::format_double(m.at(r, c));
      }
      out << '\n';
    }
  }
}

inline std::vector<FeatureMatrix> read_feature_matrices(std::istream &in) {
  std::vector<FeatureMatrix> out;
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!text::trim(line).empty()) return true;
    }
    return false;
  };
  while (next_line()) {
    auto meta = text::split(text::trim(line), ',');
    if (meta.size() != 3) throw ParseError(lineno, "expected meta line driver_id,trip_id,segment_index");
    auto idx = text::parse_int(meta[2]);
    if (!idx || *idx < 0) throw ParseError(lineno, "bad segment index");
    FeatureMatrix m;
    m.meta = SegmentMeta{std::string(meta[0]), std::string(meta[1]), static_cast<std::size_t>(*idx)};
    for (std::size_t r = 0; r < kFeatureRows; ++r) {
      if (!next_line()) throw ParseError(lineno, "truncated feature matrix");
      auto cells = text::split(text::trim(line), ',');
      if (r == 0) {
        m.cols = cells.size();
        m.values.reserve(kFeatureRows * m.cols);
      } else if (cells.size() != m.cols) {
        throw ParseError(lineno, "expected " + std::to_string(m.cols) + " values, got " +
                                     std::to_string(cells.size()));
      }
      for (auto cell : cells) {
        auto v = text::parse_double(cell);
        if (!v || !std::isfinite(*v)) throw ParseError(lineno, "bad value '" + std::string(cell) + "'");
        m.values.push_back(*v);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace stylemetry

#endif  // STYLEMETRY_FEATURIZE_HPP
