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

#ifndef STYLEMETRY_INGEST_HPP
#define STYLEMETRY_INGEST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "stylemetry/error.hpp"
#include "stylemetry/text.hpp"

namespace stylemetry {

struct GpsPoint {
  std::int64_t t = 0;  // seconds
  double lat = 0.0;    // degrees
  double lon = 0.0;    // degrees

  friend bool operator==(const GpsPoint &, const GpsPoint &) = default;
};

struct RawTrip {
  std::string driver_id;
  std::string trip_id;
  std::vector<GpsPoint> points;

  friend bool operator==(const RawTrip &, const RawTrip &) = default;
};

inline constexpr std::string_view kTripCsvHeader = "driver_id,trip_id,t,lat,lon";

/// Reads trip-CSV text. Rows are grouped by (driver_id, trip_id) in order of
/// first appearance; points keep their row order. A leading header line is
/// skipped; blank lines are ignored.
inline std::vector<RawTrip> parse_trips(std::istream &in) {
  std::vector<RawTrip> trips;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = text::trim(line);
    if (row.empty()) continue;
    if (lineno == 1 && row == kTripCsvHeader) continue;
    auto cols = text::split(row, ',');
    if (cols.size() != 5)
      throw ParseError(lineno, "expected 5 columns, got " + std::to_string(cols.size()));
    auto t = text::parse_int(cols[2]);
    auto lat = text::parse_double(cols[3]);
    auto lon = text::parse_double(cols[4]);
    if (!t) throw ParseError(lineno, "bad timestamp '" + std::string(cols[2]) + "'");
    if (!lat) throw ParseError(lineno, "bad latitude '" + std::string(cols[3]) + "'");
    if (!lon) throw ParseError(lineno, "bad longitude '" + std::string(cols[4]) + "'");
    std::pair<std::string, std::string> key{std::string(text::trim(cols[0])),
                                            std::string(text::trim(cols[1]))};
    auto [it, inserted] = index.try_emplace(key, trips.size());
    if (inserted) trips.push_back(RawTrip{key.first, key.second, {}});
    trips[it->second].points.push_back(GpsPoint{*t, *lat, *lon});
  }
  return trips;
}

inline void write_trips(std::ostream &out, const std::vector<RawTrip> &trips) {
  out << kTripCsvHeader << '\n';
  for (const auto &trip : trips) {
    for (const auto &p : trip.points) {
      out << trip.driver_id << ',' << trip.trip_id << ',' << p.t << ','
          << text::format_double(p.lat) << ',' << text::format_double(p.lon) << '\n';
    }
  }
}

/// Sorts by time, drops repeated timestamps (first occurrence wins), splits at
/// gaps longer than `max_gap` seconds and linearly fills shorter gaps so every
/// output trip is sampled at exactly 1 Hz. Output trip ids get a `.k` suffix.
inline std::vector<RawTrip> validate_trip(const RawTrip &trip, std::int64_t max_gap = 3) {
  if (trip.points.empty())
    throw ValidationError("trip " + trip.driver_id + "/" + trip.trip_id + " has no points");
  if (max_gap < 1) throw ValidationError("max_gap must be >= 1");
  for (std::size_t i = 0; i < trip.points.size(); ++i) {
    const auto &p = trip.points[i];
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 ||
        p.lon < -180.0 || p.lon > 180.0) {
      throw ValidationError("trip " + trip.driver_id + "/" + trip.trip_id + " point " +
                            std::to_string(i) + " (t=" + std::to_string(p.t) +
                            ") has invalid coordinates");
    }
  }

  std::vector<GpsPoint> pts = trip.points;
  std::stable_sort(pts.begin(), pts.end(),
                   [](const GpsPoint &a, const GpsPoint &b) { return a.t < b.t; });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const GpsPoint &a, const GpsPoint &b) { return a.t == b.t; }),
            pts.end());

  std::vector<RawTrip> out;
  auto start_piece = [&]() {
    out.push_back(RawTrip{trip.driver_id, trip.trip_id + "." + std::to_string(out.size()), {}});
  };
  start_piece();
  out.back().points.push_back(pts.front());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const GpsPoint &prev = pts[i - 1];
    const GpsPoint &cur = pts[i];
    std::int64_t gap = cur.t - prev.t;
    if (gap > max_gap) {
      start_piece();
    } else {
      for (std::int64_t k = 1; k < gap; ++k) {
        double w = static_cast<double>(k) / static_cast<double>(gap);
        out.back().points.push_back(GpsPoint{prev.t + k, prev.lat + w * (cur.lat - prev.lat),
                                             prev.lon + w * (cur.lon - prev.lon)});
      }
    }
    out.back().points.push_back(cur);
  }
  return out;
}

}  // namespace stylemetry

#endif  // STYLEMETRY_INGEST_HPP
