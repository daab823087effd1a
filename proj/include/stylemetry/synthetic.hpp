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

#ifndef STYLEMETRY_SYNTHETIC_HPP
#define STYLEMETRY_SYNTHETIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stylemetry/error.hpp"
#include "stylemetry/featurize.hpp"
#include "stylemetry/ingest.hpp"
#include "stylemetry/parallel.hpp"

namespace stylemetry {

/// Driving habits of one simulated driver.
struct PersonaConfig {
  double cruise_speed = 15.0;         // m/s
  double accel_aggressiveness = 1.5;  // m/s^2
  double turn_sharpness = 0.25;       // rad/s
  double speed_change_rate = 2.0;     // events per minute
  double jitter = 0.5;                // GPS noise std, meters

  void validate() const {
    // Zero jitter is allowed: it gives noise-free ground-truth tracks.
    const bool positive = cruise_speed > 0 && accel_aggressiveness > 0 && turn_sharpness > 0 &&
                          speed_change_rate > 0 && jitter >= 0;
    if (!positive || cruise_speed > 60.0 || !std::isfinite(cruise_speed + accel_aggressiveness + turn_sharpness +
                                                            speed_change_rate + jitter))
      throw ValidationError("persona rates must be positive, jitter nonnegative, cruise speed at most 60 m/s");
  }
};

/// Box the auto-spread personas are drawn from: {low, high} per field.
struct PersonaBox {
  std::array<double, 2> cruise_speed{8.0, 30.0};
  std::array<double, 2> accel_aggressiveness{0.5, 3.5};
  std::array<double, 2> turn_sharpness{0.05, 0.6};
  std::array<double, 2> speed_change_rate{0.5, 6.0};
  std::array<double, 2> jitter{0.1, 1.0};
};

namespace detail {
inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}
}  // namespace detail

/// Personas spread over `box` by a Halton sequence (bases 2,3,5,7,11), each
/// nudged by up to 3% of the box width from a per-driver stream of `seed`.
/// `first_index` offsets the sequence so disjoint pools get distinct people.
inline std::vector<PersonaConfig> auto_personas(std::size_t n, std::uint64_t seed, std::size_t first_index = 0,
                                                const PersonaBox &box = {}) {
  std::vector<PersonaConfig> out;
  for (std::size_t d = 0; d < n; ++d) {
    const std::uint64_t idx = first_index + d + 1;
    std::mt19937_64 rng(derive_seed(seed, {0xbe5, idx}));
    std::uniform_real_distribution<double> nudge(-0.03, 0.03);
    auto pick = [&](const std::array<double, 2> &range, std::uint64_t base) {
      double u = std::clamp(detail::radical_inverse(idx, base) + nudge(rng), 0.0, 1.0);
      return range[0] + u * (range[1] - range[0]);
    };
    PersonaConfig p;
    p.cruise_speed = pick(box.cruise_speed, 2);
    p.accel_aggressiveness = pick(box.accel_aggressiveness, 3);
    p.turn_sharpness = pick(box.turn_sharpness, 5);
    p.speed_change_rate = pick(box.speed_change_rate, 7);
    p.jitter = pick(box.jitter, 11);
    out.push_back(p);
  }
  return out;
}

inline std::string synthetic_driver_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "drv%04zu", index);
  return buf;
}

/// One 1 Hz trip of a kinematic point mass.
///
/// Speed chases a target that relaxes toward the cruise speed and jumps at
/// Poisson speed-change events (some of them stops); acceleration toward the
/// target is capped by the aggressiveness. Heading turns toward randomly drawn
/// waypoint headings at no more than turn_sharpness rad/s. Positions get
/// Gaussian jitter before conversion to degrees.
inline RawTrip simulate_trip(const PersonaConfig &p, std::size_t trip_seconds, std::uint64_t seed,
                             std::string driver_id, std::string trip_id) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double deg = 180.0 / std::numbers::pi;

  const double lat0 = 40.0 + (unit(rng) - 0.5);
  const double lon0 = -74.0 + (unit(rng) - 0.5);
  const double coslat = std::cos(lat0 / deg);

  double x = 0.0, y = 0.0;  // meters east / north
  double heading = (unit(rng) * 2.0 - 1.0) * std::numbers::pi;
  double target_heading = heading;
  double v = p.cruise_speed;
  double target_v = p.cruise_speed;
  double next_waypoint = 20.0 + 70.0 * unit(rng);
  const double event_prob = 1.0 - std::exp(-p.speed_change_rate / 60.0);
  std::size_t stop_left = 0;

  RawTrip trip{std::move(driver_id), std::move(trip_id), {}};
  trip.points.reserve(trip_seconds);
  for (std::size_t t = 0; t < trip_seconds; ++t) {
    const double jx = p.jitter * gauss(rng), jy = p.jitter * gauss(rng);
    trip.points.push_back(GpsPoint{static_cast<std::int64_t>(t), lat0 + (y + jy) / kEarthRadiusM * deg,
                                   lon0 + (x + jx) / (kEarthRadiusM * coslat) * deg});

    if (unit(rng) < event_prob) {
      if (unit(rng) < 0.15) {
        target_v = 0.0;
        stop_left = 5 + static_cast<std::size_t>(20.0 * unit(rng));
      } else {
        target_v = std::clamp(p.cruise_speed * (1.0 + 0.35 * gauss(rng)), 0.3 * p.cruise_speed,
                              1.3 * p.cruise_speed);
      }
    }
    if (stop_left > 0 && --stop_left == 0) target_v = p.cruise_speed * (0.6 + 0.4 * unit(rng));
    if (stop_left == 0) target_v += 0.02 * (p.cruise_speed - target_v);

    double accel = std::clamp(0.6 * (target_v - v), -1.5 * p.accel_aggressiveness, p.accel_aggressiveness);
    accel += 0.05 * p.accel_aggressiveness * gauss(rng);
    v = std::clamp(v + accel, 0.0, 60.0);

    if (static_cast<double>(t) >= next_waypoint) {
      const double turn = (std::numbers::pi / 6.0) + unit(rng) * (std::numbers::pi / 3.0);
      target_heading = heading + (unit(rng) < 0.5 ? -turn : turn);
      next_waypoint += 20.0 + 70.0 * unit(rng);
    }
    const double want = std::remainder(target_heading - heading, 2.0 * std::numbers::pi);
    heading += std::clamp(want, -p.turn_sharpness, p.turn_sharpness);
    heading += 0.02 * p.turn_sharpness * gauss(rng);

    x += v * std::sin(heading);
    y += v * std::cos(heading);
  }
  return trip;
}

/// Trips for `personas.size()` drivers, `trips_per_driver` each, ordered by
/// driver then trip. Driver ids are drv<first_index + d>.
inline std::vector<RawTrip> generate_synthetic(const std::vector<PersonaConfig> &personas,
                                               std::size_t trips_per_driver, std::size_t trip_seconds,
                                               std::uint64_t seed, std::size_t first_index = 0) {
  if (personas.empty()) throw ValidationError("need at least one driver");
  if (trip_seconds < 3) throw ValidationError("trips must be at least 3 seconds long");
  for (const auto &p : personas) p.validate();
  std::vector<RawTrip> trips(personas.size() * trips_per_driver);
  parallel_for(trips.size(), [&](std::size_t i) {
    const std::size_t d = i / trips_per_driver, k = i % trips_per_driver;
    const std::size_t driver = first_index + d;
    char trip_id[32];
    std::snprintf(trip_id, sizeof(trip_id), "t%03zu", k);
    trips[i] = simulate_trip(personas[d], trip_seconds, derive_seed(seed, {0x7219, driver, k}),
                             synthetic_driver_id(driver), trip_id);
  });
  return trips;
}

inline std::vector<RawTrip> generate_synthetic(std::size_t n_drivers, std::size_t trips_per_driver,
                                               std::size_t trip_seconds, std::uint64_t seed,
                                               std::size_t first_index = 0) {
  return generate_synthetic(auto_personas(n_drivers, seed, first_index), trips_per_driver, trip_seconds, seed,
                            first_index);
}

}  // namespace stylemetry

#endif  // STYLEMETRY_SYNTHETIC_HPP
