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

#include <gtest/gtest.h>

#include <sstream>

#include "stylemetry/pipeline.hpp"
#include "stylemetry/synthetic.hpp"

namespace stylemetry {
namespace {

double mean_speed(const std::vector<FeatureMatrix> &mats) {
  const std::size_t row = 7 * static_cast<std::size_t>(BasicFeature::kSpeed) + static_cast<std::size_t>(FrameStatistic::kMean);
  double sum = 0.0, n = 0.0;
  for (const auto &m : mats)
    for (std::size_t c = 0; c < m.cols; ++c) {
      sum += m.at(row, c);
      n += 1.0;
    }
  return sum / n;
}

TEST(Synthetic, Deterministic) {
  auto a = generate_synthetic(1, 2, 300, 7), b = generate_synthetic(1, 2, 300, 7);
  std::ostringstream sa, sb;
  write_trips(sa, a);
  write_trips(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].points.size(), 300u);
  EXPECT_EQ(a[0].driver_id, "drv0000");
  EXPECT_EQ(a[1].trip_id, "t001");
  auto c = generate_synthetic(1, 2, 300, 8);
  EXPECT_NE(c[0].points[10].lat, a[0].points[10].lat);
}

TEST(Synthetic, TripsPassValidationUnchanged) {
  for (const auto &t : generate_synthetic(3, 2, 400, 1)) {
    auto pieces = validate_trip(t);
    ASSERT_EQ(pieces.size(), 1u);
    EXPECT_EQ(pieces[0].points.size(), t.points.size());
  }
}

TEST(Synthetic, SteadyPersonaRecoversCruiseSpeed) {
  PersonaConfig p;
  p.cruise_speed = 17.0;
  p.accel_aggressiveness = 1e-6;
  p.speed_change_rate = 1e-9;
  p.turn_sharpness = 1e-9;
  p.jitter = 0.0;
  auto trips = generate_synthetic({p}, 1, 600, 4);
  EXPECT_NEAR(mean_speed(featurize_trips(trips)), 17.0, 0.17);
}

TEST(Synthetic, CruiseSpeedSeparatesPersonas) {
  PersonaConfig slow, fast;
  slow.cruise_speed = 8.0;
  fast.cruise_speed = 30.0;
  auto s = featurize_trips(generate_synthetic({slow}, 3, 900, 2));
  auto f = featurize_trips(generate_synthetic({fast}, 3, 900, 2));
  EXPECT_GT(mean_speed(f) - mean_speed(s), 15.0);
}

TEST(Synthetic, AutoPersonasStayInBox) {
  PersonaBox box;
  auto ps = auto_personas(40, 3);
  for (const auto &p : ps) {
    EXPECT_NO_THROW(p.validate());
    EXPECT_GE(p.cruise_speed, box.cruise_speed[0]);
    EXPECT_LE(p.cruise_speed, box.cruise_speed[1]);
    EXPECT_GE(p.jitter, box.jitter[0]);
    EXPECT_LE(p.turn_sharpness, box.turn_sharpness[1]);
  }
  auto shifted = auto_personas(5, 3, 35);
  EXPECT_EQ(shifted[0].cruise_speed, ps[35].cruise_speed);
}

TEST(Synthetic, RejectsBadInput) {
  PersonaConfig p;
  p.cruise_speed = 70.0;
  EXPECT_THROW(generate_synthetic({p}, 1, 300, 0), ValidationError);
  p.cruise_speed = 10.0;
  p.turn_sharpness = 0.0;
  EXPECT_THROW(generate_synthetic({p}, 1, 300, 0), ValidationError);
  EXPECT_THROW(generate_synthetic(std::vector<PersonaConfig>{}, 1, 300, 0), ValidationError);
}

}  // namespace
}  // namespace stylemetry
