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

#include <map>
#include <set>
#include <sstream>

#include "stylemetry/experiments.hpp"

namespace stylemetry {
namespace {

// Trip vectors of `drivers` drivers; each driver's trips sit near its own
// corner of the unit cube.
std::vector<TripVector> pool(std::size_t drivers, std::size_t trips, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<TripVector> out;
  for (std::size_t d = 0; d < drivers; ++d)
    for (std::size_t t = 0; t < trips; ++t) {
      TripVector v{"drv" + std::to_string(d), "t" + std::to_string(t), 2, std::vector<double>(drivers, 0.0)};
      v.values[d] = 1.0;
      for (auto &x : v.values) x += g(rng);
      out.push_back(std::move(v));
    }
  return out;
}

Estimate perfect(std::span<const TripVector> trips) {
  std::map<std::string, std::size_t> ids;
  Estimate e;
  for (const auto &t : trips) {
    auto [it, inserted] = ids.try_emplace(t.driver_id, ids.size());
    e.labels.push_back(it->second);
  }
  e.n_clusters = ids.size();
  return e;
}

TEST(Estimation, PerfectClustererScoresPerfectly) {
  auto p = pool(6, 4, 1);
  auto rep = run_estimation_benchmark(p, perfect, {5, 4, 0, 9});
  ASSERT_EQ(rep.groups.size(), 5u);
  for (const auto &g : rep.groups) {
    EXPECT_EQ(g.abs_error.mean, 0.0);
    EXPECT_EQ(g.ami.mean, 1.0);
    EXPECT_EQ(g.amis.size(), 4u);
  }
  EXPECT_EQ(rep.avg_abs_error, 0.0);
  EXPECT_EQ(rep.avg_ami, 1.0);
}

TEST(Estimation, SingleDriverGroupsScoreZeroOrOne) {
  auto p = pool(3, 5, 2);
  auto rep = run_estimation_benchmark(p, ap_clusterer(-0.5), {1, 2, 0, 3});
  for (double a : rep.groups[0].amis) EXPECT_TRUE(a == 0.0 || a == 1.0);
}

TEST(Estimation, SamplesDriversWithoutReplacement) {
  auto p = pool(5, 3, 3);
  auto check = [](std::span<const TripVector> trips) {
    std::set<std::string> drivers;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto &t : trips) {
      drivers.insert(t.driver_id);
      EXPECT_TRUE(seen.insert({t.driver_id, t.trip_id}).second);
    }
    EXPECT_EQ(trips.size(), 3 * drivers.size());
    return perfect(trips);
  };
  auto rep = run_estimation_benchmark(p, check, {5, 6, 0, 4});
  for (const auto &g : rep.groups)
    for (auto e : g.estimates) EXPECT_EQ(e, g.drivers);
}

TEST(Estimation, TripCapLimitsTripsPerDriver) {
  auto p = pool(3, 6, 3);
  auto check = [](std::span<const TripVector> trips) {
    std::map<std::string, int> per;
    for (const auto &t : trips) ++per[t.driver_id];
    for (const auto &[d, n] : per) EXPECT_EQ(n, 2);
    return perfect(trips);
  };
  run_estimation_benchmark(p, check, {3, 2, 2, 4});
}

TEST(Estimation, PoolTooSmallNamesGroup) {
  auto p = pool(3, 2, 1);
  try {
    run_estimation_benchmark(p, perfect, {4, 1, 0, 0});
    FAIL();
  } catch (const ValidationError &e) {
    EXPECT_NE(std::string(e.what()).find("group 4"), std::string::npos);
  }
}

TEST(Estimation, ReproducibleAndParallelSafe) {
  auto p = pool(6, 5, 4);
  set_max_threads(1);
  auto a = run_estimation_benchmark(p, ap_clusterer(-0.3), {4, 5, 0, 11});
  set_max_threads(4);
  auto b = run_estimation_benchmark(p, ap_clusterer(-0.3), {4, 5, 0, 11});
  set_max_threads(0);
  std::ostringstream sa, sb;
  write_estimation_report(sa, a, "x");
  write_estimation_report(sb, b, "x");
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str().find("avg"), std::string::npos);
}

TEST(Estimation, SeparatedDriversRecovered) {
  auto p = pool(3, 6, 5);
  auto e = estimate_driver_count(p, -0.5);
  EXPECT_EQ(e.n_clusters, 3u);
  EXPECT_EQ(estimate_driver_count(std::span<const TripVector>(p).subspan(0, 1), -0.5).n_clusters, 1u);
  std::vector<TripVector> doubled = p;
  doubled.insert(doubled.end(), p.begin(), p.end());
  // Exact duplicates make damping 0.5 oscillate; heavier damping settles.
  EXPECT_EQ(estimate_driver_count(doubled, -0.5, ApParams{0.7, 200, 15}).n_clusters, 3u);
  EXPECT_THROW(estimate_driver_count({}, -0.5), ValidationError);
}

TEST(Tuning, GridContract) {
  auto p = pool(4, 4, 6);
  EstimationOptions o{3, 3, 0, 1};
  std::vector<double> one{-0.7};
  EXPECT_EQ(tune_preference(p, one, o).best_preference, -0.7);
  auto grid = preference_grid(-4.0, -0.1, 7);
  ASSERT_EQ(grid.size(), 7u);
  EXPECT_EQ(grid.front(), -4.0);
  EXPECT_EQ(grid.back(), -0.1);
  auto c = tune_preference(p, grid, o);
  EXPECT_EQ(c.mean_abs_error.size(), grid.size());
  EXPECT_EQ(c.mean_ami.size(), grid.size());
  const double best = *std::min_element(c.mean_abs_error.begin(), c.mean_abs_error.end());
  auto it = std::find(grid.begin(), grid.end(), c.best_preference);
  EXPECT_EQ(c.mean_abs_error[static_cast<std::size_t>(it - grid.begin())], best);
  EXPECT_THROW(tune_preference(p, {}, o), ValidationError);
}

std::vector<FeatureMatrix> segments(std::initializer_list<std::pair<const char *, const char *>> ids) {
  std::vector<FeatureMatrix> out;
  for (const auto &[d, t] : ids) {
    FeatureMatrix m(2);
    m.meta = {d, t, 0};
    out.push_back(m);
  }
  return out;
}

TEST(Identification, AlwaysClassZero) {
  auto segs = segments({{"a", "1"}, {"a", "1"}, {"a", "2"}});
  Mat d = Mat::Zero(3, 2);
  d.col(0).setOnes();
  auto rep = identification_report(d, segs, {"a", "b"});
  EXPECT_EQ(rep.segment_accuracy, 1.0);
  EXPECT_EQ(rep.trip_top1, 1.0);
  EXPECT_EQ(rep.trip_top5, 1.0);
  EXPECT_EQ(rep.trips, 2u);
  EXPECT_EQ(rep.confusion[0][0], 2u);
}

TEST(Identification, UniformPredictionTopFiveByIndex) {
  std::vector<std::string> labels;
  for (int i = 0; i < 8; ++i) labels.push_back("d" + std::to_string(i));
  std::vector<FeatureMatrix> segs;
  for (int i = 0; i < 8; ++i) {
    FeatureMatrix m(2);
    m.meta = {labels[static_cast<std::size_t>(i)], "t", 0};
    segs.push_back(m);
  }
  Mat d = Mat::Constant(8, 8, 1.0 / 8.0);
  auto rep = identification_report(d, segs, labels);
  EXPECT_DOUBLE_EQ(rep.trip_top5, 5.0 / 8.0);
  EXPECT_DOUBLE_EQ(rep.trip_top1, 1.0 / 8.0);
  EXPECT_GE(rep.trip_top5, rep.trip_top1);
}

TEST(Identification, UnknownDriver) {
  auto segs = segments({{"zed", "1"}});
  EXPECT_THROW(identification_report(Mat::Constant(1, 2, 0.5), segs, {"a", "b"}), ValidationError);
}

TEST(MeanStd, Population) {
  std::vector<double> xs{1, 2, 3, 4};
  auto m = mean_std(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.std, 1.118033988749895);
}

}  // namespace
}  // namespace stylemetry
