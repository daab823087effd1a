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

#ifndef STYLEMETRY_EXPERIMENTS_HPP
#define STYLEMETRY_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stylemetry/arnet.hpp"
#include "stylemetry/clusteval.hpp"
#include "stylemetry/error.hpp"
#include "stylemetry/parallel.hpp"
#include "stylemetry/text.hpp"
#include "stylemetry/trip2vec.hpp"

namespace stylemetry {

// ---------------------------------------------------------------------------
// Driver-number estimation

struct Estimate {
  std::size_t n_clusters = 0;
  std::vector<std::size_t> labels;
  bool converged = true;
};

/// Maps a set of trip vectors to a clustering.
using Clusterer = std::function<Estimate(std::span<const TripVector>)>;

inline Estimate estimate_driver_count(std::span<const TripVector> trips, double preference,
                                      const ApParams &ap = {}) {
  if (trips.empty()) throw ValidationError("need at least one trip vector");
  std::vector<std::vector<double>> pts;
  pts.reserve(trips.size());
  for (const auto &t : trips) pts.push_back(t.values);
  ClusterResult r = affinity_propagation(similarity(pts, preference), ap);
  return Estimate{r.n_clusters, std::move(r.labels), r.converged};
}

inline Clusterer ap_clusterer(double preference, ApParams ap = {}) {
  return [preference, ap](std::span<const TripVector> trips) { return estimate_driver_count(trips, preference, ap); };
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

struct GroupResult {
  std::size_t drivers = 0;
  std::vector<double> abs_errors;  // one per repeat
  std::vector<double> amis;
  std::vector<std::size_t> estimates;
  std::size_t non_converged = 0;
  MeanStd abs_error;
  MeanStd ami;
};

struct EstimationReport {
  std::vector<GroupResult> groups;
  double avg_abs_error = 0.0;  // mean of the group means
  double avg_ami = 0.0;
};

struct EstimationOptions {
  std::size_t groups = 10;              // group g samples g drivers, g = 1..groups
  std::size_t repeats = 25;
  std::size_t max_trips_per_driver = 0;  // 0 = all pool trips
  std::uint64_t seed = 0;
};

/// Repeatedly samples g distinct drivers from the pool, clusters all their
/// trips and scores the cluster count and AMI against the true drivers.
inline EstimationReport run_estimation_benchmark(std::span<const TripVector> pool, const Clusterer &cluster,
                                                 const EstimationOptions &opts) {
  std::vector<std::string> drivers;
  std::map<std::string, std::vector<std::size_t>> by_driver;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto [it, inserted] = by_driver.try_emplace(pool[i].driver_id);
    if (inserted) drivers.push_back(pool[i].driver_id);
    it->second.push_back(i);
  }
  std::sort(drivers.begin(), drivers.end());
  for (std::size_t g = 1; g <= opts.groups; ++g)
    if (drivers.size() < g)
      throw ValidationError("pool has " + std::to_string(drivers.size()) + " drivers, group " + std::to_string(g) +
                            " needs " + std::to_string(g));

  EstimationReport report;
  report.groups.resize(opts.groups);
  for (std::size_t g = 1; g <= opts.groups; ++g) {
    GroupResult &gr = report.groups[g - 1];
    gr.drivers = g;
    gr.abs_errors.assign(opts.repeats, 0.0);
    gr.amis.assign(opts.repeats, 0.0);
    gr.estimates.assign(opts.repeats, 0);
    std::vector<char> converged(opts.repeats, 1);
    parallel_for(opts.repeats, [&](std::size_t r) {
      std::mt19937_64 rng(derive_seed(opts.seed, {0xe57, g, r}));
      std::vector<std::string> picked = drivers;
      std::shuffle(picked.begin(), picked.end(), rng);
      picked.resize(g);
      std::vector<TripVector> set;
      std::vector<std::size_t> truth;
      for (std::size_t d = 0; d < g; ++d) {
        std::vector<std::size_t> idx = by_driver.at(picked[d]);
        if (opts.max_trips_per_driver && idx.size() > opts.max_trips_per_driver) {
          std::shuffle(idx.begin(), idx.end(), rng);
          idx.resize(opts.max_trips_per_driver);
          std::sort(idx.begin(), idx.end());
        }
        for (std::size_t i : idx) {
          set.push_back(pool[i]);
          truth.push_back(d);
        }
      }
      Estimate est = cluster(set);
      gr.estimates[r] = est.n_clusters;
      gr.abs_errors[r] = static_cast<double>(abs_error(g, est.n_clusters));
      gr.amis[r] = ami(truth, est.labels);
      converged[r] = est.converged;
    });
    gr.non_converged = static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0));
    gr.abs_error = mean_std(gr.abs_errors);
    gr.ami = mean_std(gr.amis);
    report.avg_abs_error += gr.abs_error.mean;
    report.avg_ami += gr.ami.mean;
  }
  if (opts.groups) {
    report.avg_abs_error /= static_cast<double>(opts.groups);
    report.avg_ami /= static_cast<double>(opts.groups);
  }
  return report;
}

inline EstimationReport run_estimation_benchmark(const ArnetModel &model, std::span<const FeatureMatrix> pool,
                                                 double preference, const EstimationOptions &opts,
                                                 const ApParams &ap = {}) {
  auto vecs = encode_trips(model, pool);
  return run_estimation_benchmark(vecs, ap_clusterer(preference, ap), opts);
}

struct PreferenceCurve {
  double best_preference = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_abs_error;  // averaged group mean abs error per grid point
  std::vector<double> mean_ami;
};

/// Scans the grid on a tuning pool; the least averaged abs error wins, ties go
/// to the preference of smaller magnitude.
inline PreferenceCurve tune_preference(std::span<const TripVector> tuning_pool, std::span<const double> grid,
                                       const EstimationOptions &opts, const ApParams &ap = {}) {
  if (grid.empty()) throw ValidationError("preference grid is empty");
  PreferenceCurve c;
  c.grid.assign(grid.begin(), grid.end());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto rep = run_estimation_benchmark(tuning_pool, ap_clusterer(grid[i], ap), opts);
    c.mean_abs_error.push_back(rep.avg_abs_error);
    c.mean_ami.push_back(rep.avg_ami);
    const double e = rep.avg_abs_error, eb = c.mean_abs_error[best];
    if (e < eb || (e == eb && std::abs(grid[i]) < std::abs(grid[best]))) best = i;
  }
  c.best_preference = grid[best];
  return c;
}

/// Evenly spaced preferences from `lo` to `hi` inclusive.
inline std::vector<double> preference_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g;
  if (points == 1) return {lo};
  for (std::size_t i = 0; i < points; ++i)
    g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  if (!g.empty()) g.back() = hi;
  return g;
}

// ---------------------------------------------------------------------------
// Driver identification

struct IdentificationReport {
  double segment_accuracy = 0.0;
  double trip_top1 = 0.0;
  double trip_top5 = 0.0;
  std::size_t segments = 0;
  std::size_t trips = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], trip top-1
  std::vector<std::string> labels;
};

/// Scores given per-segment class distributions (rows of `dists`, aligned
/// with `segments`) against the driver ids in the segment metadata.
inline IdentificationReport identification_report(const Mat &dists, std::span<const FeatureMatrix> segments,
                                                  const std::vector<std::string> &label_map) {
  if (static_cast<std::size_t>(dists.rows()) != segments.size())
    throw ShapeError("one distribution per segment required");
  std::map<std::string, int> class_of;
  for (std::size_t i = 0; i < label_map.size(); ++i) class_of[label_map[i]] = static_cast<int>(i);
  std::vector<int> truth;
  for (const auto &s : segments) {
    auto it = class_of.find(s.meta.driver_id);
    if (it == class_of.end())
      throw ValidationError("trip " + s.meta.trip_id + " belongs to unknown driver " + s.meta.driver_id);
    truth.push_back(it->second);
  }
  IdentificationReport rep;
  rep.labels = label_map;
  rep.segments = segments.size();
  rep.confusion.assign(label_map.size(), std::vector<std::size_t>(label_map.size(), 0));
  if (segments.empty()) return rep;
  std::size_t seg_hits = 0;
  for (Eigen::Index i = 0; i < dists.rows(); ++i) {
    Eigen::Index arg = 0;
    dists.row(i).maxCoeff(&arg);
    if (arg == truth[static_cast<std::size_t>(i)]) ++seg_hits;
  }
  std::size_t top1 = 0, top5 = 0;
  const auto groups = group_by_trip(segments);
  for (const auto &g : groups) {
    Mat rows(static_cast<Eigen::Index>(g.segments.size()), dists.cols());
    for (std::size_t i = 0; i < g.segments.size(); ++i)
      rows.row(static_cast<Eigen::Index>(i)) = dists.row(static_cast<Eigen::Index>(g.segments[i]));
    TripPrediction p = vote(rows);
    const int y = truth[g.segments.front()];
    if (p.top1 == y) ++top1;
    const std::size_t k = std::min<std::size_t>(5, p.ranking.size());
    if (std::find(p.ranking.begin(), p.ranking.begin() + static_cast<std::ptrdiff_t>(k), y) !=
        p.ranking.begin() + static_cast<std::ptrdiff_t>(k))
      ++top5;
    ++rep.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p.top1)];
  }
  rep.trips = groups.size();
  rep.segment_accuracy = static_cast<double>(seg_hits) / static_cast<double>(segments.size());
  rep.trip_top1 = static_cast<double>(top1) / static_cast<double>(groups.size());
  rep.trip_top5 = static_cast<double>(top5) / static_cast<double>(groups.size());
  return rep;
}

inline IdentificationReport run_identification_benchmark(const ArnetModel &model,
                                                         std::span<const FeatureMatrix> test_segments) {
  require_classifier(model);
  return identification_report(predict_segments(model, test_segments), test_segments, model.labels);
}

// ---------------------------------------------------------------------------
// Report text

inline std::string pm(const MeanStd &m) { return text::format_sig(m.mean, 4) + " ± " + text::format_sig(m.std, 4); }

inline std::string join_values(std::span<const double> xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += text::format_sig(xs[i], 9);
  }
  return s;
}

inline void write_estimation_report(std::ostream &out, const EstimationReport &rep, const std::string &title) {
  out << "# " << title << '\n';
  out << "drivers\tabs_error\tami\n";
  for (const auto &g : rep.groups) out << g.drivers << '\t' << pm(g.abs_error) << '\t' << pm(g.ami) << '\n';
  out << "avg\t" << text::format_sig(rep.avg_abs_error, 4) << '\t' << text::format_sig(rep.avg_ami, 4) << "\n\n";
  out << "[values]\n";
  for (const auto &g : rep.groups) {
    const std::string k = "group." + std::to_string(g.drivers) + ".";
    out << k << "abs_error.mean=" << text::format_sig(g.abs_error.mean, 9) << '\n';
    out << k << "abs_error.std=" << text::format_sig(g.abs_error.std, 9) << '\n';
    out << k << "ami.mean=" << text::format_sig(g.ami.mean, 9) << '\n';
    out << k << "ami.std=" << text::format_sig(g.ami.std, 9) << '\n';
    out << k << "non_converged=" << g.non_converged << '\n';
    out << k << "abs_error.runs=" << join_values(g.abs_errors) << '\n';
    out << k << "ami.runs=" << join_values(g.amis) << '\n';
  }
  out << "avg.abs_error=" << text::format_sig(rep.avg_abs_error, 9) << '\n';
  out << "avg.ami=" << text::format_sig(rep.avg_ami, 9) << '\n';
}

inline void write_identification_report(std::ostream &out, const IdentificationReport &rep,
                                         const std::string &title) {
  auto pct = [](double v) { return text::format_sig(100.0 * v, 4); };
  out << "# " << title << '\n';
  out << "segment\ttrip top-1\ttrip top-5\n";
  out << pct(rep.segment_accuracy) << '\t' << pct(rep.trip_top1) << '\t' << pct(rep.trip_top5) << "\n\n";
  out << "[values]\n";
  out << "segment_accuracy=" << text::format_sig(rep.segment_accuracy, 9) << '\n';
  out << "trip_top1=" << text::format_sig(rep.trip_top1, 9) << '\n';
  out << "trip_top5=" << text::format_sig(rep.trip_top5, 9) << '\n';
  out << "segments=" << rep.segments << '\n';
  out << "trips=" << rep.trips << '\n';
  for (std::size_t i = 0; i < rep.confusion.size(); ++i) {
    out << "confusion." << rep.labels[i] << '=';
    for (std::size_t j = 0; j < rep.confusion[i].size(); ++j) out << (j ? "," : "") << rep.confusion[i][j];
    out << '\n';
  }
}

inline void write_preference_curve(std::ostream &out, const PreferenceCurve &c) {
  out << "preference,mean_abs_error,mean_ami\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    out << text::format_sig(c.grid[i], 9) << ',' << text::format_sig(c.mean_abs_error[i], 9) << ','
        << text::format_sig(c.mean_ami[i], 9) << '\n';
  out << "best=" << text::format_sig(c.best_preference, 9) << '\n';
}

}  // namespace stylemetry

#endif  // STYLEMETRY_EXPERIMENTS_HPP
