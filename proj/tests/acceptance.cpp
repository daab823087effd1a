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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Optional arguments restrict the run to the listed criterion numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stylemetry/stylemetry.hpp"

namespace sm = stylemetry;
using sm::nn::Mat;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) { return sm::text::format_sig(v, digits); }

// ---------------------------------------------------------------------------
// 1. Gradient suite

double check_dense(sm::nn::Activation act, std::mt19937_64 &rng) {
  sm::nn::DenseLayerParams p("fc", 5, 4);
  std::normal_distribution<double> g(0.0, 0.5);
  for (auto *q : {&p.W, &p.b})
    for (auto &v : q->value.data) v = g(rng);
  Mat x(3, 5), w(3, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  auto loss = [&](bool grads) {
    Mat y = sm::nn::dense_forward(x, p, act);
    if (grads) sm::nn::dense_backward(x, y, w, p, act);
    return (y.array() * w.array()).sum();
  };
  sm::nn::Param *params[] = {&p.W, &p.b};
  return sm::nn::gradient_check(loss, params).max_rel_error;
}

double check_gru(std::mt19937_64 &rng) {
  sm::nn::GruLayerParams p("g", 4, 3);
  std::normal_distribution<double> g(0.0, 0.6);
  for (auto *q : p.params())
    for (auto &v : q->value.data) v = g(rng);
  sm::nn::Sequence xs, ws;
  for (int t = 0; t < 4; ++t) {
    Mat x(2, 4), w(2, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
    xs.push_back(x);
    ws.push_back(w);
  }
  auto loss = [&](bool grads) {
    sm::nn::GruSequenceCache cache;
    auto hs = sm::nn::gru_sequence(xs, p, &cache);
    double l = 0.0;
    for (std::size_t t = 0; t < hs.size(); ++t) l += (hs[t].array() * ws[t].array()).sum();
    if (grads) sm::nn::gru_sequence_backward(cache, ws, p);
    return l;
  };
  auto params = p.params();
  return sm::nn::gradient_check(loss, params).max_rel_error;
}

double check_dropout(std::mt19937_64 &rng) {
  sm::nn::Param x("x", {3, 6});
  std::normal_distribution<double> g;
  for (auto &v : x.value.data) v = g(rng);
  Mat w(3, 6);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  auto loss = [&](bool grads) {
    std::mt19937_64 mask_rng(5);  // same mask on every evaluation
    auto d = sm::nn::dropout(x.value.mat(), 0.4, sm::nn::Mode::train, mask_rng);
    if (grads) x.grad.mat() += sm::nn::dropout_backward(d, w);
    return (d.y.array() * w.array()).sum();
  };
  sm::nn::Param *params[] = {&x};
  return sm::nn::gradient_check(loss, params).max_rel_error;
}

double check_losses(std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  sm::nn::Param logits("logits", {3, 4}), recon("r", {3, 5}), target("t", {3, 5}), code("s", {3, 2});
  for (auto *p : {&logits, &recon, &target, &code})
    for (auto &v : p->value.data) v = g(rng);
  std::vector<int> y{3, 0, 1};
  auto loss = [&](bool grads) {
    auto xe = sm::nn::softmax_xent(logits.value.mat(), y);
    auto rec = sm::nn::mse_l1(recon.value.mat(), target.value.mat(), code.value.mat(), 0.05);
    if (grads) {
      logits.grad.mat() += xe.grad;
      recon.grad.mat() += rec.grad_recon;
      target.grad.mat() += rec.grad_target;
      code.grad.mat() += rec.grad_code;
    }
    return xe.loss + rec.loss;
  };
  sm::nn::Param *params[] = {&logits, &recon, &target, &code};
  return sm::nn::gradient_check(loss, params).max_rel_error;
}

std::vector<sm::FeatureMatrix> random_matrices(std::size_t n, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<sm::FeatureMatrix> out;
  for (std::size_t i = 0; i < n; ++i) {
    sm::FeatureMatrix m(cols);
    for (auto &v : m.values) v = g(rng);
    out.push_back(std::move(m));
  }
  return out;
}

double check_tiny_arnet(sm::NetMode mode) {
  sm::ArnetConfig cfg;
  cfg.gru1_units = 4;
  cfg.gru2_units = 4;
  cfg.bottleneck_units = 3;
  cfg.n_classes = 2;
  cfg.dropout_p = 0.0;
  cfg.lambda = 1e-2;
  cfg.mode = mode;
  cfg.seed = 17;
  auto model = sm::make_arnet(cfg);
  auto xs = random_matrices(3, 6, 23);
  std::vector<const sm::FeatureMatrix *> ptrs;
  for (const auto &x : xs) ptrs.push_back(&x);
  std::vector<int> y{0, 1, 1};
  auto loss = [&](bool grads) {
    std::mt19937_64 rng(0);
    sm::ForwardCache cache;
    auto r = sm::forward(model, std::span<const sm::FeatureMatrix *const>(ptrs), sm::nn::Mode::train, rng, &cache);
    sm::OutputGrads g;
    auto v = sm::arnet_loss(r, y, cfg, &g);
    if (grads) sm::arnet_backward(model, cache, r, g);
    return v.J;
  };
  auto params = model.params();
  return sm::nn::gradient_check(loss, params).max_rel_error;
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::map<std::string, double> errs;
  errs["dense.identity"] = check_dense(sm::nn::Activation::identity, rng);
  errs["dense.relu"] = check_dense(sm::nn::Activation::relu, rng);
  errs["dense.tanh"] = check_dense(sm::nn::Activation::tanh, rng);
  errs["gru"] = check_gru(rng);
  errs["dropout"] = check_dropout(rng);
  errs["losses"] = check_losses(rng);
  errs["arnet"] = check_tiny_arnet(sm::NetMode::arnet);
  errs["ronet"] = check_tiny_arnet(sm::NetMode::ronet);
  errs["conet"] = check_tiny_arnet(sm::NetMode::conet);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto &[k, v] : errs)
    if (v >= worst) {
      worst = v;
      worst_name = k;
    }
  return {worst < 1e-4 && secs < 30.0,
          "max rel err " + fmt(worst, 3) + " (" + worst_name + "), " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Loss identities

Outcome criterion_loss_identities() {
  double worst_xent = 0.0;
  for (int c : {2, 7, 50}) {
    std::vector<int> y{c - 1};
    worst_xent = std::max(worst_xent, std::abs(sm::nn::softmax_xent(Mat::Zero(1, c), y).loss - std::log(c)));
  }
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double worst_rec = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Mat x(2, 6), s(2, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng) - 1.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
    const double lambda = 1e-5;
    const double expect = lambda * s.cwiseAbs().sum() / 2.0;  // per-sample mean
    worst_rec = std::max(worst_rec, std::abs(sm::nn::mse_l1(x, x, s, lambda).loss - expect));
  }

  sm::ArnetConfig cfg;
  cfg.gru1_units = 6;
  cfg.gru2_units = 5;
  cfg.bottleneck_units = 3;
  cfg.n_classes = 3;
  cfg.lambda = 0.0;
  cfg.dropout_p = 0.5;
  cfg.seed = 8;
  auto xs = random_matrices(4, 10, 3);
  std::vector<const sm::FeatureMatrix *> ptrs;
  for (const auto &x : xs) ptrs.push_back(&x);
  std::vector<int> y{0, 2, 1, 2};
  auto step = [&](sm::NetMode mode, bool detach) {
    sm::ArnetConfig c = cfg;
    c.mode = mode;
    auto m = sm::make_arnet(c);
    std::mt19937_64 drop(4);
    sm::ForwardCache cache;
    auto r = sm::forward(m, std::span<const sm::FeatureMatrix *const>(ptrs), sm::nn::Mode::train, drop, &cache);
    sm::OutputGrads g;
    auto v = sm::arnet_loss(r, y, c, &g, sm::LossOptions{detach});
    sm::arnet_backward(m, cache, r, g);
    std::vector<double> flat{v.J};
    for (auto *p : m.params()) flat.insert(flat.end(), p->grad.data.begin(), p->grad.data.end());
    return flat;
  };
  const bool same = step(sm::NetMode::arnet, true) == step(sm::NetMode::conet, false);
  return {worst_xent <= 1e-12 && worst_rec <= 1e-12 && same,
          "xent dev " + fmt(worst_xent, 3) + ", recon dev " + fmt(worst_rec, 3) +
              ", detached arnet == conet: " + (same ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 3. ADADELTA

Outcome criterion_adadelta() {
  sm::nn::Param p("w", {1});
  p.grad.data = {1.0};
  sm::nn::adadelta_step(p, 0.95, 1e-8, 1.0);
  const double dx = p.value.data[0];
  return {std::abs(dx - (-4.4721e-4)) <= 1e-8, "first update " + fmt(dx, 8)};
}

// ---------------------------------------------------------------------------
// 4. Featurizer contract

Outcome criterion_featurizer() {
  std::size_t mats = 0, bad_shape = 0;
  const std::size_t lengths[] = {256, 257, 383, 384, 600, 1000, 3001};
  for (std::size_t i = 0; i < std::size(lengths); ++i) {
    auto trips = sm::generate_synthetic(2, 1, lengths[i], 100 + i);
    for (const auto &m : sm::featurize_trips(trips)) {
      ++mats;
      if (m.rows() != 35 || m.cols != 128 || m.values.size() != 35 * 128) ++bad_shape;
    }
  }
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> coin(0, 3);
  std::size_t order_violations = 0;
  std::vector<double> window(5 * 4);
  for (int w = 0; w < 10000; ++w) {
    for (auto &v : window) v = coin(rng) == 0 ? 1.0 : g(rng) * std::pow(10.0, coin(rng) - 1);
    auto st = sm::frame_statistics(window, 4);
    for (std::size_t f = 0; f < 5; ++f) {
      const auto at = [&](sm::FrameStatistic s) { return st[7 * f + static_cast<std::size_t>(s)]; };
      using S = sm::FrameStatistic;
      if (!(at(S::kMin) <= at(S::kQ25) && at(S::kQ25) <= at(S::kQ50) && at(S::kQ50) <= at(S::kQ75) &&
            at(S::kQ75) <= at(S::kMax)))
        ++order_violations;
    }
  }
  return {mats > 0 && bad_shape == 0 && order_violations == 0,
          std::to_string(mats) + " matrices, " + std::to_string(bad_shape) + " not 35x128; " +
              std::to_string(order_violations) + " ordering violations in 10000 windows"};
}

// ---------------------------------------------------------------------------
// 5. AMI oracle

double brute_force_mi(const std::vector<int> &u, const std::vector<int> &v) {
  const double n = static_cast<double>(u.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> a, b;
  for (std::size_t i = 0; i < u.size(); ++i) {
    joint[{u[i], v[i]}] += 1;
    a[u[i]] += 1;
    b[v[i]] += 1;
  }
  double mi = 0.0;
  for (const auto &[k, c] : joint) mi += c / n * std::log(n * c / (a[k.first] * b[k.second]));
  return mi;
}

Outcome criterion_ami() {
  std::mt19937_64 rng(5);
  std::size_t not_one = 0;
  double asym = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<int> d(0, rep % 7);
    std::vector<int> u(25), v(25);
    for (auto &x : u) x = d(rng);
    for (auto &x : v) x = d(rng);
    if (sm::ami(u, u) != 1.0) ++not_one;
    asym = std::max(asym, std::abs(sm::ami(u, v) - sm::ami(v, u)));
  }
  const std::vector<int> u{0, 0, 1, 1}, v{0, 1, 0, 1};
  double emi = 0.0;
  std::vector<int> perm = v;
  std::sort(perm.begin(), perm.end());
  int count = 0;
  std::vector<std::size_t> idx(4);
  std::iota(idx.begin(), idx.end(), 0);
  do {
    std::vector<int> w(4);
    for (std::size_t i = 0; i < 4; ++i) w[i] = v[idx[i]];
    emi += brute_force_mi(u, w);
    ++count;
  } while (std::next_permutation(idx.begin(), idx.end()));
  emi /= count;
  const double expect = -emi / (std::log(2.0) - emi);
  const double got = sm::ami(u, v);
  const bool ok = not_one == 0 && asym <= 1e-12 && std::abs(got - expect) <= 1e-12 && got < 0.0;
  return {ok, std::to_string(not_one) + " self-AMI != 1, max asymmetry " + fmt(asym, 3) + ", cross example " +
                  fmt(got, 12) + " vs brute force " + fmt(expect, 12)};
}

// ---------------------------------------------------------------------------
// 6. AP oracle

Outcome criterion_ap() {
  std::size_t blob_fail = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.1);
    const double centers[3][2] = {{0, 0}, {5, 0}, {2.5, 5}};
    std::vector<std::vector<double>> pts;
    std::vector<int> truth;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 10; ++i) {
        pts.push_back({centers[c][0] + g(rng), centers[c][1] + g(rng)});
        truth.push_back(c);
      }
    auto s = sm::similarity(pts, 0.0);
    s.diagonal().setConstant(sm::median_similarity(s));
    auto r = sm::affinity_propagation(s, sm::ApParams{0.5, 200, 15});
    if (r.n_clusters != 3 || sm::ami(truth, r.labels) != 1.0) ++blob_fail;
  }
  std::size_t threshold_fail = 0;
  for (double d : {0.3, 1.0, 2.0, 7.0}) {
    std::vector<std::vector<double>> pts{{0.0, 0.0}, {d, 0.0}};
    const double cut = -d * d;
    if (sm::affinity_propagation(sm::similarity(pts, cut * 0.98)).n_clusters != 2) ++threshold_fail;
    if (sm::affinity_propagation(sm::similarity(pts, cut * 1.02)).n_clusters != 1) ++threshold_fail;
  }
  return {blob_fail == 0 && threshold_fail == 0, std::to_string(blob_fail) + "/10 blob runs wrong, " +
                                                     std::to_string(threshold_fail) + "/8 two-point threshold misses"};
}

// ---------------------------------------------------------------------------
// Shared synthetic study for 7-10

constexpr std::uint64_t kSeed = 2026;

struct Study {
  std::vector<sm::FeatureMatrix> train, val, test;  // seen drivers
  std::vector<sm::FeatureMatrix> tuning_pool, eval_pool;  // unseen drivers
  sm::EstimationOptions bench{5, 10, 0, kSeed};
};

Study make_study() {
  Study s;
  auto seen = sm::featurize_trips(sm::generate_synthetic(10, 40, 600, kSeed, 0));
  auto split = sm::split_by_trip(seen, 0.8, kSeed);
  s.test = std::move(split.test);
  auto inner = sm::split_by_trip(split.train, 0.875, kSeed + 1);
  s.train = std::move(inner.train);
  s.val = std::move(inner.test);
  s.eval_pool = sm::featurize_trips(sm::generate_synthetic(5, 10, 600, kSeed, 10));
  s.tuning_pool = sm::featurize_trips(sm::generate_synthetic(5, 10, 600, kSeed, 15));
  return s;
}

sm::ArnetConfig study_config(sm::NetMode mode, double lambda = 1e-5) {
  sm::ArnetConfig c = sm::ArnetConfig::desk();
  c.mode = mode;
  c.lambda = lambda;
  c.seed = kSeed;
  return c;
}

sm::TrainResult train_study(const Study &s, const sm::ArnetConfig &cfg) {
  const auto t0 = Clock::now();
  sm::TrainResult r;
  if (cfg.mode == sm::NetMode::ronet) {
    auto labels = sm::make_label_map(s.train);
    sm::ArnetConfig c = cfg;
    c.n_classes = labels.size();
    auto m = sm::make_arnet(c);
    m.labels = labels;
    sm::fit_input_scaler(m, s.train);
    r = sm::train(std::move(m), sm::Dataset{s.train, {}}, sm::Dataset{s.val, {}});
  } else {
    r = sm::fit_arnet(cfg, s.train, s.val);
  }
  std::cerr << "  trained " << sm::to_string(cfg.mode) << " lambda=" << cfg.lambda << ": "
            << r.history.epochs.size() << " epochs, best " << r.history.best_epoch << ", " << fmt(seconds_since(t0), 3)
            << " s\n";
  return r;
}

struct EstimationRun {
  double preference = 0.0;
  sm::EstimationReport report;
};

EstimationRun estimate(const Study &s, const sm::ArnetModel &model) {
  auto tuning = sm::encode_trips(model, s.tuning_pool);
  auto eval = sm::encode_trips(model, s.eval_pool);
  // Squared distances between normalized trip vectors are O(k); scan a wide log grid.
  std::vector<double> grid;
  for (int i = 0; i <= 32; ++i) grid.push_back(-std::pow(10.0, -3.0 + 0.125 * i));
  auto curve = sm::tune_preference(tuning, grid, s.bench);
  EstimationRun run{curve.best_preference, sm::run_estimation_benchmark(eval, sm::ap_clusterer(curve.best_preference),
                                                                        s.bench)};
  return run;
}

struct StudyResults {
  Study study;
  std::optional<sm::TrainResult> arnet, ronet, conet, arnet_dense;
  std::optional<EstimationRun> est_arnet, est_ronet, est_conet;
  double arnet_train_seconds = 0.0;
};

StudyResults &study() {
  static StudyResults r{make_study(), {}, {}, {}, {}, {}, {}, {}, 0.0};
  return r;
}

const sm::TrainResult &arnet_model() {
  auto &r = study();
  if (!r.arnet) {
    const auto t0 = Clock::now();
    r.arnet = train_study(r.study, study_config(sm::NetMode::arnet));
    r.arnet_train_seconds = seconds_since(t0);
  }
  return *r.arnet;
}

// ---------------------------------------------------------------------------
// 7. Identification

Outcome criterion_identification() {
  const auto t0 = Clock::now();
  auto &s = study();
  const auto &m = arnet_model();
  auto rep = sm::run_identification_benchmark(m.model, s.study.test);
  const double secs = seconds_since(t0);
  const bool ok = rep.segment_accuracy > 0.30 && rep.trip_top1 > rep.segment_accuracy && secs < 15 * 60;
  return {ok, "segment " + fmt(rep.segment_accuracy) + ", trip top-1 " + fmt(rep.trip_top1) + ", top-5 " +
                  fmt(rep.trip_top5) + " (" + std::to_string(rep.segments) + " segments, " +
                  std::to_string(rep.trips) + " trips), " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 8. Estimation

const EstimationRun &arnet_estimation() {
  auto &s = study();
  if (!s.est_arnet) s.est_arnet = estimate(s.study, arnet_model().model);
  return *s.est_arnet;
}

Outcome criterion_estimation() {
  const auto &e = arnet_estimation();
  std::string per;
  for (const auto &g : e.report.groups) per += " g" + std::to_string(g.drivers) + "=" + fmt(g.abs_error.mean, 3) + "/" + fmt(g.ami.mean, 3);
  return {e.report.avg_abs_error <= 1.0 && e.report.avg_ami >= 0.25,
          "mean abs error " + fmt(e.report.avg_abs_error) + ", mean AMI " + fmt(e.report.avg_ami) + ", preference " +
              fmt(e.preference) + ";" + per};
}

// ---------------------------------------------------------------------------
// 9. Ablation

Outcome criterion_ablation() {
  auto &s = study();
  const auto &a = arnet_estimation();
  if (!s.ronet) s.ronet = train_study(s.study, study_config(sm::NetMode::ronet));
  if (!s.conet) s.conet = train_study(s.study, study_config(sm::NetMode::conet));
  if (!s.est_ronet) s.est_ronet = estimate(s.study, s.ronet->model);
  if (!s.est_conet) s.est_conet = estimate(s.study, s.conet->model);
  const auto &r = s.est_ronet->report, &c = s.est_conet->report;
  const bool ok = a.report.avg_ami >= r.avg_ami && a.report.avg_abs_error <= c.avg_abs_error + 0.5;
  return {ok, "AMI arnet " + fmt(a.report.avg_ami) + " vs ronet " + fmt(r.avg_ami) + "; abs error arnet " +
                  fmt(a.report.avg_abs_error) + " vs conet " + fmt(c.avg_abs_error) + " (conet AMI " +
                  fmt(c.avg_ami) + ", ronet abs error " + fmt(r.avg_abs_error) + ")"};
}

// ---------------------------------------------------------------------------
// 10. Sparsity

double zero_fraction(const sm::ArnetModel &m, std::span<const sm::FeatureMatrix> xs) {
  Mat s = sm::encode_segments(m, xs);
  return static_cast<double>((s.array().abs() < 1e-8).count()) / static_cast<double>(s.size());
}

Outcome criterion_sparsity() {
  auto &s = study();
  const auto &sparse = arnet_model();
  if (!s.arnet_dense) s.arnet_dense = train_study(s.study, study_config(sm::NetMode::arnet, 0.0));
  std::vector<sm::FeatureMatrix> eval = s.study.test;
  eval.insert(eval.end(), s.study.eval_pool.begin(), s.study.eval_pool.end());
  const double zs = zero_fraction(sparse.model, eval), zd = zero_fraction(s.arnet_dense->model, eval);
  return {zs > zd, "zero fraction lambda=1e-5: " + fmt(zs) + ", lambda=0: " + fmt(zd)};
}

// ---------------------------------------------------------------------------
// 11. Determinism and serialization

std::string pipeline_fingerprint() {
  auto trips = sm::generate_synthetic(3, 4, 700, 77);
  std::ostringstream csv;
  sm::write_trips(csv, trips);
  std::istringstream back(csv.str());
  auto feats = sm::featurize_trips(sm::parse_trips(back));
  std::ostringstream ftxt;
  sm::write_feature_matrices(ftxt, feats);
  sm::ArnetConfig cfg = sm::ArnetConfig::desk();
  cfg.gru1_units = 12;
  cfg.gru2_units = 10;
  cfg.bottleneck_units = 6;
  cfg.batch_size = 40;
  cfg.max_epochs = 3;
  cfg.seed = 77;
  auto split = sm::split_by_trip(feats, 0.75, 77);
  auto res = sm::fit_arnet(cfg, split.train, split.test);
  auto vecs = sm::encode_trips(res.model, feats);
  std::ostringstream out;
  out << csv.str() << ftxt.str() << sm::serialize_model(res.model);
  sm::write_trip_vectors(out, vecs);
  auto rep = sm::run_estimation_benchmark(vecs, sm::ap_clusterer(-0.5), sm::EstimationOptions{3, 4, 0, 77});
  sm::write_estimation_report(out, rep, "fingerprint");
  for (const auto &e : res.history.epochs) out << e.J << ' ' << e.val_accuracy << '\n';
  return out.str();
}

Outcome criterion_determinism() {
  const std::string a = pipeline_fingerprint();
  sm::set_max_threads(2);
  const std::string b = pipeline_fingerprint();
  sm::set_max_threads(0);
  const bool same_runs = a == b;

  const auto &m = arnet_model().model;
  const std::string bytes = sm::serialize_model(m);
  const sm::ArnetModel loaded = sm::deserialize_model(bytes);
  const bool same_ckpt = sm::serialize_model(loaded) == bytes;
  double worst = 0.0;
  const auto &test = study().study.test;
  for (std::size_t i = 0; i < std::min<std::size_t>(test.size(), 200); ++i) {
    Mat x = sm::forward(m, test[i]).logits, y = sm::forward(loaded, test[i]).logits;
    // Relative to the sample's largest logit.
    worst = std::max(worst, (x - y).cwiseAbs().maxCoeff() / std::max(x.cwiseAbs().maxCoeff(), 1e-12));
  }
  return {same_runs && same_ckpt && worst <= 1e-5,
          std::string("pipeline rerun identical: ") + (same_runs ? "yes" : "no") +
              ", checkpoint save-load-save identical: " + (same_ckpt ? "yes" : "no") +
              ", max logit rel diff " + fmt(worst, 3)};
}

}  // namespace

int main(int argc, char **argv) {
  struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "gradient suite", criterion_gradients},
      {2, "loss identities", criterion_loss_identities},
      {3, "ADADELTA first step", criterion_adadelta},
      {4, "featurizer contract", criterion_featurizer},
      {5, "AMI oracle", criterion_ami},
      {6, "affinity propagation oracle", criterion_ap},
      {7, "synthetic identification", criterion_identification},
      {8, "synthetic estimation", criterion_estimation},
      {9, "ablation direction", criterion_ablation},
      {10, "code sparsity", criterion_sparsity},
      {11, "determinism and serialization", criterion_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto &c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d failed\n", failed);
  return failed ? 1 : 0;
}
