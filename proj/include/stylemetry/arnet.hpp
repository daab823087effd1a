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

#ifndef STYLEMETRY_ARNET_HPP
#define STYLEMETRY_ARNET_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stylemetry/error.hpp"
#include "stylemetry/featurize.hpp"
#include "stylemetry/nn/adadelta.hpp"
#include "stylemetry/nn/layers.hpp"
#include "stylemetry/nn/loss.hpp"
#include "stylemetry/nn/tensor.hpp"
#include "stylemetry/parallel.hpp"
#include "stylemetry/text.hpp"

namespace stylemetry {

using nn::Mat;

/// Which losses drive training: both (arnet), reconstruction only (ronet) or
/// classification only (conet).
enum class NetMode { arnet, ronet, conet };

inline std::string to_string(NetMode m) {
  switch (m) {
    case NetMode::ronet:
      return "ronet";
    case NetMode::conet:
      return "conet";
    case NetMode::arnet:
    default:
      return "arnet";
  }
}

inline NetMode parse_net_mode(std::string_view s) {
  if (s == "arnet") return NetMode::arnet;
  if (s == "ronet") return NetMode::ronet;
  if (s == "conet") return NetMode::conet;
  throw ValidationError("unknown mode '" + std::string(s) + "' (expected arnet|ronet|conet)");
}

struct ArnetConfig {
  std::size_t gru1_units = 256;
  std::size_t gru2_units = 256;
  std::size_t bottleneck_units = 50;
  std::size_t n_classes = 1;
  double dropout_p = 0.5;
  double lambda = 1e-5;
  NetMode mode = NetMode::arnet;
  std::size_t batch_size = 2560;
  double lr = 1.0;
  double rho = 0.95;
  double eps = 1e-8;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  std::size_t patience = 10;

  /// Small preset that trains in minutes on one core. A desk run makes a few
  /// hundred optimizer steps, so the ADADELTA step multiplier is raised.
  static ArnetConfig desk() {
    ArnetConfig c;
    c.gru1_units = 32;
    c.gru2_units = 32;
    c.bottleneck_units = 16;
    c.batch_size = 256;
    c.max_epochs = 50;
    c.lr = 10.0;
    return c;
  }

  void validate() const {
    if (gru1_units == 0 || gru2_units == 0 || bottleneck_units == 0 || n_classes == 0)
      throw ValidationError("layer sizes and class count must be positive");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ValidationError("dropout_p must be in [0, 1)");
    if (lr < 0.0 || !(rho >= 0.0 && rho < 1.0) || eps <= 0.0)
      throw ValidationError("invalid ADADELTA settings");
  }

  std::map<std::string, std::string> to_map() const {
    using text::format_double;
    return {{"batch_size", std::to_string(batch_size)},
            {"bottleneck_units", std::to_string(bottleneck_units)},
            {"dropout_p", format_double(dropout_p)},
            {"eps", format_double(eps)},
            {"gru1_units", std::to_string(gru1_units)},
            {"gru2_units", std::to_string(gru2_units)},
            {"lambda", format_double(lambda)},
            {"lr", format_double(lr)},
            {"max_epochs", std::to_string(max_epochs)},
            {"mode", to_string(mode)},
            {"n_classes", std::to_string(n_classes)},
            {"patience", std::to_string(patience)},
            {"rho", format_double(rho)},
            {"seed", std::to_string(seed)}};
  }

  /// Applies one key=value setting; unknown keys and bad values throw.
  void set(std::string_view key, std::string_view value) {
    auto need_uint = [&](std::size_t &dst) {
      auto v = text::parse_int(value);
      if (!v || *v < 0) throw ValidationError("bad value for " + std::string(key) + ": " + std::string(value));
      dst = static_cast<std::size_t>(*v);
    };
    auto need_double = [&](double &dst) {
      auto v = text::parse_double(value);
      if (!v) throw ValidationError("bad value for " + std::string(key) + ": " + std::string(value));
      dst = *v;
    };
    if (key == "batch_size") need_uint(batch_size);
    else if (key == "bottleneck_units") need_uint(bottleneck_units);
    else if (key == "dropout_p") need_double(dropout_p);
    else if (key == "eps") need_double(eps);
    else if (key == "gru1_units") need_uint(gru1_units);
    else if (key == "gru2_units") need_uint(gru2_units);
    else if (key == "lambda") need_double(lambda);
    else if (key == "lr") need_double(lr);
    else if (key == "max_epochs") need_uint(max_epochs);
    else if (key == "mode") mode = parse_net_mode(value);
    else if (key == "n_classes") need_uint(n_classes);
    else if (key == "patience") need_uint(patience);
    else if (key == "rho") need_double(rho);
    else if (key == "seed") {
      std::size_t s = 0;
      need_uint(s);
      seed = s;
    } else {
      throw ValidationError("unknown config key '" + std::string(key) + "'");
    }
  }
};

/// gru1 -> gru2 -> dropout (x~) -> {fc1 (relu, code s) -> fc2 (tanh, x^)}, fc3 (logits).
struct ArnetModel {
  ArnetConfig config;
  std::vector<std::string> labels;  // class index -> driver id
  // Per-row input standardization, fitted on the training set.
  nn::Tensor input_shift{{kFeatureRows}, 0.0};
  nn::Tensor input_scale{{kFeatureRows}, 1.0};
  nn::GruLayerParams gru1, gru2;
  nn::DenseLayerParams fc1, fc2, fc3;

  ArnetModel() = default;

  /// Zero-valued parameters with the extents implied by `cfg`.
  explicit ArnetModel(const ArnetConfig &cfg)
      : config(cfg),
        gru1("gru1", kFeatureRows, cfg.gru1_units),
        gru2("gru2", cfg.gru1_units, cfg.gru2_units),
        fc1("fc1", cfg.gru2_units, cfg.bottleneck_units),
        fc2("fc2", cfg.bottleneck_units, cfg.gru2_units),
        fc3("fc3", cfg.gru2_units, cfg.n_classes) {
    cfg.validate();
  }

  /// Every learnable tensor in checkpoint order.
  std::vector<nn::Param *> params() {
    std::vector<nn::Param *> out = gru1.params();
    for (auto *p : gru2.params()) out.push_back(p);
    for (auto *p : {&fc1.W, &fc1.b, &fc2.W, &fc2.b, &fc3.W, &fc3.b}) out.push_back(p);
    return out;
  }
  std::vector<const nn::Param *> params() const {
    std::vector<const nn::Param *> out;
    for (auto *p : const_cast<ArnetModel *>(this)->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto *p : params()) p->zero_grad();
  }
};

/// Glorot-uniform weights, zero biases, seeded from config.seed.
inline ArnetModel make_arnet(const ArnetConfig &cfg) {
  ArnetModel m(cfg);
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x1417}));
  for (auto *p : m.params()) {
    if (p->value.shape.size() == 2) nn::glorot_uniform(*p, rng);
  }
  return m;
}

/// Per-row mean/std over every column of every training matrix.
inline void fit_input_scaler(ArnetModel &model, std::span<const FeatureMatrix> data) {
  std::vector<double> sum(kFeatureRows, 0.0), sq(kFeatureRows, 0.0);
  double count = 0.0;
  for (const auto &m : data) {
    for (std::size_t r = 0; r < kFeatureRows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) sum[r] += m.at(r, c);
    count += static_cast<double>(m.cols);
  }
  if (count == 0.0) return;
  for (std::size_t r = 0; r < kFeatureRows; ++r) sum[r] /= count;
  for (const auto &m : data)
    for (std::size_t r = 0; r < kFeatureRows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) sq[r] += (m.at(r, c) - sum[r]) * (m.at(r, c) - sum[r]);
  for (std::size_t r = 0; r < kFeatureRows; ++r) {
    const double sd = std::sqrt(sq[r] / count);
    model.input_shift.data[r] = sum[r];
    model.input_scale.data[r] = sd > 1e-9 ? 1.0 / sd : 1.0;
  }
}

// ---------------------------------------------------------------------------
// Forward

/// Batch outputs, one sample per row.
struct ForwardResult {
  Mat x_tilde;  // shared hidden feature (dropout output)
  Mat s;        // bottleneck code
  Mat x_hat;    // reconstruction of x_tilde
  Mat logits;
};

struct ForwardCache {
  nn::GruSequenceCache gru1, gru2;
  Mat gru2_out;
  nn::DropoutResult drop;
};

/// Stacks a batch of 35 x T matrices into T step matrices of shape B x 35,
/// standardized with the model's input scaler.
inline nn::Sequence to_sequence(const ArnetModel &model, std::span<const FeatureMatrix *const> batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  const std::size_t steps = batch.front()->cols;
  if (steps == 0) throw ShapeError("feature matrix has no columns");
  nn::Sequence seq(steps, Mat(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kFeatureRows)));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FeatureMatrix &m = *batch[b];
    if (m.cols != steps || m.values.size() != kFeatureRows * steps)
      throw ShapeError("feature matrix " + m.meta.trip_id + " is 35x" + std::to_string(m.cols) +
                       ", batch expects 35x" + std::to_string(steps));
    for (std::size_t r = 0; r < kFeatureRows; ++r) {
      const double shift = model.input_shift.data[r], scale = model.input_scale.data[r];
      for (std::size_t t = 0; t < steps; ++t)
        seq[t](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(r)) = (m.at(r, t) - shift) * scale;
    }
  }
  return seq;
}

template <typename Rng>
ForwardResult forward(const ArnetModel &model, std::span<const FeatureMatrix *const> batch,
                      nn::Mode mode, Rng &rng, ForwardCache *cache = nullptr) {
  nn::Sequence xs = to_sequence(model, batch);
  ForwardCache local;
  ForwardCache &k = cache ? *cache : local;
  nn::Sequence h1 = nn::gru_sequence(xs, model.gru1, cache ? &k.gru1 : nullptr);
  nn::Sequence h2 = nn::gru_sequence(h1, model.gru2, cache ? &k.gru2 : nullptr);
  k.gru2_out = std::move(h2.back());
  k.drop = nn::dropout(k.gru2_out, model.config.dropout_p, mode, rng);
  ForwardResult out;
  out.x_tilde = k.drop.y;
  out.s = nn::dense_forward(out.x_tilde, model.fc1, nn::Activation::relu);
  out.x_hat = nn::dense_forward(out.s, model.fc2, nn::Activation::tanh);
  out.logits = nn::dense_forward(out.x_tilde, model.fc3, nn::Activation::identity);
  return out;
}

inline ForwardResult forward(const ArnetModel &model, const FeatureMatrix &x) {
  std::mt19937_64 unused(0);
  const FeatureMatrix *one[] = {&x};
  return forward(model, std::span<const FeatureMatrix *const>(one), nn::Mode::infer, unused);
}

// ---------------------------------------------------------------------------
// Loss

struct LossOptions {
  // Drops the reconstruction term from J and from every gradient.
  bool detach_reconstruction = false;
};

struct LossValue {
  double J = 0.0;
  double J_r = 0.0;
  double J_c = 0.0;
};

/// Gradients of J with respect to the forward outputs.
struct OutputGrads {
  bool use_reconstruction = false;
  bool use_classification = false;
  Mat d_x_hat, d_s, d_x_tilde_target, d_logits;
};

/// J = J_r + J_c with mode gating. J_r is the per-sample mean of
/// |x^ - x~|^2 + lambda |s|_1, J_c the mean cross-entropy.
inline LossValue arnet_loss(const ForwardResult &res, std::span<const int> labels,
                            const ArnetConfig &cfg, OutputGrads *grads = nullptr,
                            LossOptions opts = {}) {
  LossValue v;
  const bool use_r = cfg.mode != NetMode::conet;
  const bool use_c = cfg.mode != NetMode::ronet;
  if (use_c && labels.size() != static_cast<std::size_t>(res.logits.rows()))
    throw ValidationError("classification loss needs one label per sample");
  if (grads) {
    grads->use_reconstruction = use_r && !opts.detach_reconstruction;
    grads->use_classification = use_c;
  }
  if (use_r) {
    auto rec = nn::mse_l1(res.x_hat, res.x_tilde, res.s, cfg.lambda);
    v.J_r = rec.loss;
    if (!opts.detach_reconstruction) {
      v.J += rec.loss;
      if (grads) {
        grads->d_x_hat = std::move(rec.grad_recon);
        grads->d_s = std::move(rec.grad_code);
        grads->d_x_tilde_target = std::move(rec.grad_target);
      }
    }
  }
  if (use_c) {
    auto xent = nn::softmax_xent(res.logits, labels);
    v.J_c = xent.loss;
    v.J += xent.loss;
    if (grads) grads->d_logits = std::move(xent.grad);
  }
  return v;
}

/// Accumulates parameter gradients of J into `model` given the forward cache.
inline void arnet_backward(ArnetModel &model, const ForwardCache &cache, const ForwardResult &res,
                           const OutputGrads &g) {
  Mat d_xt = Mat::Zero(res.x_tilde.rows(), res.x_tilde.cols());
  if (g.use_classification) {
    d_xt += nn::dense_backward(res.x_tilde, res.logits, g.d_logits, model.fc3, nn::Activation::identity);
  }
  if (g.use_reconstruction) {
    Mat ds = nn::dense_backward(res.s, res.x_hat, g.d_x_hat, model.fc2, nn::Activation::tanh);
    ds += g.d_s;
    d_xt += nn::dense_backward(res.x_tilde, res.s, ds, model.fc1, nn::Activation::relu);
    d_xt += g.d_x_tilde_target;
  }
  Mat d_h2 = nn::dropout_backward(cache.drop, d_xt);
  nn::Sequence d_h1 = nn::gru_final_backward(cache.gru2, d_h2, model.gru2);
  nn::gru_sequence_backward(cache.gru1, d_h1, model.gru1);
}

// ---------------------------------------------------------------------------
// Inference

inline constexpr std::size_t kInferenceChunk = 64;

namespace detail {
template <typename Fn>
Mat map_chunks(const ArnetModel &model, std::span<const FeatureMatrix> xs, Eigen::Index width, Fn fn) {
  Mat out(static_cast<Eigen::Index>(xs.size()), width);
  const std::size_t chunks = (xs.size() + kInferenceChunk - 1) / kInferenceChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kInferenceChunk, hi = std::min(xs.size(), lo + kInferenceChunk);
    std::vector<const FeatureMatrix *> ptrs;
    for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&xs[i]);
    std::mt19937_64 unused(0);
    ForwardResult r = forward(model, std::span<const FeatureMatrix *const>(ptrs), nn::Mode::infer, unused);
    out.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) = fn(r);
  });
  return out;
}
}  // namespace detail

/// Bottleneck codes s (inference mode), one row per segment.
inline Mat encode_segments(const ArnetModel &model, std::span<const FeatureMatrix> xs) {
  return detail::map_chunks(model, xs, static_cast<Eigen::Index>(model.config.bottleneck_units),
                            [](const ForwardResult &r) { return r.s; });
}

inline std::vector<double> encode_segment(const ArnetModel &model, const FeatureMatrix &x) {
  Mat s = forward(model, x).s;
  return {s.data(), s.data() + s.size()};
}

/// Segment-level style feature used for clustering: the code s for arnet and
/// ronet models, the shared feature x~ for conet models (whose autoencoder
/// is never trained).
inline Mat style_features(const ArnetModel &model, std::span<const FeatureMatrix> xs) {
  if (model.config.mode == NetMode::conet)
    return detail::map_chunks(model, xs, static_cast<Eigen::Index>(model.config.gru2_units),
                              [](const ForwardResult &r) { return r.x_tilde; });
  return encode_segments(model, xs);
}

inline void require_classifier(const ArnetModel &model) {
  if (model.config.mode == NetMode::ronet)
    throw ValidationError("model has no classifier head (trained in ronet mode)");
}

/// Softmax class distributions, one row per segment.
inline Mat predict_segments(const ArnetModel &model, std::span<const FeatureMatrix> xs) {
  require_classifier(model);
  return detail::map_chunks(model, xs, static_cast<Eigen::Index>(model.config.n_classes),
                            [](const ForwardResult &r) { return nn::softmax(r.logits); });
}

inline std::vector<double> predict_segment(const ArnetModel &model, const FeatureMatrix &x) {
  require_classifier(model);
  Mat p = nn::softmax(forward(model, x).logits);
  return {p.data(), p.data() + p.size()};
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  std::size_t epoch = 0;
  double J_r = 0.0;  // training means over the epoch
  double J_c = 0.0;
  double J = 0.0;
  double val_accuracy = 0.0;        // arnet / conet
  double val_reconstruction = 0.0;  // infer-mode J_r on the validation set
  double seconds = 0.0;

  bool same_values(const EpochRecord &o) const {
    return epoch == o.epoch && J_r == o.J_r && J_c == o.J_c && J == o.J &&
           val_accuracy == o.val_accuracy && val_reconstruction == o.val_reconstruction;
  }
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;

  bool same_values(const TrainHistory &o) const {
    if (best_epoch != o.best_epoch || epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i)
      if (!epochs[i].same_values(o.epochs[i])) return false;
    return true;
  }
};

struct TrainResult {
  ArnetModel model;
  TrainHistory history;
};

struct Dataset {
  std::span<const FeatureMatrix> x;
  std::span<const int> y;  // may be empty in ronet mode
};

// Samples per gradient chunk. Chunk gradients are summed in chunk order, so
// results do not depend on the worker count.
inline constexpr std::size_t kTrainChunk = 32;

inline double segment_accuracy(const ArnetModel &model, const Dataset &data) {
  if (data.x.empty()) return 0.0;
  Mat p = predict_segments(model, data.x);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg = 0;
    p.row(i).maxCoeff(&arg);
    if (arg == data.y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(p.rows());
}

/// Inference-mode J_r averaged over `data` (the ronet validation metric).
inline double reconstruction_loss(const ArnetModel &model, std::span<const FeatureMatrix> xs) {
  if (xs.empty()) return 0.0;
  const std::size_t chunks = (xs.size() + kInferenceChunk - 1) / kInferenceChunk;
  std::vector<double> sums(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kInferenceChunk, hi = std::min(xs.size(), lo + kInferenceChunk);
    std::vector<const FeatureMatrix *> ptrs;
    for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&xs[i]);
    std::mt19937_64 unused(0);
    ForwardResult r = forward(model, std::span<const FeatureMatrix *const>(ptrs), nn::Mode::infer, unused);
    sums[c] = nn::mse_l1(r.x_hat, r.x_tilde, r.s, model.config.lambda).loss * static_cast<double>(hi - lo);
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(xs.size());
}

namespace detail {
inline void check_dataset(const Dataset &d, const ArnetConfig &cfg, const char *what) {
  if (d.x.empty()) throw ValidationError(std::string(what) + " set is empty");
  const bool need_labels = cfg.mode != NetMode::ronet;
  if (need_labels && d.y.size() != d.x.size())
    throw ValidationError(std::string(what) + " set needs one label per segment");
  for (int y : d.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= cfg.n_classes)
      throw ValidationError(std::string(what) + " label " + std::to_string(y) + " outside [0, " +
                            std::to_string(cfg.n_classes) + ")");
  }
}
}  // namespace detail

struct TrainCallbacks {
  std::function<void(const EpochRecord &)> on_epoch;
};

/// Mini-batch ADADELTA training with early stopping on the validation metric
/// (segment accuracy, or reconstruction loss in ronet mode). Returns the
/// snapshot taken at the best validation epoch.
inline TrainResult train(ArnetModel model, const Dataset &train_set, const Dataset &val_set,
                         const TrainCallbacks &callbacks = {}) {
  using clock = std::chrono::steady_clock;
  const ArnetConfig &cfg = model.config;
  cfg.validate();
  detail::check_dataset(train_set, cfg, "training");
  detail::check_dataset(val_set, cfg, "validation");
  const bool classify = cfg.mode != NetMode::ronet;
  const std::size_t n = train_set.x.size();

  TrainResult best{model, {}};
  double best_metric = classify ? -1.0 : std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  double prev_jr = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t max_chunks_per_batch = (cfg.batch_size + kTrainChunk - 1) / kTrainChunk;
  std::vector<ArnetModel> replicas(std::min(max_chunks_per_batch, max_threads()), model);
  std::vector<LossValue> chunk_loss(max_chunks_per_batch);
  auto params = model.params();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = clock::now();
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {0x5eed, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double sum_jr = 0.0, sum_jc = 0.0, sum_j = 0.0;
    for (std::size_t batch_lo = 0, batch_idx = 0; batch_lo < n; batch_lo += cfg.batch_size, ++batch_idx) {
      const std::size_t batch_hi = std::min(n, batch_lo + cfg.batch_size);
      const std::size_t bsize = batch_hi - batch_lo;
      const std::size_t chunks = (bsize + kTrainChunk - 1) / kTrainChunk;
      // Waves of at most replicas.size() chunks, folded into the master grads
      // in chunk order.
      for (std::size_t wave = 0; wave < chunks; wave += replicas.size()) {
        const std::size_t wave_n = std::min(replicas.size(), chunks - wave);
        parallel_for(wave_n, [&](std::size_t w) {
          const std::size_t c = wave + w;
          ArnetModel &rep = replicas[w];
          auto rep_params = rep.params();
          for (std::size_t i = 0; i < params.size(); ++i) {
            rep_params[i]->value.data = params[i]->value.data;
            rep_params[i]->zero_grad();
          }
          const std::size_t lo = batch_lo + c * kTrainChunk;
          const std::size_t hi = std::min(batch_hi, lo + kTrainChunk);
          std::vector<const FeatureMatrix *> xs;
          std::vector<int> ys;
          for (std::size_t i = lo; i < hi; ++i) {
            xs.push_back(&train_set.x[order[i]]);
            if (classify) ys.push_back(train_set.y[order[i]]);
          }
          std::mt19937_64 drop_rng(derive_seed(cfg.seed, {0xd20, epoch, batch_idx, c}));
          ForwardCache cache;
          ForwardResult res = forward(rep, std::span<const FeatureMatrix *const>(xs), nn::Mode::train, drop_rng, &cache);
          OutputGrads g;
          chunk_loss[c] = arnet_loss(res, ys, rep.config, &g);
          arnet_backward(rep, cache, res, g);
          const double weight = static_cast<double>(hi - lo) / static_cast<double>(bsize);
          for (auto *p : rep_params)
            for (auto &v : p->grad.data) v *= weight;
        });
        for (std::size_t w = 0; w < wave_n; ++w) {
          auto rep_params = replicas[w].params();
          for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad.row() += rep_params[i]->grad.row();
        }
      }
      for (std::size_t c = 0; c < chunks; ++c) {
        const double m = static_cast<double>(std::min(kTrainChunk, bsize - c * kTrainChunk));
        sum_jr += chunk_loss[c].J_r * m;
        sum_jc += chunk_loss[c].J_c * m;
        sum_j += chunk_loss[c].J * m;
      }
      for (auto *p : params) nn::adadelta_step(*p, cfg.rho, cfg.eps, cfg.lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.J_r = sum_jr / static_cast<double>(n);
    rec.J_c = sum_jc / static_cast<double>(n);
    rec.J = sum_j / static_cast<double>(n);
    double metric = 0.0;
    bool improved = false;
    if (classify) {
      rec.val_accuracy = segment_accuracy(model, val_set);
      metric = rec.val_accuracy;
      improved = metric > best_metric;
    } else {
      rec.val_reconstruction = reconstruction_loss(model, val_set.x);
      metric = rec.val_reconstruction;
      improved = metric < best_metric;
    }
    rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    best.history.epochs.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);

    if (improved) {
      best_metric = metric;
      best.history.best_epoch = epoch;
      best.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
    if (!classify) {
      const bool flat = !std::isnan(prev_jr) && std::abs(rec.J_r - prev_jr) < 1e-4;
      if (flat || rec.J_r <= 1e-3) break;
      prev_jr = rec.J_r;
    }
  }
  if (best.history.best_epoch == 0) best.model = model;
  // Optimizer state is not part of the returned snapshot's contract; grads are clean.
  best.model.zero_grad();
  return best;
}

}  // namespace stylemetry

#endif  // STYLEMETRY_ARNET_HPP
