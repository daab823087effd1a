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

// Command-line driver for the stylemetry pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stylemetry/stylemetry.hpp"

namespace sm = stylemetry;

namespace {

// Config file: `key = value` lines, `#` comments. Keys are long flag names
// with or without the leading dashes; `_` and `-` are interchangeable.
struct ConfigFile {
  std::string path;
  std::map<std::string, std::string> values;
};

std::string normalize_key(std::string key) {
  while (!key.empty() && key.front() == '-') key.erase(key.begin());
  for (auto &c : key)
    if (c == '_') c = '-';
  return key;
}

ConfigFile read_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw sm::IoError("cannot open config file " + path);
  ConfigFile cfg{path, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    auto row = sm::text::trim(std::string_view(line).substr(0, hash));
    if (row.empty() || row.front() == '[') continue;
    auto eq = row.find('=');
    if (eq == std::string_view::npos)
      throw sm::ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.values[normalize_key(std::string(sm::text::trim(row.substr(0, eq))))] =
        std::string(sm::text::trim(row.substr(eq + 1)));
  }
  return cfg;
}

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sm::IoError("cannot open " + path);
  return in;
}

void write_file(const std::string &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sm::IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw sm::IoError("failed writing " + path);
}

template <typename Fn>
auto parse_file(const std::string &path, Fn fn) {
  auto in = open_in(path);
  try {
    return fn(in);
  } catch (const sm::ParseError &e) {
    throw sm::ValidationError(path + ":" + std::to_string(e.line()) + ": " + e.what());
  }
}

std::vector<sm::RawTrip> load_trips(const std::string &path) {
  return parse_file(path, [](std::istream &in) { return sm::parse_trips(in); });
}

std::vector<sm::FeatureMatrix> load_features(const std::string &path) {
  auto m = parse_file(path, [](std::istream &in) { return sm::read_feature_matrices(in); });
  if (m.empty()) throw sm::ValidationError(path + ": no feature matrices");
  return m;
}

std::vector<sm::TripVector> load_vectors(const std::string &path) {
  auto v = parse_file(path, [](std::istream &in) { return sm::read_trip_vectors(in); });
  if (v.empty()) throw sm::ValidationError(path + ": no trip vectors");
  return v;
}

sm::ArnetModel load_checkpoint(const std::string &path) {
  auto in = open_in(path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return sm::deserialize_model(bytes);
  } catch (const sm::ValidationError &e) {
    throw sm::ValidationError(path + ": " + e.what());
  }
}

// Reads `best=<preference>` from a preference-curve file written by `tune`.
double load_best_preference(const std::string &path) {
  auto in = open_in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("best=", 0) == 0) {
      if (auto v = sm::text::parse_double(sm::text::trim(std::string_view(line).substr(5)))) return *v;
    }
  }
  throw sm::ValidationError(path + ": no best=<preference> line");
}

struct Options {
  // shared
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string mode = "arnet";
  std::string config_path;
  // gen
  std::size_t drivers = 10, trips = 40, seconds = 600, first_driver = 0;
  // featurize
  std::size_t segment_len = 256, frame_len = 4;
  std::int64_t max_gap = 3;
  double holdout_fraction = 0.2;
  std::string holdout_out;
  // train
  std::string preset = "paper";
  std::size_t gru1_units = 256, gru2_units = 256, bottleneck_units = 50, batch_size = 2560, max_epochs = 200,
              patience = 10;
  double dropout_p = 0.5, lambda = 1e-5, lr = 1.0, rho = 0.95, eps = 1e-8, val_fraction = 0.1;
  std::string val_path, history_path;
  // benchmarks
  std::size_t groups = 10, repeats = 25, max_trips = 0, points = 25;
  double preference = 0.0, pref_lo = -2.0, pref_hi = -0.01;
  std::string curve_path, title;
  // files
  std::string in, out, model;
};

sm::ArnetConfig arnet_config(const Options &o, const CLI::App &cmd) {
  sm::ArnetConfig c = o.preset == "desk" ? sm::ArnetConfig::desk() : sm::ArnetConfig{};
  auto given = [&](const char *name) { return cmd.get_option(name)->count() > 0; };
  // Preset values stand unless a flag or config entry overrides them.
  if (o.preset != "desk" || given("--gru1-units")) c.gru1_units = o.gru1_units;
  if (o.preset != "desk" || given("--gru2-units")) c.gru2_units = o.gru2_units;
  if (o.preset != "desk" || given("--bottleneck-units")) c.bottleneck_units = o.bottleneck_units;
  if (o.preset != "desk" || given("--batch-size")) c.batch_size = o.batch_size;
  if (o.preset != "desk" || given("--max-epochs")) c.max_epochs = o.max_epochs;
  if (o.preset != "desk" || given("--lr")) c.lr = o.lr;
  c.dropout_p = o.dropout_p;
  c.lambda = o.lambda;
  c.rho = o.rho;
  c.eps = o.eps;
  c.patience = o.patience;
  c.mode = sm::parse_net_mode(o.mode);
  c.seed = o.seed;
  return c;
}

// --- subcommands ----------------------------------------------------------

int cmd_gen(const Options &o) {
  if (o.seconds < o.segment_len)
    std::cerr << "warning: --seconds " << o.seconds << " is shorter than the segment length " << o.segment_len
              << "; these trips yield zero segments\n";
  auto trips = sm::generate_synthetic(o.drivers, o.trips, o.seconds, o.seed, o.first_driver);
  std::ostringstream ss;
  sm::write_trips(ss, trips);
  write_file(o.out, ss.str());
  std::size_t points = 0;
  for (const auto &t : trips) points += t.points.size();
  std::cout << "drivers=" << o.drivers << " trips=" << trips.size() << " points=" << points << '\n';
  return 0;
}

int cmd_featurize(const Options &o) {
  sm::FeaturizeConfig fc{o.segment_len, o.frame_len};
  auto trips = load_trips(o.in);
  auto mats = sm::featurize_trips(trips, fc, o.max_gap);
  if (mats.empty()) std::cerr << "warning: " << o.in << " yields no segments\n";
  std::vector<sm::FeatureMatrix> kept = std::move(mats), held;
  if (!o.holdout_out.empty()) {
    auto split = sm::split_by_trip(kept, 1.0 - o.holdout_fraction, o.seed);
    kept = std::move(split.train);
    held = std::move(split.test);
    std::ostringstream hs;
    sm::write_feature_matrices(hs, held);
    write_file(o.holdout_out, hs.str());
  }
  std::ostringstream ss;
  sm::write_feature_matrices(ss, kept);
  write_file(o.out, ss.str());
  std::cout << "trips=" << trips.size() << " segments=" << kept.size();
  if (!o.holdout_out.empty()) std::cout << " holdout_segments=" << held.size();
  std::cout << '\n';
  return 0;
}

int cmd_train(const Options &o, const CLI::App &cmd) {
  sm::ArnetConfig cfg = arnet_config(o, cmd);
  auto all = load_features(o.in);
  std::vector<sm::FeatureMatrix> train_x, val_x;
  if (!o.val_path.empty()) {
    train_x = std::move(all);
    val_x = load_features(o.val_path);
  } else {
    auto split = sm::split_by_trip(all, 1.0 - o.val_fraction, o.seed);
    train_x = std::move(split.train);
    val_x = std::move(split.test);
    if (val_x.empty()) val_x = train_x;
  }
  std::cerr << "train: " << train_x.size() << " segments, validation: " << val_x.size() << " segments\n";
  std::ostringstream hist;
  hist << "epoch\tJ_r\tJ_c\tJ\tval_accuracy\tval_reconstruction\n";
  sm::TrainCallbacks cb;
  cb.on_epoch = [&](const sm::EpochRecord &r) {
    using sm::text::format_sig;
    hist << r.epoch << '\t' << format_sig(r.J_r, 9) << '\t' << format_sig(r.J_c, 9) << '\t' << format_sig(r.J, 9)
         << '\t' << format_sig(r.val_accuracy, 9) << '\t' << format_sig(r.val_reconstruction, 9) << '\n';
    std::cerr << "epoch " << r.epoch << " J=" << format_sig(r.J, 5) << " J_r=" << format_sig(r.J_r, 5)
              << " J_c=" << format_sig(r.J_c, 5) << " val_acc=" << format_sig(r.val_accuracy, 4)
              << " val_rec=" << format_sig(r.val_reconstruction, 5) << " (" << format_sig(r.seconds, 3) << " s)\n";
  };
  sm::TrainResult res;
  if (cfg.mode == sm::NetMode::ronet) {
    // No classifier: labels are still recorded so the checkpoint names its drivers.
    auto labels = sm::make_label_map(train_x);
    cfg.n_classes = std::max<std::size_t>(1, labels.size());
    sm::ArnetModel m = sm::make_arnet(cfg);
    m.labels = labels;
    sm::fit_input_scaler(m, train_x);
    res = sm::train(std::move(m), sm::Dataset{train_x, {}}, sm::Dataset{val_x, {}}, cb);
  } else {
    res = sm::fit_arnet(cfg, train_x, val_x, cb);
  }
  hist << "best_epoch=" << res.history.best_epoch << '\n';
  write_file(o.out, sm::serialize_model(res.model));
  write_file(o.history_path.empty() ? o.out + ".history.tsv" : o.history_path, hist.str());
  std::cout << "epochs=" << res.history.epochs.size() << " best_epoch=" << res.history.best_epoch << '\n';
  return 0;
}

int cmd_encode(const Options &o) {
  auto model = load_checkpoint(o.model);
  auto vecs = sm::encode_trips(model, load_features(o.in));
  std::ostringstream ss;
  sm::write_trip_vectors(ss, vecs);
  write_file(o.out, ss.str());
  std::cout << "trips=" << vecs.size() << " dims=" << (vecs.empty() ? 0 : vecs.front().values.size()) << '\n';
  return 0;
}

sm::EstimationOptions estimation_options(const Options &o) {
  return sm::EstimationOptions{o.groups, o.repeats, o.max_trips, o.seed};
}

int cmd_estimate(const Options &o, const CLI::App &cmd) {
  const bool has_pref = cmd.get_option("--preference")->count() > 0;
  if (has_pref == !o.curve_path.empty())
    throw sm::ValidationError("estimate: give exactly one of --preference or --curve");
  const double pref = has_pref ? o.preference : load_best_preference(o.curve_path);
  auto vecs = load_vectors(o.in);
  auto rep = sm::run_estimation_benchmark(vecs, sm::ap_clusterer(pref), estimation_options(o));
  std::ostringstream ss;
  sm::write_estimation_report(ss, rep, o.title.empty() ? "driver-number estimation, preference " +
                                                             sm::text::format_sig(pref, 6)
                                                       : o.title);
  write_file(o.out, ss.str());
  std::cout << "avg abs_error=" << sm::text::format_sig(rep.avg_abs_error, 4)
            << " ami=" << sm::text::format_sig(rep.avg_ami, 4) << '\n';
  return 0;
}

int cmd_identify(const Options &o) {
  auto model = load_checkpoint(o.model);
  auto segs = load_features(o.in);
  auto rep = sm::run_identification_benchmark(model, segs);
  std::ostringstream ss;
  sm::write_identification_report(ss, rep, o.title.empty() ? "driver identification" : o.title);
  write_file(o.out, ss.str());
  std::cout << "avg segment=" << sm::text::format_sig(rep.segment_accuracy, 4)
            << " top1=" << sm::text::format_sig(rep.trip_top1, 4) << " top5=" << sm::text::format_sig(rep.trip_top5, 4)
            << '\n';
  return 0;
}

int cmd_tune(const Options &o) {
  auto vecs = load_vectors(o.in);
  if (o.points == 0) throw sm::ValidationError("--points must be positive");
  auto grid = sm::preference_grid(o.pref_lo, o.pref_hi, o.points);
  auto curve = sm::tune_preference(vecs, grid, estimation_options(o));
  std::ostringstream ss;
  sm::write_preference_curve(ss, curve);
  write_file(o.out, ss.str());
  std::cout << "best preference=" << sm::text::format_sig(curve.best_preference, 9) << '\n';
  return 0;
}

// --- wiring ---------------------------------------------------------------

bool flag_on_command_line(const std::vector<std::string> &args, const std::string &name) {
  for (const auto &a : args)
    if (a == name || a.rfind(name + "=", 0) == 0) return true;
  return false;
}

int run(int argc, char **argv) {
  Options o;
  std::string seed_source = "default";
  if (const char *env = std::getenv("STYLEMETRY_SEED")) {
    auto v = sm::text::parse_int(env);
    if (!v || *v < 0) throw sm::ValidationError("STYLEMETRY_SEED must be a nonnegative integer");
    o.seed = static_cast<std::uint64_t>(*v);
    seed_source = "env";
  }

  CLI::App app{"Driving-style learning pipeline: synthetic data, featurization, ARNet training, "
               "trip encoding, driver-number estimation and driver identification."};
  app.name("stylemetry");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.add_option("--seed", o.seed, "Base seed; falls back to $STYLEMETRY_SEED, then 0");
  app.add_option("--threads", o.threads, "Worker thread cap (0 = all cores)");
  app.add_option("--config", o.config_path, "key=value file; flags override it, it overrides defaults");

  auto *gen = app.add_subcommand("gen", "Generate synthetic trips (trip-CSV)");
  gen->add_option("--drivers", o.drivers, "Number of drivers")->check(CLI::PositiveNumber);
  gen->add_option("--trips", o.trips, "Trips per driver")->check(CLI::PositiveNumber);
  gen->add_option("--seconds", o.seconds, "Trip length in seconds (1 Hz)")->check(CLI::Range(3, 1 << 24));
  gen->add_option("--first-driver", o.first_driver, "Index of the first driver (disjoint pools use disjoint ranges)");
  gen->add_option("--segment-len", o.segment_len, "Segment length used for the too-short warning");
  gen->add_option("--out", o.out, "Output trip-CSV")->required();

  auto *feat = app.add_subcommand("featurize", "Trip-CSV to 35-row feature matrices");
  feat->add_option("--in", o.in, "Input trip-CSV")->required();
  feat->add_option("--out", o.out, "Output feature file")->required();
  feat->add_option("--segment-len", o.segment_len, "Segment length L_s in seconds; shift is half");
  feat->add_option("--frame-len", o.frame_len, "Frame length L_f in seconds; shift is half");
  feat->add_option("--max-gap", o.max_gap, "Longest gap in seconds that is interpolated");
  feat->add_option("--holdout", o.holdout_out, "Also write a per-driver trip holdout here");
  feat->add_option("--holdout-fraction", o.holdout_fraction, "Fraction of each driver's trips held out")
      ->check(CLI::Range(0.0, 1.0));

  auto *train = app.add_subcommand("train", "Train an ARNet/RONet/CONet model");
  train->add_option("--in", o.in, "Training feature file")->required();
  train->add_option("--out", o.out, "Checkpoint path")->required();
  train->add_option("--history", o.history_path, "Per-epoch history (default <out>.history.tsv)");
  train->add_option("--val", o.val_path, "Validation feature file (default: split off --val-fraction)");
  train->add_option("--val-fraction", o.val_fraction, "Trips per driver used for validation")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--mode", o.mode, "arnet | ronet | conet")->check(CLI::IsMember({"arnet", "ronet", "conet"}));
  train->add_option("--preset", o.preset, "paper (256/256/50, batch 2560) or desk (32/32/16, batch 256, 50 epochs, lr 10)")
      ->check(CLI::IsMember({"paper", "desk"}));
  train->add_option("--gru1-units", o.gru1_units, "GRU units, first layer");
  train->add_option("--gru2-units", o.gru2_units, "GRU units, second layer");
  train->add_option("--bottleneck-units", o.bottleneck_units, "Code size k of fc1");
  train->add_option("--batch-size", o.batch_size, "Mini-batch size");
  train->add_option("--max-epochs", o.max_epochs, "Epoch cap");
  train->add_option("--patience", o.patience, "Early-stopping patience in epochs");
  train->add_option("--dropout-p", o.dropout_p, "Dropout probability");
  train->add_option("--lambda", o.lambda, "Sparsity weight on the code");
  train->add_option("--lr", o.lr, "ADADELTA learning rate");
  train->add_option("--rho", o.rho, "ADADELTA decay");
  train->add_option("--eps", o.eps, "ADADELTA epsilon");

  auto *enc = app.add_subcommand("encode", "Encode trips into trip vectors");
  enc->add_option("--model", o.model, "Checkpoint")->required();
  enc->add_option("--in", o.in, "Feature file")->required();
  enc->add_option("--out", o.out, "Trip-vector CSV")->required();

  auto add_bench = [&](CLI::App *c) {
    c->add_option("--groups", o.groups, "Largest group size G; groups 1..G")->check(CLI::PositiveNumber);
    c->add_option("--repeats", o.repeats, "Samples per group R")->check(CLI::PositiveNumber);
    c->add_option("--max-trips", o.max_trips, "Trips per sampled driver (0 = all)");
  };
  auto *est = app.add_subcommand("estimate", "Driver-number estimation benchmark");
  est->add_option("--in", o.in, "Trip vectors of unseen drivers")->required();
  est->add_option("--out", o.out, "Report path")->required();
  est->add_option("--preference", o.preference, "AP preference");
  est->add_option("--curve", o.curve_path, "Take the preference from a `tune` output file");
  est->add_option("--title", o.title, "Report title");
  add_bench(est);

  auto *ident = app.add_subcommand("identify", "Driver identification benchmark");
  ident->add_option("--model", o.model, "Checkpoint (arnet or conet)")->required();
  ident->add_option("--in", o.in, "Feature file of held-out trips")->required();
  ident->add_option("--out", o.out, "Report path")->required();
  ident->add_option("--title", o.title, "Report title");

  auto *tune = app.add_subcommand("tune", "Scan AP preferences on a tuning pool");
  tune->add_option("--in", o.in, "Trip vectors of tuning drivers")->required();
  tune->add_option("--out", o.out, "Curve path")->required();
  tune->add_option("--lo", o.pref_lo, "Lowest preference");
  tune->add_option("--hi", o.pref_hi, "Highest preference");
  tune->add_option("--points", o.points, "Grid points");
  add_bench(tune);

  // Config values are spliced in as flags ahead of the user's own, so the
  // user's flags win; unknown keys are rejected.
  std::vector<std::string> args(argv + 1, argv + argc);
  ConfigFile config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = read_config(args[i + 1]);
    else if (args[i].rfind("--config=", 0) == 0) config = read_config(args[i].substr(9));
  }
  std::vector<std::string> merged = args;
  if (!config.values.empty()) {
    std::set<std::string> known;
    for (const auto *c : app.get_subcommands({}))
      for (const auto *opt : c->get_options()) known.insert(normalize_key(opt->get_name()));
    for (const auto *opt : app.get_options()) known.insert(normalize_key(opt->get_name()));
    for (const auto &[k, v] : config.values)
      if (!known.count(k)) throw sm::ValidationError(config.path + ": unknown config key '" + k + "'");
    auto sub_pos = std::find_if(merged.begin(), merged.end(), [&](const std::string &a) {
      return app.get_subcommand_no_throw(a) != nullptr;
    });
    if (sub_pos != merged.end()) {
      CLI::App *sub = app.get_subcommand(*sub_pos);
      std::vector<std::string> extra;
      for (const auto &[k, v] : config.values) {
        const std::string flag = "--" + k;
        if (flag_on_command_line(args, flag)) continue;
        const bool global = app.get_option_no_throw(flag) != nullptr;
        if (!global && sub->get_option_no_throw(flag) == nullptr) continue;
        if (global) merged.insert(merged.begin(), {flag, v});
        else extra.insert(extra.end(), {flag, v});
      }
      sub_pos = std::find_if(merged.begin(), merged.end(), [&](const std::string &a) {
        return app.get_subcommand_no_throw(a) != nullptr;
      });
      merged.insert(sub_pos + 1, extra.begin(), extra.end());
    }
  }
  std::reverse(merged.begin(), merged.end());
  try {
    app.parse(merged);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (flag_on_command_line(args, "--seed")) seed_source = "flag";
  else if (config.values.count("seed")) seed_source = "config";
  sm::set_max_threads(o.threads);

  CLI::App *sub = app.get_subcommands().front();
  auto source = [&](const std::string &name) -> std::string {
    if (name == "seed") return seed_source;
    if (flag_on_command_line(args, "--" + name)) return "flag";
    if (config.values.count(name)) return "config";
    return "default";
  };
  std::cerr << "stylemetry " << sub->get_name() << ":";
  for (const auto *opt : app.get_options()) {
    const std::string name = normalize_key(opt->get_name());
    if (name == "help" || name.empty()) continue;
    std::cerr << ' ' << name << '=' << (opt->count() ? opt->as<std::string>() : opt->get_default_str()) << " ("
              << source(name) << ')';
  }
  for (const auto *opt : sub->get_options()) {
    const std::string name = normalize_key(opt->get_name());
    if (name == "help" || name.empty()) continue;
    std::cerr << ' ' << name << '=' << (opt->count() ? opt->as<std::string>() : opt->get_default_str()) << " ("
              << source(name) << ')';
  }
  std::cerr << '\n';

  const std::string name = sub->get_name();
  if (name == "gen") return cmd_gen(o);
  if (name == "featurize") return cmd_featurize(o);
  if (name == "train") return cmd_train(o, *sub);
  if (name == "encode") return cmd_encode(o);
  if (name == "estimate") return cmd_estimate(o, *sub);
  if (name == "identify") return cmd_identify(o);
  if (name == "tune") return cmd_tune(o);
  return 1;
}

}  // namespace

int main(int argc, char **argv) {
  try {
    return run(argc, argv);
  } catch (const sm::IoError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
