// Copyright 2026 The DRSM Authors. All Rights Reserved.
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

#include "drsm/cli.hpp"

#include "drsm/config.hpp"
#include "drsm/dataset.hpp"
#include "drsm/evaluation.hpp"
#include "drsm/nets.hpp"
#include "drsm/oracle.hpp"
#include "drsm/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace drsm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value config file");
  cmd->add_option("--set", c.overrides, "override as key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "rng seed (default: $DRS_SEED, else 0)");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DRS_SEED"); env && *env) {
    const long long v = parse_int("DRS_SEED", env);
    if (v < 0) throw ConfigError("DRS_SEED must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  return 0;
}

// Config file entries first, then --set overrides in order.
std::vector<std::pair<std::string, std::string>> collect_settings(const Common& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  if (!c.config_path.empty()) {
    for (auto& e : read_key_value_file(c.config_path)) kv.emplace_back(e);
  }
  for (const auto& o : c.overrides) kv.push_back(parse_override(o));
  return kv;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw FormatError(FormatErrorCode::kIo, "write failed: " + path.string());
}

void check_grid(const ArchConfig& arch, const PolarGridSpec& grid) {
  if (arch.n_range != grid.n_range || arch.n_azimuth != grid.n_azimuth) {
    throw ConfigError("checkpoint grid " + std::to_string(arch.n_range) + "x" + std::to_string(arch.n_azimuth) +
                      " does not match dataset grid " + std::to_string(grid.n_range) + "x" +
                      std::to_string(grid.n_azimuth));
  }
}

std::size_t checked_frame(long long frame, const Dataset& ds) {
  if (frame < 0 || static_cast<std::size_t>(frame) >= ds.frames.size()) {
    throw ConfigError("frame index " + std::to_string(frame) + " out of range [0, " +
                      std::to_string(ds.frames.size()) + ")");
  }
  return static_cast<std::size_t>(frame);
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  Common common;
  long long frames = 0;
  std::string out;
};

void run_gen(const GenArgs& a, std::ostream& out) {
  OracleConfig cfg;
  for (const auto& [k, v] : collect_settings(a.common)) cfg.set(k, v);
  cfg.validate();
  if (a.frames < 1) throw ConfigError("frames must be ≥ 1");
  const std::uint64_t seed = resolve_seed(a.common.seed);
  const json resolved = {{"command", "gen"}, {"frames", a.frames}, {"seed", seed}, {"oracle", cfg.to_json()}};
  out << "config " << resolved.dump() << "\n";
  const Dataset ds = generate_dataset(static_cast<std::uint64_t>(a.frames), cfg, seed);
  save_dataset(a.out, ds);
  out << "wrote " << ds.frames.size() << " frames to " << a.out << " (dataset " << dataset_fingerprint(ds.manifest)
      << ")\n";
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string model;
  std::string data;
  std::optional<int> epochs;
  std::optional<double> alpha;
  std::string out;
  std::string log;
};

void run_train(const TrainArgs& a, std::ostream& out) {
  const Variant variant = variant_from_string(a.model);
  TrainConfig tc;
  tc.variant = variant;
  ArchConfig arch;
  bool alpha_given = a.alpha.has_value();
  bool seed_in_config = false;
  for (const auto& [k, v] : collect_settings(a.common)) {
    if (k.rfind("train.", 0) == 0) {
      const std::string key = k.substr(6);
      if (key == "variant") throw ConfigError("train.variant is set with --model");
      alpha_given |= key == "alpha";
      seed_in_config |= key == "seed";
      tc.set(key, v);
    } else if (k.rfind("arch.", 0) == 0) {
      arch.set(k.substr(5), v);
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  if (alpha_given && variant != Variant::kVaeMixed) {
    throw ConfigError("alpha only applies to --model vae-mixed");
  }
  if (a.alpha) tc.alpha = *a.alpha;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.common.seed || !seed_in_config) tc.seed = resolve_seed(a.common.seed);

  const Dataset ds = load_dataset(a.data);
  arch.n_range = ds.manifest.grid.n_range;
  arch.n_azimuth = ds.manifest.grid.n_azimuth;
  arch.validate();
  tc.validate();
  if (ds.frames.size() < 2) throw ConfigError("training needs a dataset of at least 2 frames");

  const Split split = split_dataset(ds.frames.size(), tc.split_fraction, tc.seed);
  std::vector<const FrameRecord*> frames;
  for (std::size_t i : split.train) frames.push_back(&ds.frames[i]);

  const json training = {{"config", tc.to_json()},
                         {"dataset", dataset_fingerprint(ds.manifest)},
                         {"split", {{"seed", tc.seed},
                                    {"fraction", tc.split_fraction},
                                    {"train_frames", split.train.size()},
                                    {"test_frames", split.test.size()}}}};
  const json resolved = {{"command", "train"}, {"training", training}, {"architecture", arch.to_json()}};
  out << "config " << resolved.dump() << "\n";

  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw FormatError(FormatErrorCode::kIo, "cannot open " + log_path + " for writing");
  log << json{{"config", resolved}}.dump() << "\n";

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) {
    log << e.to_json().dump() << "\n" << std::flush;
    out << "epoch " << e.epoch << " loss " << e.loss << " l_vae " << e.l_vae << " l_adv " << e.l_adv
        << " disc_acc " << e.disc_accuracy << "\n";
  };
  hooks.on_checkpoint = [&](int epoch, const RadarModel<float>& m) {
    save_model(a.out + ".epoch" + std::to_string(epoch), m, training);
  };
  const RadarModel<float> model = train(frames, arch, tc, nullptr, hooks);
  save_model(a.out, model, training);
  if (!log) throw FormatError(FormatErrorCode::kIo, "write failed: " + log_path);
  out << "wrote checkpoint " << a.out << " and log " << log_path << "\n";
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string model;
  std::string data;
  std::string report;
};

std::string metric_line(const char* name, const std::optional<double>& v, const char* unit) {
  std::ostringstream os;
  os << name << ": ";
  if (v) {
    os << std::setprecision(6) << *v << ' ' << unit;
  } else {
    os << "absent";
  }
  return os.str();
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  EvalOptions opts;
  std::optional<double> split_fraction;
  std::optional<std::uint64_t> split_seed;
  for (const auto& [k, v] : collect_settings(a.common)) {
    if (k == "eval.clutter_threshold_db") {
      opts.clutter_threshold_db = parse_double(k, v);
    } else if (k == "eval.batch") {
      const long long b = parse_int(k, v);
      if (b < 1) throw ConfigError("eval.batch must be >= 1");
      opts.batch = static_cast<std::size_t>(b);
    } else if (k == "eval.split_seed") {
      split_seed = static_cast<std::uint64_t>(parse_int(k, v));
    } else if (k == "eval.split_fraction") {
      split_fraction = parse_double(k, v);
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  const std::uint64_t seed = resolve_seed(a.common.seed);
  const Dataset ds = load_dataset(a.data);

  // "replay" evaluates the recorded frames against themselves.
  std::optional<RadarModel<float>> model;
  json training = json::object();
  std::unique_ptr<FrameSampler> sampler;
  if (a.model == "replay") {
    sampler = std::make_unique<ReplaySampler>();
  } else {
    ModelCheckpoint ck;
    model.emplace(load_model(a.model, &ck));
    check_grid(ck.arch, ds.manifest.grid);
    training = ck.training;
    sampler = std::make_unique<ModelSampler>(*model);
  }
  if (training.contains("split")) {
    if (!split_seed) split_seed = training["split"].at("seed").get<std::uint64_t>();
    if (!split_fraction) split_fraction = training["split"].at("fraction").get<double>();
  }
  const Split split = split_dataset(ds.frames.size(), split_fraction.value_or(0.9), split_seed.value_or(seed));
  const std::string fingerprint = dataset_fingerprint(ds.manifest);
  if (training.contains("dataset") && training["dataset"] != fingerprint) {
    out << "warning: checkpoint was trained on dataset " << training["dataset"].get<std::string>()
        << ", evaluating on " << fingerprint << "\n";
  }

  const json resolved = {{"command", "eval"},
                         {"seed", seed},
                         {"model", a.model == "replay" ? json("replay") : json(training)},
                         {"split", {{"seed", split_seed.value_or(seed)}, {"fraction", split_fraction.value_or(0.9)}}},
                         {"clutter_threshold_db", opts.clutter_threshold_db.value_or(ds.manifest.grid.floor_db + 10.0)},
                         {"batch", opts.batch}};
  out << "config " << resolved.dump() << "\n";

  const EvalReport report = evaluate(*sampler, ds, split.test, seed, opts);
  json j = report.to_json();
  j["config"] = resolved;
  write_text(a.report, j.dump(2) + "\n");

  out << metric_line("rmse_db", report.rmse_db, "dB") << "\n"
      << metric_line("p0_model_db", report.p0_model_db, "dB") << "\n"
      << metric_line("p0_truth_db", report.p0_truth_db, "dB") << "\n"
      << metric_line("kl_distance", report.kl_distance, "nats") << "\n"
      << metric_line("kl_angle", report.kl_angle, "nats") << "\n"
      << metric_line("kl_power", report.kl_power, "nats") << "\n";
}

// ---- sample / render -------------------------------------------------------

struct SampleArgs {
  Common common;
  std::string model;
  std::string data;
  long long frame = 0;
  long long n = 1;
  std::string out;
};

void run_sample(const SampleArgs& a, std::ostream& out) {
  if (!collect_settings(a.common).empty()) throw ConfigError("sample takes no config keys");
  if (a.n < 1) throw ConfigError("--n must be >= 1");
  const std::uint64_t seed = resolve_seed(a.common.seed);
  const Dataset ds = load_dataset(a.data);
  const std::size_t frame = checked_frame(a.frame, ds);
  ModelCheckpoint ck;
  const RadarModel<float> model = load_model(a.model, &ck);
  check_grid(ck.arch, ds.manifest.grid);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const json resolved = {{"command", "sample"}, {"seed", seed},        {"frame", frame},
                         {"n", a.n},            {"model", ck.training}, {"dataset", dataset_fingerprint(ds.manifest)}};
  out << "config " << resolved.dump() << "\n";

  std::vector<const FrameRecord*> frames(static_cast<std::size_t>(a.n), &ds.frames[frame]);
  std::vector<Rng> rngs;
  const std::uint64_t frame_seed = Rng::substream(seed, frame).next();
  for (long long k = 0; k < a.n; ++k) rngs.push_back(Rng::substream(frame_seed, static_cast<std::uint64_t>(k)));
  const auto samples = ModelSampler(model).sample(frames, rngs);

  save_pgm(dir / "truth.pgm", ds.frames[frame].frame);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    std::ostringstream name;
    name << "sample_" << std::setw(3) << std::setfill('0') << k << ".pgm";
    save_pgm(dir / name.str(), samples[k]);
  }
  write_text(dir / "config.json", resolved.dump(2) + "\n");
  out << "wrote " << samples.size() << " samples and truth.pgm to " << dir.string() << "\n";
}

struct RenderArgs {
  Common common;
  std::string data;
  long long frame = 0;
  std::string out;
};

void run_render(const RenderArgs& a, std::ostream& out) {
  if (!collect_settings(a.common).empty()) throw ConfigError("render takes no config keys");
  const Dataset ds = load_dataset(a.data);
  const std::size_t frame = checked_frame(a.frame, ds);
  const json resolved = {{"command", "render"}, {"frame", frame}, {"dataset", dataset_fingerprint(ds.manifest)}};
  out << "config " << resolved.dump() << "\n";
  save_pgm(a.out, ds.frames[frame].frame);
  write_text(a.out + ".json", resolved.dump(2) + "\n");
  out << "wrote " << a.out << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep radar sensor models: generate, train, evaluate, sample, render", "drsm"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--frames", gen.frames, "number of frames")->required();
  gen_cmd->add_option("--out", gen.out, "dataset path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a sensor model");
  add_common(train_cmd, tr.common);
  train_cmd->add_option("--model", tr.model, "normal | gmm | vae | vae-adv | vae-mixed")->required();
  train_cmd->add_option("--data", tr.data, "dataset path")->required();
  train_cmd->add_option("--epochs", tr.epochs, "training epochs");
  train_cmd->add_option("--alpha", tr.alpha, "mixing weight (vae-mixed only)");
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "line-JSON log path (default <out>.log.jsonl)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on its withheld split");
  add_common(eval_cmd, ev.common);
  eval_cmd->add_option("--model", ev.model, "checkpoint path, or 'replay'")->required();
  eval_cmd->add_option("--data", ev.data, "dataset path")->required();
  eval_cmd->add_option("--report", ev.report, "report JSON path")->required();

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "write sampled heatmaps for one frame");
  add_common(sample_cmd, sa.common);
  sample_cmd->add_option("--model", sa.model, "checkpoint path")->required();
  sample_cmd->add_option("--data", sa.data, "dataset path")->required();
  sample_cmd->add_option("--frame", sa.frame, "frame index")->required();
  sample_cmd->add_option("--n", sa.n, "number of samples");
  sample_cmd->add_option("--out", sa.out, "output directory")->required();

  RenderArgs re;
  auto* render_cmd = app.add_subcommand("render", "write the recorded heatmap of one frame");
  add_common(render_cmd, re.common);
  render_cmd->add_option("--data", re.data, "dataset path")->required();
  render_cmd->add_option("--frame", re.frame, "frame index")->required();
  render_cmd->add_option("--out", re.out, "PGM path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) run_gen(gen, out);
    if (train_cmd->parsed()) run_train(tr, out);
    if (eval_cmd->parsed()) run_eval(ev, out);
    if (sample_cmd->parsed()) run_sample(sa, out);
    if (render_cmd->parsed()) run_render(re, out);
    return kExitOk;
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed checkpoint metadata: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace drsm
