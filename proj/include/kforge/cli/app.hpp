// Copyright 2026 The kforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "kforge/data/dataset.hpp"
#include "kforge/data/motion.hpp"
#include "kforge/data/synthetic.hpp"
#include "kforge/metrics/report.hpp"
#include "kforge/nn/models.hpp"
#include "kforge/train/trainer.hpp"

namespace kforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kSnapshotName = "effective_config.json";

// ---------------------------------------------------------------------------
// Configuration layering: defaults <- config file <- --set overrides.

/// Rejects any key in `user` that has no counterpart in `defaults`.
inline void check_known_keys(const json& defaults, const json& user, const std::string& prefix = "") {
  if (!defaults.is_object()) return;
  KFORGE_CHECK(user.is_object(), ConfigError, "config key '", prefix.empty() ? "<root>" : prefix,
               "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    KFORGE_CHECK(defaults.contains(key), ConfigError, "unknown config key '", path, "'");
    check_known_keys(defaults.at(key), value, path);
  }
}

/// Applies "a.b.c=value"; the value is read as JSON when it parses, else as a string.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  KFORGE_CHECK(eq != std::string::npos && eq > 0, ConfigError, "override '", assignment, "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    KFORGE_CHECK(node->is_object() && node->contains(part), ConfigError, "unknown config key '", key, "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = value;
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  KFORGE_CHECK(static_cast<bool>(in), ConfigError, "cannot open config file ", path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline json layer_config(const json& defaults, const std::optional<fs::path>& file,
                         const std::vector<std::string>& overrides) {
  json config = defaults;
  if (file) {
    const json user = read_json_file(*file);
    check_known_keys(defaults, user);
    config.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  KFORGE_CHECK(static_cast<bool>(out), Error, "cannot write ", path.string());
  out << j.dump(2) << "\n";
  KFORGE_CHECK(static_cast<bool>(out), Error, "failed writing ", path.string());
}

/// Worker-thread cap from KFORGE_THREADS; --deterministic forces one.
inline int thread_cap(bool deterministic) {
  if (deterministic) return 1;
  const char* env = std::getenv("KFORGE_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  KFORGE_CHECK(end != env && *end == '\0' && n >= 1, ConfigError, "KFORGE_THREADS must be a positive integer, got '",
               env, "'");
  return static_cast<int>(n);
}

// ---------------------------------------------------------------------------
// Defaults for each command.

struct EvalSettings {
  Index samples = 256;
  std::string split = "eval";
  std::string features = "flatten";
  metrics::ClassifierConfig classifier;
  metrics::KernelConfig kernel;

  json to_json() const {
    return {{"samples", samples},
            {"split", split},
            {"features", features},
            {"classifier", classifier.to_json()},
            {"kernel", kernel.to_json()}};
  }

  static EvalSettings from_json(const json& j) {
    EvalSettings e;
    try {
      e.samples = j.at("samples").get<Index>();
      e.split = j.at("split").get<std::string>();
      e.features = j.at("features").get<std::string>();
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("evaluation settings: ") + ex.what());
    }
    e.classifier = metrics::ClassifierConfig::from_json(j.at("classifier"));
    e.kernel = metrics::KernelConfig::from_json(j.at("kernel"));
    e.kernel.validate();
    KFORGE_CHECK(e.features == "flatten" || e.features == "classifier", ConfigError,
                 "unknown feature extractor '", e.features, "' (expected flatten or classifier)");
    KFORGE_CHECK(e.split == "train" || e.split == "eval" || e.split == "all", ConfigError, "unknown split '", e.split,
                 "'");
    return e;
  }
};

inline json train_defaults() { return {{"train", train::TrainConfig{}.to_json()}, {"evaluation", EvalSettings{}.to_json()}}; }

inline json generate_defaults() {
  return {{"generate",
           {{"checkpoint", ""},
            {"class", 0},
            {"count", 1},
            {"psi", 1.0},
            {"seed", 0},
            {"noise_seed", 0},
            {"center_samples", 1000},
            {"svg", false},
            {"stride", 4}}}};
}

inline json evaluate_defaults() {
  json e = EvalSettings{}.to_json();
  e["real"] = "";
  e["checkpoint"] = "";
  e["generated"] = "";
  e["seed"] = 0;
  e["noise_seed"] = 0;
  e["psi"] = 1.0;
  e["center_samples"] = 1000;
  return {{"evaluate", e}};
}

inline json render_defaults() { return {{"render", {{"input", ""}, {"stride", 4}}}}; }

inline json inspect_defaults() { return {{"model", nn::ModelConfig{}.to_json()}}; }

inline json dataset_defaults() {
  return {{"dataset",
           {{"kind", "synthetic"},
            {"synthetic", data::SynthMotionConfig{}.to_json()},
            {"toy", data::ToyMixtureConfig{}.to_json()},
            {"ntu", {{"input", ""}, {"frames", 64}, {"mode", "local2d"}, {"eval_fraction", 0.2}}}}}};
}

// ---------------------------------------------------------------------------
// Shared helpers.

struct LoadedGenerator {
  nn::ModelConfig config;
  graph::GraphPyramid pyramid;
  std::unique_ptr<nn::Generator<float>> generator;
  std::string source;
};

/// A checkpoint directory, or a run directory whose latest checkpoint is used.
inline fs::path resolve_checkpoint(const fs::path& path) {
  KFORGE_CHECK(!path.empty(), ArgumentError, "no checkpoint given");
  if (fs::exists(path / "manifest.txt")) return path;
  if (fs::exists(path / "checkpoints" / "latest" / "manifest.txt")) return path / "checkpoints" / "latest";
  throw ArgumentError("no checkpoint at " + path.string());
}

inline LoadedGenerator load_generator(const fs::path& path) {
  const auto dir = resolve_checkpoint(path);
  const auto c = load_checkpoint(dir);
  auto it = c.meta.find("model");
  KFORGE_CHECK(it != c.meta.end(), ParseError, "checkpoint ", dir.string(), " has no model configuration");
  json mj;
  try {
    mj = json::parse(it->second);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint model configuration: " + std::string(e.what()));
  }
  const auto config = nn::ModelConfig::from_json(mj);
  auto pyramid = nn::load_pyramid(config.pyramid);
  auto gen = std::make_unique<nn::Generator<float>>(config, pyramid);
  c.load_parameters(gen->parameters());
  return {config, std::move(pyramid), std::move(gen), dir.string()};
}

/// Samples of `labels` with latents drawn from `seed`, optionally truncated.
inline Tensor<float> sample_motion(nn::Generator<float>& gen, const std::vector<Index>& labels, std::uint64_t seed,
                                   std::uint64_t noise_seed, double psi,
                                   const nn::TruncationCenter<float>* center = nullptr) {
  NoGradGuard no_grad;
  const auto& c = gen.config();
  for (Index y : labels)
    KFORGE_CHECK(y >= 0 && y < c.num_classes, ArgumentError, "class id ", y, " outside the model's ", c.num_classes,
                 " classes");
  const auto z = nn::sample_latents<float>(static_cast<Index>(labels.size()), c.latent_dim, seed, {0x6e4e});
  auto w = gen.map(z, labels);
  if (psi != 1.0) {
    KFORGE_CHECK(center != nullptr, ArgumentError, "truncation requires a center");
    w = nn::truncate(w, labels, *center, psi);
  }
  return gen.synthesize(w, noise_seed, false).detach();
}

inline std::vector<Index> balanced_labels(Index count, Index classes) {
  std::vector<Index> y;
  for (Index i = 0; i < count; ++i) y.push_back(i % classes);
  return y;
}

inline std::unique_ptr<metrics::FeatureExtractor> make_features(const EvalSettings& e, const data::Dataset& real) {
  if (e.features == "flatten") return std::make_unique<metrics::FlattenFeatures>();
  auto [x, y] = real.split("train");
  KFORGE_CHECK(!y.empty(), ArgumentError, "classifier features need training samples in the real dataset");
  auto clf = std::make_shared<metrics::GcnClassifier>(graph::bundled_skeleton(real.skeleton), real.channels,
                                                      real.num_classes(), e.classifier);
  clf->fit(x, y);
  return std::make_unique<metrics::ClassifierFeatures>(clf);
}

inline std::vector<data::MotionSample> import_generated(const fs::path& dir) {
  KFORGE_CHECK(fs::is_directory(dir), ArgumentError, "generated-set directory ", dir.string(), " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("sample_", 0) == 0 && e.path().extension() == ".json")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<data::MotionSample> out;
  for (const auto& f : files) out.push_back(data::import_sequence(f));
  return out;
}

inline Tensor<float> stack_samples(const std::vector<data::MotionSample>& items) {
  KFORGE_CHECK(!items.empty(), ArgumentError, "no generated samples");
  const auto& s0 = items.front();
  std::vector<float> v;
  for (const auto& s : items) {
    KFORGE_CHECK(s.values.shape() == s0.values.shape(), ShapeError, "generated sample '", s.provenance,
                 "' has shape ", shape_str(s.values.shape()), ", expected ", shape_str(s0.values.shape()));
    v.insert(v.end(), s.values.data().begin(), s.values.data().end());
  }
  return Tensor<float>({static_cast<Index>(items.size()), s0.channels(), s0.frames(), s0.joints()}, std::move(v));
}

// ---------------------------------------------------------------------------
// Commands. Each receives the effective config and an existing output directory.

inline int cmd_train(const json& cfg, const fs::path& out, std::ostream& log) {
  auto tc = train::TrainConfig::from_json(cfg.at("train"));
  const auto es = EvalSettings::from_json(cfg.at("evaluation"));
  KFORGE_CHECK(!tc.dataset.empty(), ConfigError, "train.dataset is not set");
  const auto ds = data::Dataset::load(tc.dataset);
  const auto pyramid = nn::load_pyramid(tc.model.pyramid);
  auto [x, y] = ds.split("train");
  KFORGE_CHECK(!y.empty(), ArgumentError, "dataset ", tc.dataset, " has no training samples");
  train::TrainingSet<float> set{x, y};

  std::unique_ptr<metrics::FeatureExtractor> features;
  Tensor<float> real_eval;
  typename train::Trainer<float>::Evaluator evaluator;
  if (tc.eval_every > 0) {
    features = make_features(es, ds);
    real_eval = ds.split(es.split).first;
    evaluator = [&](nn::Generator<float>& gen, Index step) {
      const auto labels = balanced_labels(es.samples, tc.model.num_classes);
      const auto fake = sample_motion(gen, labels, tc.seed ^ 0xe7a1, static_cast<std::uint64_t>(step), 1.0);
      auto report = metrics::evaluate(real_eval, fake, *features, es.kernel);
      report.dataset = ds.manifest_hash();
      report.model_checkpoint = "step " + std::to_string(step);
      log << "step " << step << " fid " << report.fid << " mmd_a " << report.mmd_a.value << " mmd_s "
          << report.mmd_s.value << "\n";
      return train::EvalResult{report.to_json(), false};
    };
  }
  auto trainer = train::train<float>(tc, pyramid, set, out, evaluator);
  log << "trained to step " << trainer->step() << " in " << out.string() << "\n";
  return 0;
}

inline int cmd_generate(const json& cfg, const fs::path& out, std::ostream& log) {
  const auto& g = cfg.at("generate");
  Index cls, count, stride, center_samples;
  double psi;
  std::uint64_t seed, noise_seed;
  bool svg;
  std::string checkpoint;
  try {
    checkpoint = g.at("checkpoint").get<std::string>();
    cls = g.at("class").get<Index>();
    count = g.at("count").get<Index>();
    psi = g.at("psi").get<double>();
    seed = g.at("seed").get<std::uint64_t>();
    noise_seed = g.at("noise_seed").get<std::uint64_t>();
    center_samples = g.at("center_samples").get<Index>();
    svg = g.at("svg").get<bool>();
    stride = g.at("stride").get<Index>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generate settings: ") + e.what());
  }
  KFORGE_CHECK(count >= 1, ArgumentError, "--count must be positive");
  KFORGE_CHECK(psi >= 0 && psi <= 1, ArgumentError, "--psi must lie in [0,1], got ", psi);
  auto model = load_generator(checkpoint);
  KFORGE_CHECK(cls >= 0 && cls < model.config.num_classes, ArgumentError, "class id ", cls, " outside the model's ",
               model.config.num_classes, " classes");
  std::optional<nn::TruncationCenter<float>> center;
  if (psi != 1.0) center = nn::compute_truncation_center(*model.generator, seed, center_samples);
  std::string skeleton = model.pyramid.finest().name;
  for (const auto& n : graph::GraphPyramid::bundled_names())
    if (n == model.config.pyramid) skeleton = n;
  for (Index i = 0; i < count; ++i) {
    NoGradGuard no_grad;
    const auto z = nn::sample_latents<float>(1, model.config.latent_dim, seed,
                                             {0x6e4e, static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(i)});
    auto w = model.generator->map(z, {cls});
    if (center) w = nn::truncate(w, {cls}, *center, psi);
    const auto x = model.generator->synthesize(w, noise_seed, false);
    data::MotionSample s;
    s.values = reshape(x, {x.dim(1), x.dim(2), x.dim(3)}).detach();
    s.label = cls;
    s.skeleton = skeleton;
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04lld", static_cast<long long>(i));
    s.provenance = "generated:" + model.source + ":seed=" + std::to_string(seed) + ":index=" + std::to_string(i);
    data::export_sequence(s, out / (std::string(name) + ".json"));
    if (svg) data::render_svg(s, out / (std::string(name) + ".svg"), stride);
  }
  log << "wrote " << count << " sequences of class " << cls << " to " << out.string() << "\n";
  return 0;
}

inline int cmd_evaluate(const json& cfg, const fs::path& out, std::ostream& log) {
  const auto& e = cfg.at("evaluate");
  const auto es = EvalSettings::from_json(e);
  std::string real_dir, checkpoint, generated;
  std::uint64_t seed, noise_seed;
  double psi;
  Index center_samples;
  try {
    real_dir = e.at("real").get<std::string>();
    checkpoint = e.at("checkpoint").get<std::string>();
    generated = e.at("generated").get<std::string>();
    seed = e.at("seed").get<std::uint64_t>();
    noise_seed = e.at("noise_seed").get<std::uint64_t>();
    psi = e.at("psi").get<double>();
    center_samples = e.at("center_samples").get<Index>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("evaluate settings: ") + ex.what());
  }
  KFORGE_CHECK(!real_dir.empty(), ArgumentError, "no real dataset given");
  KFORGE_CHECK(checkpoint.empty() != generated.empty(), ArgumentError,
               "give exactly one of a checkpoint or a generated-set directory");
  const auto ds = data::Dataset::load(real_dir);
  const auto real = ds.split(es.split).first;

  Tensor<float> fake;
  std::string source;
  if (!checkpoint.empty()) {
    auto model = load_generator(checkpoint);
    KFORGE_CHECK(es.samples >= metrics::kMinSamples, ArgumentError, "need at least ", metrics::kMinSamples,
                 " generated samples, got ", es.samples);
    std::optional<nn::TruncationCenter<float>> center;
    if (psi != 1.0) center = nn::compute_truncation_center(*model.generator, seed, center_samples);
    fake = sample_motion(*model.generator, balanced_labels(es.samples, model.config.num_classes), seed, noise_seed, psi,
                         center ? &*center : nullptr);
    source = model.source;
  } else {
    const auto items = import_generated(generated);
    KFORGE_CHECK(static_cast<Index>(items.size()) >= metrics::kMinSamples, ArgumentError, "need at least ",
                 metrics::kMinSamples, " generated samples, found ", items.size(), " in ", generated);
    fake = stack_samples(items);
    source = generated;
  }
  const auto features = make_features(es, ds);
  auto report = metrics::evaluate(real, fake, *features, es.kernel);
  report.dataset = ds.manifest_hash();
  report.model_checkpoint = source;
  write_json(out / "report.json", report.to_json());
  log << "fid " << report.fid << " mmd_a " << report.mmd_a.value << " mmd_s " << report.mmd_s.value << "\n";
  return 0;
}

inline int cmd_render(const json& cfg, const fs::path& out, std::ostream& log) {
  const auto& r = cfg.at("render");
  std::string input;
  Index stride;
  try {
    input = r.at("input").get<std::string>();
    stride = r.at("stride").get<Index>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("render settings: ") + e.what());
  }
  KFORGE_CHECK(!input.empty(), ArgumentError, "no input sequence given");
  const auto s = data::import_sequence(input);
  const auto path = out / (fs::path(input).stem().string() + ".svg");
  data::render_svg(s, path, stride);
  log << "wrote " << path.string() << "\n";
  return 0;
}

inline int cmd_inspect(const json& cfg, std::ostream& log) {
  auto mc = nn::ModelConfig::from_json(cfg.at("model"));
  mc.validate();
  const auto pyramid = nn::load_pyramid(mc.pyramid);
  log << "pyramid " << mc.pyramid << ": " << pyramid.size() << " levels\n";
  for (Index l = 0; l < pyramid.size(); ++l) {
    const auto& lv = pyramid.level(l);
    log << "level " << l << ": " << lv.joints() << " joints, root " << lv.skeleton.root_joint << ", center "
        << lv.skeleton.center_joint << ", partition edges";
    for (const auto& a : lv.adjacency.raw) {
      Index nz = 0;
      for (double v : a.values) nz += v != 0.0;
      log << " " << nz;
    }
    log << "\n";
  }
  nn::Generator<float> gen(mc, pyramid);
  nn::Discriminator<float> disc(mc, pyramid);
  const auto audit = nn::audit_models(gen, disc);
  for (const auto& b : audit.blocks) {
    log << b.model << " block " << b.index << " (" << b.resampling << "):";
    for (const auto& k : b.layers) log << " " << k;
    log << "\n";
  }
  for (const auto& v : audit.violations) log << "violation: " << v << "\n";
  log << "batch-norm audit: " << (audit.ok() ? "ok" : "FAILED") << "\n";
  return audit.ok() ? 0 : 1;
}

inline int cmd_make_dataset(const json& cfg, const fs::path& out, std::ostream& log) {
  const auto& d = cfg.at("dataset");
  const auto kind = d.at("kind").get<std::string>();
  data::Dataset ds;
  if (kind == "synthetic") {
    const auto sc = data::SynthMotionConfig::from_json(d.at("synthetic"));
    ds = data::generate_synthetic_dataset(sc);
  } else if (kind == "toy") {
    ds = data::toy_mixture_dataset(data::ToyMixtureConfig::from_json(d.at("toy")));
  } else if (kind == "ntu") {
    const auto& n = d.at("ntu");
    const fs::path input = n.at("input").get<std::string>();
    const auto frames = n.at("frames").get<Index>();
    const auto mode = data::norm_mode_from_string(n.at("mode").get<std::string>());
    KFORGE_CHECK(fs::is_directory(input), ArgumentError, "NTU input directory ", input.string(), " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".skeleton") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<data::MotionSample> items;
    std::vector<Index> labels;
    for (const auto& f : files)
      for (auto& s : data::parse_skeleton_file(f)) {
        if (s.frames() < 2) continue;
        items.push_back(data::normalize_sequence(s, frames, mode));
        labels.push_back(s.label);
      }
    KFORGE_CHECK(!items.empty(), ArgumentError, "no usable skeleton sequences in ", input.string());
    ds = data::Dataset::from_samples(items, data::per_class_splits(labels, n.at("eval_fraction").get<double>()),
                                     data::to_string(mode), {{"kind", "ntu"}, {"input", input.string()}});
  } else {
    throw ConfigError("unknown dataset kind '" + kind + "' (expected synthetic, toy or ntu)");
  }
  ds.save(out);
  log << "wrote " << ds.size() << " samples (" << ds.num_classes() << " classes) to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point.

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
};

inline void add_common(CLI::App* cmd, CommonFlags& f, bool needs_out) {
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.overrides, "dotted key=value override (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd->add_option("--seed", f.seed, "seed for all randomness of this command");
  auto* o = cmd->add_option("--out", f.out, "output directory");
  if (needs_out) o->required();
  cmd->add_flag("--deterministic", f.deterministic, "force single-threaded numerics");
}

/// Runs the tool; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"kforge: skeleton motion GAN toolkit"};
  app.require_subcommand(1);
  CommonFlags f;

  auto* train_cmd = app.add_subcommand("train", "train a generator/critic pair");
  add_common(train_cmd, f, true);
  std::optional<Index> steps;
  std::string dataset;
  train_cmd->add_option("--steps", steps, "total generator steps");
  train_cmd->add_option("--dataset", dataset, "dataset directory");

  auto* gen_cmd = app.add_subcommand("generate", "sample sequences from a checkpoint");
  add_common(gen_cmd, f, true);
  std::string checkpoint, run_dir;
  std::optional<Index> cls, count, stride;
  std::optional<double> psi;
  std::optional<std::uint64_t> noise_seed;
  bool svg = false;
  gen_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory");
  gen_cmd->add_option("--run", run_dir, "run directory (uses its latest checkpoint)");
  gen_cmd->add_option("--class", cls, "class id");
  gen_cmd->add_option("--count", count, "number of sequences");
  gen_cmd->add_option("--psi", psi, "truncation psi in [0,1]");
  gen_cmd->add_option("--noise-seed", noise_seed, "noise seed shared by all sequences");
  gen_cmd->add_flag("--svg", svg, "also render each sequence");
  gen_cmd->add_option("--stride", stride, "frame stride for --svg");

  auto* eval_cmd = app.add_subcommand("evaluate", "compute FID and MMD against a real dataset");
  add_common(eval_cmd, f, true);
  std::string real, generated, split, features;
  std::optional<Index> samples;
  eval_cmd->add_option("--real", real, "real dataset directory");
  eval_cmd->add_option("--split", split, "real split: train, eval or all");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory");
  eval_cmd->add_option("--run", run_dir, "run directory (uses its latest checkpoint)");
  eval_cmd->add_option("--generated", generated, "directory of generated sequence files");
  eval_cmd->add_option("--count", samples, "generated sample count when sampling a checkpoint");
  eval_cmd->add_option("--features", features, "flatten or classifier");
  eval_cmd->add_option("--psi", psi, "truncation psi in [0,1]");
  eval_cmd->add_option("--noise-seed", noise_seed, "noise seed");

  auto* render_cmd = app.add_subcommand("render", "draw a sequence file as SVG");
  add_common(render_cmd, f, true);
  std::string input;
  render_cmd->add_option("--input", input, "sequence JSON file");
  render_cmd->add_option("--stride", stride, "frame stride");

  auto* inspect_cmd = app.add_subcommand("inspect-pyramid", "print pyramid levels and audit normalization placement");
  add_common(inspect_cmd, f, false);
  std::string pyramid;
  inspect_cmd->add_option("pyramid", pyramid, "bundled pyramid name or JSON file");

  auto* data_cmd = app.add_subcommand("make-dataset", "build a dataset directory");
  add_common(data_cmd, f, true);
  std::string kind;
  data_cmd->add_option("--kind", kind, "synthetic, toy or ntu")->check(CLI::IsMember({"synthetic", "toy", "ntu"}));
  data_cmd->add_option("--input", input, "NTU skeleton directory (kind ntu)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, log, err);
  }

  try {
    const auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    json defaults;
    std::vector<std::string> sets;
    auto flag = [&](const std::string& key, const json& value) { sets.push_back(key + "=" + value.dump()); };
    if (name == "train") {
      defaults = train_defaults();
      if (f.seed) flag("train.seed", *f.seed);
      if (steps) flag("train.steps", *steps);
      if (!dataset.empty()) flag("train.dataset", dataset);
    } else if (name == "generate") {
      defaults = generate_defaults();
      KFORGE_CHECK(checkpoint.empty() || run_dir.empty(), ArgumentError, "give --checkpoint or --run, not both");
      if (!checkpoint.empty()) flag("generate.checkpoint", checkpoint);
      if (!run_dir.empty()) flag("generate.checkpoint", run_dir);
      if (f.seed) flag("generate.seed", *f.seed);
      if (cls) flag("generate.class", *cls);
      if (count) flag("generate.count", *count);
      if (psi) flag("generate.psi", *psi);
      if (noise_seed) flag("generate.noise_seed", *noise_seed);
      if (svg) flag("generate.svg", true);
      if (stride) flag("generate.stride", *stride);
    } else if (name == "evaluate") {
      defaults = evaluate_defaults();
      KFORGE_CHECK(checkpoint.empty() || run_dir.empty(), ArgumentError, "give --checkpoint or --run, not both");
      if (!real.empty()) flag("evaluate.real", real);
      if (!split.empty()) flag("evaluate.split", split);
      if (!checkpoint.empty()) flag("evaluate.checkpoint", checkpoint);
      if (!run_dir.empty()) flag("evaluate.checkpoint", run_dir);
      if (!generated.empty()) flag("evaluate.generated", generated);
      if (samples) flag("evaluate.samples", *samples);
      if (!features.empty()) flag("evaluate.features", features);
      if (psi) flag("evaluate.psi", *psi);
      if (noise_seed) flag("evaluate.noise_seed", *noise_seed);
      if (f.seed) {
        flag("evaluate.seed", *f.seed);
        flag("evaluate.classifier.seed", *f.seed);
      }
    } else if (name == "render") {
      defaults = render_defaults();
      if (!input.empty()) flag("render.input", input);
      if (stride) flag("render.stride", *stride);
    } else if (name == "inspect-pyramid") {
      defaults = inspect_defaults();
      if (!pyramid.empty()) flag("model.pyramid", pyramid);
      if (f.seed) flag("model.init_seed", *f.seed);
    } else {
      defaults = dataset_defaults();
      if (!kind.empty()) flag("dataset.kind", kind);
      if (!input.empty()) flag("dataset.ntu.input", input);
      if (f.seed) {
        flag("dataset.synthetic.seed", *f.seed);
        flag("dataset.toy.seed", *f.seed);
      }
    }
    std::vector<std::string> all = f.overrides;
    all.insert(all.end(), sets.begin(), sets.end());
    const json cfg = layer_config(defaults, f.config.empty() ? std::nullopt : std::optional<fs::path>(f.config), all);

    // Typed parsing validates every section before anything is written.
    if (name == "train") {
      train::TrainConfig::from_json(cfg.at("train")).validate();
      EvalSettings::from_json(cfg.at("evaluation"));
    } else if (name == "evaluate") {
      EvalSettings::from_json(cfg.at("evaluate"));
    } else if (name == "inspect-pyramid") {
      nn::ModelConfig::from_json(cfg.at("model")).validate();
    } else if (name == "make-dataset") {
      data::SynthMotionConfig::from_json(cfg.at("dataset").at("synthetic"));
      data::ToyMixtureConfig::from_json(cfg.at("dataset").at("toy"));
    }

    const int threads = thread_cap(f.deterministic);
    if (threads > 0) Eigen::setNbThreads(threads);

    fs::path out = f.out;
    if (!out.empty()) {
      fs::create_directories(out);
      write_json(out / kSnapshotName, cfg);
    }
    if (name == "train") return cmd_train(cfg, out, log);
    if (name == "generate") return cmd_generate(cfg, out, log);
    if (name == "evaluate") return cmd_evaluate(cfg, out, log);
    if (name == "render") return cmd_render(cfg, out, log);
    if (name == "inspect-pyramid") return cmd_inspect(cfg, log);
    return cmd_make_dataset(cfg, out, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace kforge::cli
