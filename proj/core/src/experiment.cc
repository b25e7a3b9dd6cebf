/*
 * Copyright 2026 The sdtriplet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sdtriplet/experiment.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sdtriplet/ensemble.h"
#include "sdtriplet/errors.h"
#include "sdtriplet/predictions.h"
#include "sdtriplet/util.h"

namespace sdtriplet {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t* SeedRegistry::Find(const std::string& name) {
  if (name == "teacher_init") return &teacher_init;
  if (name == "student_init") return &student_init;
  if (name == "data") return &data;
  if (name == "noise") return &noise;
  if (name == "baseline") return &baseline;
  return nullptr;
}

std::map<std::string, uint64_t> SeedRegistry::AsMap() const {
  return {{"teacher_init", teacher_init},
          {"student_init", student_init},
          {"data", data},
          {"noise", noise},
          {"baseline", baseline}};
}

MultiTaskSet ParseMultiTaskSet(const std::string& name) {
  if (name == "none") return MultiTaskSet::kNone;
  if (name == "ivt") return MultiTaskSet::kIvt;
  if (name == "ivtp") return MultiTaskSet::kIvtp;
  throw ValidationError("unknown multitask set '" + name + "' (none|ivt|ivtp)");
}

std::string MultiTaskSetName(MultiTaskSet set) {
  switch (set) {
    case MultiTaskSet::kNone:
      return "none";
    case MultiTaskSet::kIvt:
      return "ivt";
    case MultiTaskSet::kIvtp:
      return "ivtp";
  }
  return "none";
}

std::vector<EnsembleMemberConfig> ExperimentConfig::DefaultEnsembleMembers() {
  return {{"A", "tiny-conv", MultiTaskSet::kIvt, 0.0, 1.0},
          {"B", "tiny-conv-large", MultiTaskSet::kNone, 0.1, 1.0},
          {"C", "tiny-conv", MultiTaskSet::kIvtp, 0.0, 1.0}};
}

BackboneSpec ExperimentConfig::ResolveBackbone(const std::string& name) const {
  if (name == backbone.name) return backbone;
  BackboneSpec spec = LookupBackbone(name);
  spec.input_size = backbone.input_size;
  spec.stem_pool = backbone.stem_pool;
  return spec;
}

namespace {

json OptimizerJson(const OptimizerConfig& o) {
  return {{"lr_max", o.lr_max},
          {"lr_min", o.lr_min},
          {"batch_size", o.batch_size},
          {"epochs", o.epochs}};
}

std::string MetricModeName(MapMode mode) {
  return mode == MapMode::kGlobal ? "global" : "per_video";
}
std::string LabelSourceName(LabelSource labels) {
  return labels == LabelSource::kObserved ? "observed" : "clean";
}
std::string TopKRuleName(TopKRule rule) {
  return rule == TopKRule::kAnyInTopK ? "any" : "all";
}

}  // namespace

std::string ExperimentConfig::CanonicalJson() const {
  json j;
  const SyntheticSpec& s = dataset.synthetic;
  j["dataset"] = {
      {"manifest", dataset.manifest},
      {"synthetic",
       {{"videos", s.n_videos},
        {"frames_per_video", s.frames_per_video},
        {"instruments", s.num_instruments},
        {"verbs", s.num_verbs},
        {"targets", s.num_targets},
        {"triplets", s.n_valid_triplets},
        {"imbalance_exponent", s.imbalance_exponent},
        {"max_triplets_per_frame", s.max_triplets_per_frame},
        {"phases", s.num_phases},
        {"image_size", s.image_size}}},
      {"noise", {{"rate", dataset.noise_rate}, {"mode", NoiseModeName(dataset.noise_mode)}}},
      {"test_videos", dataset.test_videos}};
  j["folds"] = folds;
  j["backbone"] = {{"name", backbone.name},
                   {"embedding_dim", backbone.embedding_dim},
                   {"pretrained", backbone.pretrained},
                   {"input_size", backbone.input_size},
                   {"stem_pool", backbone.stem_pool},
                   {"conv_channels", backbone.conv_channels}};
  j["heads"] = {{"w_triplet", head_weights.w_triplet},
                {"w_instrument", head_weights.w_instrument},
                {"w_verb", head_weights.w_verb},
                {"w_target", head_weights.w_target},
                {"w_phase", head_weights.w_phase}};
  j["teacher"] = OptimizerJson(teacher);
  j["student"] = OptimizerJson(student);
  j["distill"] = {{"epsilon", epsilon},
                  {"alpha", alpha},
                  {"scope", SoftTargetScopeName(scope)},
                  {"teacher_rule", CheckpointRuleName(teacher_rule)},
                  {"student_rule", CheckpointRuleName(student_rule)}};
  const AugmentationConfig& a = augmentation;
  j["augmentation"] = {{"p_hflip", a.p_hflip},
                       {"p_vflip", a.p_vflip},
                       {"p_rotate", a.p_rotate},
                       {"p_color", a.p_color},
                       {"rotation_degrees", a.rotation_degrees},
                       {"brightness", a.brightness},
                       {"saturation", a.saturation}};
  json members = json::array();
  for (const EnsembleMemberConfig& m : ensemble) {
    members.push_back({{"name", m.name},
                       {"backbone", m.backbone},
                       {"multitask", MultiTaskSetName(m.multitask)},
                       {"epsilon", m.epsilon},
                       {"weight", m.weight}});
  }
  j["ensemble"] = {{"members", members}};
  j["metrics"] = {{"mode", MetricModeName(metrics.mode)},
                  {"labels", LabelSourceName(metrics.labels)},
                  {"undefined_as_zero", metrics.undefined_as_zero},
                  {"top_k", metrics.top_k},
                  {"top_k_rule", TopKRuleName(metrics.top_k_rule)}};
  return j.dump();
}

std::string ExperimentConfig::Hash() const { return Sha256Hex(CanonicalJson()); }

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class ConfigReader {
 public:
  ConfigReader(std::string source, std::set<std::string> overridden)
      : source_(std::move(source)), overridden_(std::move(overridden)) {}

  void Issue(const YAML::Node& node, const std::string& path, const std::string& what) {
    std::string where = source_;
    if (overridden_.count(path)) {
      where = "<override>";
    } else if (node.IsDefined() && node.Mark().line >= 0) {
      where += ":" + std::to_string(node.Mark().line + 1);
    }
    issues_.push_back(where + ": " + path + ": " + what);
  }

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  // Reports keys of `map` outside `allowed`; returns false if `map` is
  // present but not a mapping.
  bool CheckMap(const YAML::Node& map, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!map.IsDefined() || map.IsNull()) return false;
    if (!map.IsMap()) {
      Issue(map, path, "expected a mapping");
      return false;
    }
    for (const auto& kv : map) {
      const std::string key = kv.first.as<std::string>();
      if (std::none_of(allowed.begin(), allowed.end(),
                       [&](const char* a) { return key == a; })) {
        Issue(kv.first, Join(path, key), "unknown field");
      }
    }
    return true;
  }

  template <typename T>
  void Read(const YAML::Node& map, const std::string& path, const char* key, T& out) {
    if (!map.IsDefined() || !map.IsMap()) return;
    const YAML::Node node = map[key];
    if (!node.IsDefined() || node.IsNull()) return;
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      Issue(node, Join(path, key), "cannot parse '" + Describe(node) + "'");
    }
  }

  // Reads a string and converts it with `parse`, which throws on bad input.
  template <typename T, typename Parse>
  void ReadEnum(const YAML::Node& map, const std::string& path, const char* key,
                T& out, Parse parse) {
    std::string text;
    if (!map.IsDefined() || !map.IsMap() || !map[key].IsDefined()) return;
    Read(map, path, key, text);
    try {
      out = parse(text);
    } catch (const Error& e) {
      Issue(map[key], Join(path, key), e.what());
    }
  }

  // Runs `check` and records its exception, if any, against `path`.
  void Check(const YAML::Node& node, const std::string& path,
             const std::function<void()>& check) {
    try {
      check();
    } catch (const Error& e) {
      Issue(node, path, e.what());
    }
  }

  void Require(bool ok, const YAML::Node& node, const std::string& path,
               const std::string& what) {
    if (!ok) Issue(node, path, what);
  }

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string Describe(const YAML::Node& node) {
    if (node.IsScalar()) return node.Scalar();
    std::ostringstream os;
    os << node;
    return os.str();
  }

  std::string source_;
  std::set<std::string> overridden_;
  std::vector<std::string> issues_;
};

void ApplyOverride(YAML::Node root, const ConfigOverride& o) {
  const std::vector<std::string> parts = Split(o.path, '.');
  YAML::Node node = root;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node[parts[i]].IsDefined() || !node[parts[i]].IsMap()) {
      node[parts[i]] = YAML::Node(YAML::NodeType::Map);
    }
    node.reset(node[parts[i]]);
  }
  YAML::Node value;
  try {
    value = YAML::Load(o.value);
  } catch (const YAML::Exception&) {
    value = YAML::Node(o.value);
  }
  node[parts.back()] = value;
}

void ReadOptimizer(ConfigReader& r, const YAML::Node& n, const std::string& path,
                   OptimizerConfig& o) {
  r.CheckMap(n, path, {"lr_max", "lr_min", "batch_size", "epochs"});
  r.Read(n, path, "lr_max", o.lr_max);
  r.Read(n, path, "lr_min", o.lr_min);
  r.Read(n, path, "batch_size", o.batch_size);
  r.Read(n, path, "epochs", o.epochs);
  r.Check(n, path, [&] { o.Validate(); });
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const std::string& text,
                                       const std::string& source,
                                       const std::string& base_dir,
                                       const std::vector<ConfigOverride>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  std::set<std::string> overridden;
  for (const ConfigOverride& o : overrides) {
    ApplyOverride(root, o);
    overridden.insert(o.path);
  }

  ConfigReader r(source, overridden);
  ExperimentConfig c;
  if (!root.IsMap()) {
    r.Issue(root, "<root>", "expected a mapping");
  } else {
    r.CheckMap(root, "", {"dataset", "folds", "backbone", "heads", "teacher", "student",
                          "distill", "augmentation", "ensemble", "metrics",
                          "output_dir", "seeds"});
  }

  const YAML::Node ds = root["dataset"];
  if (r.CheckMap(ds, "dataset", {"manifest", "synthetic", "noise", "test_videos"})) {
    r.Read(ds, "dataset", "manifest", c.dataset.manifest);
    if (!c.dataset.manifest.empty()) {
      if (!base_dir.empty() && fs::path(c.dataset.manifest).is_relative()) {
        c.dataset.manifest = (fs::path(base_dir) / c.dataset.manifest).string();
      }
      r.Require(fs::exists(c.dataset.manifest), ds["manifest"], "dataset.manifest",
                "file not found: " + c.dataset.manifest);
    }
    const YAML::Node syn = ds["synthetic"];
    SyntheticSpec& s = c.dataset.synthetic;
    if (r.CheckMap(syn, "dataset.synthetic",
                   {"videos", "frames_per_video", "instruments", "verbs", "targets",
                    "triplets", "imbalance_exponent", "max_triplets_per_frame",
                    "phases", "image_size"})) {
      const std::string p = "dataset.synthetic";
      r.Read(syn, p, "videos", s.n_videos);
      r.Read(syn, p, "frames_per_video", s.frames_per_video);
      r.Read(syn, p, "instruments", s.num_instruments);
      r.Read(syn, p, "verbs", s.num_verbs);
      r.Read(syn, p, "targets", s.num_targets);
      r.Read(syn, p, "triplets", s.n_valid_triplets);
      r.Read(syn, p, "imbalance_exponent", s.imbalance_exponent);
      r.Read(syn, p, "max_triplets_per_frame", s.max_triplets_per_frame);
      r.Read(syn, p, "phases", s.num_phases);
      r.Read(syn, p, "image_size", s.image_size);
      r.Check(syn, p, [&] { s.Validate(); });
    }
    const YAML::Node noise = ds["noise"];
    if (r.CheckMap(noise, "dataset.noise", {"rate", "mode"})) {
      r.Read(noise, "dataset.noise", "rate", c.dataset.noise_rate);
      r.ReadEnum(noise, "dataset.noise", "mode", c.dataset.noise_mode, ParseNoiseMode);
      r.Require(c.dataset.noise_rate >= 0.0 && c.dataset.noise_rate <= 1.0,
                noise["rate"], "dataset.noise.rate", "must lie in [0, 1]");
    }
    r.Read(ds, "dataset", "test_videos", c.dataset.test_videos);
    r.Require(c.dataset.test_videos >= 0, ds["test_videos"], "dataset.test_videos",
              "must be >= 0");
  }

  r.Read(root, "", "folds", c.folds);
  r.Require(c.folds >= 2, root["folds"], "folds", "must be >= 2");

  const YAML::Node bb = root["backbone"];
  if (bb.IsDefined() && bb.IsScalar()) {
    r.Check(bb, "backbone", [&] { c.backbone = LookupBackbone(bb.as<std::string>()); });
  } else if (r.CheckMap(bb, "backbone", {"name", "input_size", "stem_pool",
                                         "conv_channels", "embedding_dim"})) {
    std::string name = c.backbone.name;
    r.Read(bb, "backbone", "name", name);
    r.Check(bb["name"], "backbone.name", [&] { c.backbone = LookupBackbone(name); });
    r.Read(bb, "backbone", "input_size", c.backbone.input_size);
    r.Read(bb, "backbone", "stem_pool", c.backbone.stem_pool);
    r.Read(bb, "backbone", "conv_channels", c.backbone.conv_channels);
    r.Read(bb, "backbone", "embedding_dim", c.backbone.embedding_dim);
  }
  r.Check(bb, "backbone", [&] { c.backbone.Validate(); });
  if (!c.backbone.realizable) {
    r.Issue(bb, "backbone", "backbone '" + c.backbone.name +
                                "' is a registry entry without an implementation here");
  }

  const YAML::Node heads = root["heads"];
  if (r.CheckMap(heads, "heads",
                 {"w_triplet", "w_instrument", "w_verb", "w_target", "w_phase"})) {
    r.Read(heads, "heads", "w_triplet", c.head_weights.w_triplet);
    r.Read(heads, "heads", "w_instrument", c.head_weights.w_instrument);
    r.Read(heads, "heads", "w_verb", c.head_weights.w_verb);
    r.Read(heads, "heads", "w_target", c.head_weights.w_target);
    r.Read(heads, "heads", "w_phase", c.head_weights.w_phase);
    r.Check(heads, "heads", [&] { c.head_weights.Validate(); });
  }

  ReadOptimizer(r, root["teacher"], "teacher", c.teacher);
  ReadOptimizer(r, root["student"], "student", c.student);

  const YAML::Node dist = root["distill"];
  if (r.CheckMap(dist, "distill",
                 {"epsilon", "alpha", "scope", "teacher_rule", "student_rule"})) {
    r.Read(dist, "distill", "epsilon", c.epsilon);
    r.Require(c.epsilon >= 0.0 && c.epsilon < 1.0, dist["epsilon"], "distill.epsilon",
              "must lie in [0, 1), got " + std::to_string(c.epsilon));
    r.Read(dist, "distill", "alpha", c.alpha);
    r.Require(c.alpha >= 0.0 && c.alpha <= 1.0, dist["alpha"], "distill.alpha",
              "must lie in [0, 1]");
    r.ReadEnum(dist, "distill", "scope", c.scope, ParseSoftTargetScope);
    r.ReadEnum(dist, "distill", "teacher_rule", c.teacher_rule, ParseCheckpointRule);
    r.ReadEnum(dist, "distill", "student_rule", c.student_rule, ParseCheckpointRule);
  }

  const YAML::Node aug = root["augmentation"];
  if (r.CheckMap(aug, "augmentation",
                 {"p_hflip", "p_vflip", "p_rotate", "p_color", "rotation_degrees",
                  "brightness", "saturation"})) {
    AugmentationConfig& a = c.augmentation;
    r.Read(aug, "augmentation", "p_hflip", a.p_hflip);
    r.Read(aug, "augmentation", "p_vflip", a.p_vflip);
    r.Read(aug, "augmentation", "p_rotate", a.p_rotate);
    r.Read(aug, "augmentation", "p_color", a.p_color);
    r.Read(aug, "augmentation", "rotation_degrees", a.rotation_degrees);
    r.Read(aug, "augmentation", "brightness", a.brightness);
    r.Read(aug, "augmentation", "saturation", a.saturation);
    r.Check(aug, "augmentation", [&] { a.Validate(); });
  }
  c.augmentation.out_height = c.augmentation.out_width = c.backbone.input_size;

  const YAML::Node ens = root["ensemble"];
  if (r.CheckMap(ens, "ensemble", {"members"})) {
    const YAML::Node members = ens["members"];
    if (members.IsDefined()) {
      if (!members.IsSequence() || members.size() == 0) {
        r.Issue(members, "ensemble.members", "expected a non-empty list");
      } else {
        c.ensemble.clear();
        std::set<std::string> names;
        for (size_t i = 0; i < members.size(); ++i) {
          const YAML::Node m = members[i];
          const std::string p = "ensemble.members[" + std::to_string(i) + "]";
          EnsembleMemberConfig mc;
          mc.name = std::string(1, static_cast<char>('A' + i % 26));
          if (r.CheckMap(m, p, {"name", "backbone", "multitask", "epsilon", "weight"})) {
            r.Read(m, p, "name", mc.name);
            r.Read(m, p, "backbone", mc.backbone);
            r.ReadEnum(m, p, "multitask", mc.multitask, ParseMultiTaskSet);
            r.Read(m, p, "epsilon", mc.epsilon);
            r.Read(m, p, "weight", mc.weight);
          }
          r.Check(m["backbone"], p + ".backbone", [&] {
            const BackboneSpec spec = LookupBackbone(mc.backbone);
            if (!spec.realizable) {
              throw ConfigError("backbone '" + mc.backbone +
                                "' is a registry entry without an implementation here");
            }
          });
          r.Require(mc.epsilon >= 0.0 && mc.epsilon < 1.0, m["epsilon"], p + ".epsilon",
                    "must lie in [0, 1), got " + std::to_string(mc.epsilon));
          r.Require(mc.weight >= 0.0, m["weight"], p + ".weight", "must be >= 0");
          r.Require(names.insert(mc.name).second, m["name"], p + ".name",
                    "duplicate member name '" + mc.name + "'");
          c.ensemble.push_back(mc);
        }
      }
    }
  }

  const YAML::Node met = root["metrics"];
  if (r.CheckMap(met, "metrics",
                 {"mode", "labels", "undefined_as_zero", "top_k", "top_k_rule"})) {
    r.ReadEnum(met, "metrics", "mode", c.metrics.mode, ParseMapMode);
    r.ReadEnum(met, "metrics", "labels", c.metrics.labels, ParseLabelSource);
    r.Read(met, "metrics", "undefined_as_zero", c.metrics.undefined_as_zero);
    r.Read(met, "metrics", "top_k", c.metrics.top_k);
    r.Require(c.metrics.top_k >= 1, met["top_k"], "metrics.top_k", "must be >= 1");
    r.ReadEnum(met, "metrics", "top_k_rule", c.metrics.top_k_rule, ParseTopKRule);
  }

  r.Read(root, "", "output_dir", c.output_dir);

  const YAML::Node seeds = root["seeds"];
  if (r.CheckMap(seeds, "seeds",
                 {"teacher_init", "student_init", "data", "noise", "baseline"})) {
    for (const char* name : {"teacher_init", "student_init", "data", "noise", "baseline"}) {
      r.Read(seeds, "seeds", name, *c.seeds.Find(name));
    }
  }

  if (!r.issues().empty()) {
    std::string message = "invalid configuration (" +
                          std::to_string(r.issues().size()) + " problems):";
    for (const std::string& issue : r.issues()) message += "\n  " + issue;
    throw ConfigError(message);
  }
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path,
                                      const std::vector<ConfigOverride>& overrides) {
  return ParseExperimentConfig(ReadTextFile(path), path,
                               fs::path(path).parent_path().string(), overrides);
}

DatasetManifest BuildDataset(const ExperimentConfig& config) {
  DatasetManifest manifest = [&] {
    if (!config.dataset.manifest.empty()) return LoadManifest(config.dataset.manifest);
    SyntheticSpec spec = config.dataset.synthetic;
    spec.rng_seed = config.seeds.data;
    return GenerateSyntheticDataset(spec).manifest;
  }();
  if (config.dataset.noise_rate > 0.0) {
    NoiseConfig noise{config.dataset.noise_rate, config.dataset.noise_mode,
                      config.seeds.noise};
    const std::string base = manifest.base_dir();
    manifest = InjectLabelNoise(manifest, noise);
    manifest.set_base_dir(base);
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Ablation ladder

namespace {

constexpr uint64_t kSplitSalt = 0x5b17;
constexpr uint64_t kTeacherDataSalt = 0x7ea1;
constexpr uint64_t kStudentDataSalt = 0x57d1;

}  // namespace

uint64_t SplitSeed(const SeedRegistry& seeds) { return MixSeed(seeds.data, kSplitSalt); }

DistillRunConfig MakeRunConfig(const ExperimentConfig& config,
                               const BackboneSpec& backbone, MultiTaskSet set,
                               double epsilon) {
  DistillRunConfig d;
  d.model.backbone = backbone;
  d.model.heads = config.head_weights;
  d.model.heads.instrument = d.model.heads.verb = d.model.heads.target =
      set != MultiTaskSet::kNone;
  d.model.heads.phase = set == MultiTaskSet::kIvtp;
  d.model.augmentation = config.augmentation;
  d.teacher = config.teacher;
  d.teacher.weight_init_seed = config.seeds.teacher_init;
  d.teacher.data_seed = MixSeed(config.seeds.data, kTeacherDataSalt);
  d.student = config.student;
  d.student.weight_init_seed = config.seeds.student_init;
  d.student.data_seed = MixSeed(config.seeds.data, kStudentDataSalt);
  d.epsilon = epsilon;
  d.alpha = config.alpha;
  d.scope = config.scope;
  d.teacher_rule = config.teacher_rule;
  d.student_rule = config.student_rule;
  d.val_labels = LabelSource::kObserved;
  return d;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// failure (by index) after all tasks finish.
void ParallelFor(size_t n, int workers, const std::function<void(size_t)>& fn) {
  std::vector<std::string> errors(n);
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::clamp(workers, 1, static_cast<int>(std::max<size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) throw Error("fold " + std::to_string(i) + ": " + errors[i]);
  }
}

// The trained models of one configuration, one per fold.
struct FoldModels {
  std::vector<TrainingRun> runs;
  std::vector<std::string> paths;  // relative to the run directory
};

struct Ladder {
  const ExperimentConfig& config;
  const DatasetManifest& manifest;
  const std::vector<FoldSplit>& folds;
  const std::vector<size_t>& test_frames;
  FrameImageCache& images;
  int workers;

  bool persist() const { return !config.output_dir.empty(); }
  std::string Path(const std::string& relative) const {
    return (fs::path(config.output_dir) / relative).string();
  }

  DistillRunConfig RunConfig(const BackboneSpec& backbone, MultiTaskSet set,
                             double epsilon) const {
    return MakeRunConfig(config, backbone, set, epsilon);
  }

  FoldModels TrainTeachers(const DistillRunConfig& d, const std::string& dir) const {
    FoldModels out;
    out.runs.resize(folds.size());
    out.paths.resize(folds.size());
    ParallelFor(folds.size(), workers, [&](size_t k) {
      out.runs[k] = TrainTeacher(manifest, images, folds[k], d);
      out.paths[k] = dir + "/fold_" + std::to_string(folds[k].fold_id) + "/teacher.ckpt";
      if (persist()) SaveCheckpoint(out.runs[k].checkpoint, Path(out.paths[k]));
    });
    return out;
  }

  FoldModels TrainStudents(const FoldModels& teachers, const DistillRunConfig& d,
                           const std::string& dir) const {
    FoldModels out;
    out.runs.resize(folds.size());
    out.paths.resize(folds.size());
    ParallelFor(folds.size(), workers, [&](size_t k) {
      const std::string fold_dir = dir + "/fold_" + std::to_string(folds[k].fold_id);
      const SoftLabelSet soft = SmoothSoftLabels(
          GenerateSoftLabels(teachers.runs[k].checkpoint, manifest, images, folds[k]),
          d.epsilon);
      if (persist()) SaveSoftLabels(soft, Path(fold_dir + "/soft_labels.csv"));
      out.runs[k] = TrainStudent(manifest, images, folds[k], soft, d);
      out.paths[k] = fold_dir + "/student.ckpt";
      if (persist()) SaveCheckpoint(out.runs[k].checkpoint, Path(out.paths[k]));
    });
    return out;
  }

  PredictionSet OutOfFold(const FoldModels& models) const {
    PredictionSet oof(manifest.num_classes());
    for (const TrainingRun& run : models.runs) {
      for (const auto& [key, probs] : run.val_predictions.rows()) oof.Set(key, probs);
    }
    return oof;
  }

  std::optional<PredictionSet> TestPredictions(const FoldModels& models) const {
    if (test_frames.empty()) return std::nullopt;
    std::vector<Checkpoint> checkpoints;
    for (const TrainingRun& run : models.runs) checkpoints.push_back(run.checkpoint);
    return FoldAveragedPredictions(checkpoints, manifest, images, test_frames);
  }

  void Score(RungResult& rung, const PredictionSet& oof,
             const std::optional<PredictionSet>& test, const std::string& dir) const {
    rung.cv_map = TripletMap(oof, manifest, config.metrics).map;
    rung.cv_top_k = TopKAccuracy(oof, manifest, config.metrics);
    rung.per_video = PerVideoReport(oof, manifest, config.metrics);
    if (test) {
      const double m = TripletMap(*test, manifest, config.metrics).map;
      if (!std::isnan(m)) rung.test_map = m;
      rung.test_top_k = TopKAccuracy(*test, manifest, config.metrics);
    }
    if (persist()) {
      ExportPredictions(oof, Path(dir + "/oof_predictions.csv"), PredictionFormat::kCsv);
      if (test) {
        ExportPredictions(*test, Path(dir + "/test_predictions.csv"),
                          PredictionFormat::kCsv);
      }
    }
  }
};

void RecordHashes(RungResult& rung, const FoldModels& models) {
  for (const TrainingRun& run : models.runs) {
    rung.checkpoint_hashes.push_back(run.checkpoint.Hash());
  }
}

}  // namespace

AblationReport RunAblation(const ExperimentConfig& config, int workers) {
  const DatasetManifest manifest = BuildDataset(config);
  std::vector<std::string> videos = manifest.videos();
  if (config.dataset.test_videos >= static_cast<int>(videos.size())) {
    throw ConfigError("dataset.test_videos leaves no videos for cross-validation");
  }
  const std::vector<std::string> test_videos(videos.end() - config.dataset.test_videos,
                                             videos.end());
  videos.resize(videos.size() - config.dataset.test_videos);
  const std::vector<FoldSplit> folds =
      MakeFoldSplits(videos, config.folds, SplitSeed(config.seeds));
  const std::vector<size_t> test_frames =
      manifest.FrameIndicesFor({test_videos.begin(), test_videos.end()});
  FrameImageCache images(manifest);

  AblationReport report;
  report.config_hash = config.Hash();
  report.seeds = config.seeds.AsMap();
  report.map_mode = MetricModeName(config.metrics.mode);
  report.labels = LabelSourceName(config.metrics.labels);
  report.top_k = config.metrics.top_k;
  report.folds = config.folds;
  report.cv_frames = manifest.FrameIndicesFor({videos.begin(), videos.end()}).size();
  report.test_frames = test_frames.size();

  if (!config.output_dir.empty()) {
    const fs::path data = fs::path(config.output_dir) / "data";
    SaveVocabulary(manifest.vocab(), (data / "vocab.txt").string());
    SaveManifest(manifest, (data / "manifest.txt").string());
    WriteTextFile((data / "folds.txt").string(), FormatFoldSplits(folds));
  }

  const Ladder ladder{config, manifest, folds, test_frames, images, workers};
  std::map<std::string, FoldModels> trained;
  std::map<std::string, PredictionSet> oof;
  std::map<std::string, std::optional<PredictionSet>> test;

  const auto run_rung = [&](const std::string& name, const std::function<void(RungResult&)>& body) {
    RungResult rung;
    rung.name = name;
    try {
      body(rung);
    } catch (const std::exception& e) {
      rung.ok = false;
      rung.error = e.what();
      rung.cv_map = std::nan("");
      rung.cv_top_k.reset();
      rung.test_map.reset();
      rung.test_top_k.reset();
      rung.per_video.clear();
    }
    report.rungs.push_back(std::move(rung));
  };

  run_rung("backbone", [&](RungResult& rung) {
    const auto d = ladder.RunConfig(config.backbone, MultiTaskSet::kNone, 0.0);
    FoldModels m = ladder.TrainTeachers(d, "backbone");
    RecordHashes(rung, m);
    ladder.Score(rung, ladder.OutOfFold(m), ladder.TestPredictions(m), "backbone");
  });

  run_rung("multitask", [&](RungResult& rung) {
    const auto d = ladder.RunConfig(config.backbone, MultiTaskSet::kIvtp, 0.0);
    FoldModels m = ladder.TrainTeachers(d, "multitask");
    RecordHashes(rung, m);
    ladder.Score(rung, ladder.OutOfFold(m), ladder.TestPredictions(m), "multitask");
    trained["multitask"] = std::move(m);
  });

  const auto sd_config = ladder.RunConfig(config.backbone, MultiTaskSet::kIvtp, config.epsilon);
  run_rung("self_distillation", [&](RungResult& rung) {
    if (!trained.count("multitask")) throw Error("depends on the failed multitask rung");
    FoldModels m = ladder.TrainStudents(trained.at("multitask"), sd_config,
                                        "self_distillation");
    RecordHashes(rung, m);
    oof["self_distillation"] = ladder.OutOfFold(m);
    test["self_distillation"] = ladder.TestPredictions(m);
    ladder.Score(rung, oof["self_distillation"], test["self_distillation"],
                 "self_distillation");
    trained["self_distillation"] = std::move(m);
  });

  run_rung("ensemble", [&](RungResult& rung) {
    EnsembleSpec spec;
    spec.expected_folds = config.folds;
    std::vector<PredictionSet> member_oof, member_test;
    std::vector<double> weights;
    for (const EnsembleMemberConfig& mc : config.ensemble) {
      const BackboneSpec backbone = config.ResolveBackbone(mc.backbone);
      const DistillRunConfig d = ladder.RunConfig(backbone, mc.multitask, mc.epsilon);
      const bool reuse = backbone == config.backbone &&
                         mc.multitask == MultiTaskSet::kIvtp &&
                         mc.epsilon == config.epsilon;
      const FoldModels* models = nullptr;
      FoldModels fresh;
      if (reuse) {
        if (!trained.count("self_distillation")) {
          throw Error("member '" + mc.name + "' depends on the failed self_distillation rung");
        }
        models = &trained.at("self_distillation");
      } else {
        const std::string dir = "ensemble/member_" + mc.name;
        const FoldModels teachers = ladder.TrainTeachers(d, dir);
        fresh = ladder.TrainStudents(teachers, d, dir);
        models = &fresh;
      }
      RecordHashes(rung, *models);
      member_oof.push_back(ladder.OutOfFold(*models));
      if (auto t = ladder.TestPredictions(*models)) member_test.push_back(std::move(*t));
      weights.push_back(mc.weight);

      EnsembleMember member;
      member.name = mc.name;
      member.description = backbone.name + " multitask=" + MultiTaskSetName(mc.multitask) +
                           " epsilon=" + std::to_string(mc.epsilon);
      member.weight = mc.weight;
      for (size_t k = 0; k < models->runs.size(); ++k) {
        member.folds.push_back({fs::path(models->paths[k])
                                    .lexically_relative("ensemble")
                                    .generic_string(),
                                models->runs[k].checkpoint.Hash()});
      }
      spec.members.push_back(std::move(member));
    }
    std::optional<PredictionSet> ens_test;
    if (!member_test.empty()) ens_test = WeightedAveragePredictions(member_test, weights);
    ladder.Score(rung, WeightedAveragePredictions(member_oof, weights), ens_test,
                 "ensemble");
    if (ladder.persist()) {
      WriteTextFile(ladder.Path("ensemble/ensemble.json"), FormatEnsembleSpec(spec));
    }
  });

  if (!config.output_dir.empty()) {
    json seeds = config.seeds.AsMap();
    WriteTextFile(ladder.Path("config.json"),
                  json{{"config", json::parse(config.CanonicalJson())},
                       {"config_hash", report.config_hash},
                       {"seeds", seeds}}
                          .dump(2) +
                      "\n");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json Num(double v) { return std::isfinite(v) ? json(v) : json(); }
json Num(const std::optional<double>& v) { return v ? Num(*v) : json(); }
std::optional<double> OptNum(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string Cell(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

std::string FormatReportJson(const AblationReport& report) {
  json j;
  j["config_hash"] = report.config_hash;
  j["seeds"] = report.seeds;
  j["metrics"] = {{"map_mode", report.map_mode},
                  {"labels", report.labels},
                  {"top_k", report.top_k}};
  j["folds"] = report.folds;
  j["cv_frames"] = report.cv_frames;
  j["test_frames"] = report.test_frames;
  json rungs = json::array();
  for (const RungResult& r : report.rungs) {
    json per_video = json::object();
    for (const auto& [video, m] : r.per_video) per_video[video] = Num(m);
    rungs.push_back({{"name", r.name},
                     {"status", r.ok ? "ok" : "failed"},
                     {"error", r.error},
                     {"cv_map", Num(r.cv_map)},
                     {"cv_top_k", Num(r.cv_top_k)},
                     {"test_map", Num(r.test_map)},
                     {"test_top_k", Num(r.test_top_k)},
                     {"per_video", per_video},
                     {"checkpoint_hashes", r.checkpoint_hashes}});
  }
  j["rungs"] = rungs;
  return j.dump(2) + "\n";
}

AblationReport ParseReportJson(const std::string& text, const std::string& source) {
  AblationReport report;
  try {
    const json j = json::parse(text);
    report.config_hash = j.at("config_hash").get<std::string>();
    report.seeds = j.at("seeds").get<std::map<std::string, uint64_t>>();
    report.map_mode = j.at("metrics").at("map_mode").get<std::string>();
    report.labels = j.at("metrics").at("labels").get<std::string>();
    report.top_k = j.at("metrics").at("top_k").get<int>();
    report.folds = j.at("folds").get<int>();
    report.cv_frames = j.at("cv_frames").get<size_t>();
    report.test_frames = j.at("test_frames").get<size_t>();
    for (const json& jr : j.at("rungs")) {
      RungResult r;
      r.name = jr.at("name").get<std::string>();
      r.ok = jr.at("status").get<std::string>() == "ok";
      r.error = jr.at("error").get<std::string>();
      r.cv_map = OptNum(jr.at("cv_map")).value_or(std::nan(""));
      r.cv_top_k = OptNum(jr.at("cv_top_k"));
      r.test_map = OptNum(jr.at("test_map"));
      r.test_top_k = OptNum(jr.at("test_top_k"));
      for (const auto& [video, m] : jr.at("per_video").items()) {
        r.per_video[video] = OptNum(m);
      }
      r.checkpoint_hashes = jr.at("checkpoint_hashes").get<std::vector<std::string>>();
      report.rungs.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(source + ": " + e.what());
  }
  return report;
}

std::string FormatReportText(const AblationReport& report) {
  std::ostringstream os;
  os << "config_hash " << report.config_hash << "\n";
  os << "seeds";
  for (const auto& [name, value] : report.seeds) os << " " << name << "=" << value;
  os << "\n";
  os << "metrics map_mode=" << report.map_mode << " labels=" << report.labels
     << " top_k=" << report.top_k << "\n";
  os << "folds " << report.folds << ", cv frames " << report.cv_frames
     << ", test frames " << report.test_frames << "\n\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-18s %8s %8s %8s %8s  %s\n", "rung", "cv_mAP",
                "cv_topk", "test_mAP", "test_topk", "status");
  os << line;
  for (const RungResult& r : report.rungs) {
    std::snprintf(line, sizeof(line), "%-18s %8s %8s %8s %8s  %s\n", r.name.c_str(),
                  Cell(r.cv_map).c_str(), Cell(r.cv_top_k).c_str(),
                  Cell(r.test_map).c_str(), Cell(r.test_top_k).c_str(),
                  r.ok ? "ok" : ("FAILED: " + r.error).c_str());
    os << line;
  }
  return os.str();
}

void EmitReport(const AblationReport& report, const std::string& dir) {
  WriteTextFile((fs::path(dir) / "report.json").string(), FormatReportJson(report));
  WriteTextFile((fs::path(dir) / "report.txt").string(), FormatReportText(report));
  std::set<std::string> videos;
  for (const RungResult& r : report.rungs) {
    for (const auto& [video, _] : r.per_video) videos.insert(video);
  }
  std::string csv = "video_id";
  for (const RungResult& r : report.rungs) csv += "," + r.name;
  csv += "\n";
  for (const std::string& video : videos) {
    csv += video;
    for (const RungResult& r : report.rungs) {
      const auto it = r.per_video.find(video);
      csv += ",";
      if (it != r.per_video.end() && it->second) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", *it->second);
        csv += buf;
      }
    }
    csv += "\n";
  }
  WriteTextFile((fs::path(dir) / "per_video.csv").string(), csv);
}

}  // namespace sdtriplet
