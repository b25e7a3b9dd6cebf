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

#ifndef SDTRIPLET_EXPERIMENT_H_
#define SDTRIPLET_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdtriplet/augment.h"
#include "sdtriplet/datagen.h"
#include "sdtriplet/distill.h"
#include "sdtriplet/metrics.h"
#include "sdtriplet/network.h"

namespace sdtriplet {

struct SeedRegistry {
  uint64_t teacher_init = 1;
  uint64_t student_init = 2;
  uint64_t data = 3;
  uint64_t noise = 4;
  uint64_t baseline = 5;

  // nullptr for an unknown name.
  uint64_t* Find(const std::string& name);
  std::map<std::string, uint64_t> AsMap() const;
  friend bool operator==(const SeedRegistry&, const SeedRegistry&) = default;
};

struct DatasetConfig {
  // Loaded when non-empty (resolved against the config file's directory);
  // otherwise a synthetic dataset is generated from `synthetic` with the data
  // seed.
  std::string manifest;
  SyntheticSpec synthetic;
  double noise_rate = 0.0;
  NoiseMode noise_mode = NoiseMode::kSwapOneComponent;
  // The last `test_videos` videos (sorted by id) are held out from the folds
  // and scored with fold-averaged models.
  int test_videos = 0;
};

enum class MultiTaskSet { kNone, kIvt, kIvtp };
MultiTaskSet ParseMultiTaskSet(const std::string& name);
std::string MultiTaskSetName(MultiTaskSet set);

struct EnsembleMemberConfig {
  std::string name;
  std::string backbone = "tiny-conv";
  MultiTaskSet multitask = MultiTaskSet::kIvtp;
  double epsilon = 0.0;
  double weight = 1.0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  int folds = 5;
  // Resolved registry entry; input_size / stem_pool apply to every member.
  BackboneSpec backbone;
  // Loss weights; which heads are enabled depends on the rung.
  HeadConfig head_weights;
  OptimizerConfig teacher{2e-4, 2e-6, 64, 20, 0, 0};
  OptimizerConfig student{2e-4, 2e-6, 64, 40, 0, 0};
  double epsilon = 0.0;
  double alpha = 1.0;
  SoftTargetScope scope = SoftTargetScope::kTripletOnly;
  CheckpointRule teacher_rule = CheckpointRule::kFinalEpoch;
  CheckpointRule student_rule = CheckpointRule::kBestValMap;
  AugmentationConfig augmentation;
  std::vector<EnsembleMemberConfig> ensemble = DefaultEnsembleMembers();
  MetricOptions metrics;
  std::string output_dir = "runs/ablation";
  SeedRegistry seeds;

  static std::vector<EnsembleMemberConfig> DefaultEnsembleMembers();
  // Canonical JSON of every result-affecting field except the seeds.
  std::string CanonicalJson() const;
  std::string Hash() const;
  // Backbone for a registry name with this config's input resolution.
  BackboneSpec ResolveBackbone(const std::string& name) const;
};

struct ConfigOverride {
  std::string path;  // dotted, e.g. "student.epochs" or "seeds.data"
  std::string value;
};

// Parses YAML (JSON is accepted as a subset). Every problem is collected and
// reported at once in a ConfigError, one "source:line: field: message" per
// line. Relative dataset paths resolve against `base_dir`.
ExperimentConfig ParseExperimentConfig(const std::string& text,
                                       const std::string& source = "<config>",
                                       const std::string& base_dir = "",
                                       const std::vector<ConfigOverride>& overrides = {});
ExperimentConfig LoadExperimentConfig(const std::string& path,
                                      const std::vector<ConfigOverride>& overrides = {});

// Builds the (possibly noisy) dataset a config describes.
DatasetManifest BuildDataset(const ExperimentConfig& config);

// Seed for the video-level fold assignment.
uint64_t SplitSeed(const SeedRegistry& seeds);

// Training configuration for one ladder model: heads from `set` with the
// config's loss weights, teachers seeded by teacher_init and students by
// student_init (shared across folds), selection against observed labels.
DistillRunConfig MakeRunConfig(const ExperimentConfig& config,
                               const BackboneSpec& backbone, MultiTaskSet set,
                               double epsilon);

struct RungResult {
  std::string name;
  bool ok = true;
  std::string error;
  double cv_map = 0.0;  // NaN when undefined
  std::optional<double> cv_top_k;
  std::optional<double> test_map;
  std::optional<double> test_top_k;
  std::map<std::string, std::optional<double>> per_video;
  std::vector<std::string> checkpoint_hashes;

  friend bool operator==(const RungResult&, const RungResult&) = default;
};

struct AblationReport {
  std::string config_hash;
  std::map<std::string, uint64_t> seeds;
  std::string map_mode;
  std::string labels;
  int top_k = 5;
  int folds = 0;
  size_t cv_frames = 0;
  size_t test_frames = 0;
  std::vector<RungResult> rungs;

  friend bool operator==(const AblationReport&, const AblationReport&) = default;
};

inline const char* const kRungNames[] = {"backbone", "multitask",
                                         "self_distillation", "ensemble"};

// Runs the four-rung ladder on one manifest and one fold split, writing
// checkpoints, soft labels and prediction exports under config.output_dir
// (nothing is written when it is empty). A failing rung is reported with
// ok = false; rungs depending on it fail too.
AblationReport RunAblation(const ExperimentConfig& config, int workers = 1);

std::string FormatReportJson(const AblationReport& report);
AblationReport ParseReportJson(const std::string& text,
                               const std::string& source = "<report>");
std::string FormatReportText(const AblationReport& report);
// Writes report.json, report.txt and per_video.csv into `dir`.
void EmitReport(const AblationReport& report, const std::string& dir);

}  // namespace sdtriplet

#endif  // SDTRIPLET_EXPERIMENT_H_
