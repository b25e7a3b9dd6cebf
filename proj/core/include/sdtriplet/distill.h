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

#ifndef SDTRIPLET_DISTILL_H_
#define SDTRIPLET_DISTILL_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sdtriplet/augment.h"
#include "sdtriplet/checkpoint.h"
#include "sdtriplet/datagen.h"
#include "sdtriplet/metrics.h"
#include "sdtriplet/network.h"
#include "sdtriplet/predictions.h"
#include "sdtriplet/soft_labels.h"

namespace sdtriplet {

struct OptimizerConfig {
  double lr_max = 2e-4;
  double lr_min = 2e-6;
  int batch_size = 64;
  int epochs = 20;
  uint64_t weight_init_seed = 1;
  // Drives shuffling and augmentation draws.
  uint64_t data_seed = 1;

  void Validate() const;
};

struct ModelConfig {
  BackboneSpec backbone;
  HeadConfig heads;
  AugmentationConfig augmentation;
};

enum class SoftTargetScope { kTripletOnly, kAllHeads };
enum class CheckpointRule { kFinalEpoch, kBestValMap };

SoftTargetScope ParseSoftTargetScope(const std::string& name);
std::string SoftTargetScopeName(SoftTargetScope scope);
CheckpointRule ParseCheckpointRule(const std::string& name);
std::string CheckpointRuleName(CheckpointRule rule);

struct DistillRunConfig {
  ModelConfig model;
  OptimizerConfig teacher{2e-4, 2e-6, 64, 20, 1, 1};
  OptimizerConfig student{2e-4, 2e-6, 64, 40, 2, 2};
  double epsilon = 0.0;  // label smoothing on the soft labels
  SoftTargetScope scope = SoftTargetScope::kTripletOnly;
  double alpha = 1.0;  // soft share of the triplet target
  CheckpointRule teacher_rule = CheckpointRule::kFinalEpoch;
  CheckpointRule student_rule = CheckpointRule::kBestValMap;
  // Labels the per-epoch validation mAP is computed against.
  LabelSource val_labels = LabelSource::kObserved;

  void Validate() const;
};

// Source images loaded on first use and kept for the lifetime of the cache.
// Safe to share between threads.
class FrameImageCache {
 public:
  explicit FrameImageCache(const DatasetManifest& manifest);
  const Image& Get(size_t frame_index);

 private:
  const DatasetManifest& manifest_;
  std::mutex mutex_;
  std::vector<std::unique_ptr<Image>> images_;
};

// Training targets for one frame. Sigmoid heads hold values in [0, 1]; the
// phase entry is a distribution.
struct FrameTargets {
  std::vector<double> triplet, instrument, verb, target, phase;
};

FrameTargets HardTargets(const DatasetManifest& manifest, const FrameRecord& frame);

struct TrainingRun {
  Checkpoint checkpoint;
  int selected_epoch = 0;
  // Validation triplet probabilities of the selected weights.
  PredictionSet val_predictions;
};

// Generic mini-batch loop shared by teacher and student: Adam, per-step
// cosine schedule, augmentation of every training frame, validation mAP
// after every epoch. Deterministic for fixed seeds.
TrainingRun TrainModel(const DatasetManifest& manifest, FrameImageCache& images,
                       const std::vector<size_t>& train_frames,
                       const std::vector<size_t>& val_frames,
                       const std::vector<FrameTargets>& targets,
                       const ModelConfig& model, const OptimizerConfig& optimizer,
                       CheckpointRule rule, LabelSource val_labels,
                       const std::string& role, int fold_id);

// Index of the best epoch in `curve` (earliest on ties, NaN ranks lowest).
int SelectBestEpoch(const std::vector<EpochLog>& curve);

// Deterministic-resize, eval-mode inference.
PredictionSet PredictTriplets(const Network<float>& network,
                              const DatasetManifest& manifest,
                              FrameImageCache& images,
                              const std::vector<size_t>& frames);

TrainingRun TrainTeacher(const DatasetManifest& manifest, FrameImageCache& images,
                         const FoldSplit& fold, const DistillRunConfig& config);

// Teacher probabilities over the fold's training frames. Auxiliary heads are
// included when the teacher has them.
SoftLabelSet GenerateSoftLabels(const Checkpoint& teacher,
                                const DatasetManifest& manifest,
                                FrameImageCache& images, const FoldSplit& fold);

// Throws CoverageError listing gaps, or when soft labels touch validation
// videos.
void CheckSoftLabelCoverage(const SoftLabelSet& soft,
                            const DatasetManifest& manifest,
                            const FoldSplit& fold);

TrainingRun TrainStudent(const DatasetManifest& manifest, FrameImageCache& images,
                         const FoldSplit& fold, const SoftLabelSet& soft,
                         const DistillRunConfig& config);

struct FoldArtifacts {
  int fold_id = 0;
  std::string teacher_path, student_path, soft_label_path;
  std::string teacher_hash, student_hash;
  TrainingRun teacher;
  TrainingRun student;
};

struct FoldProtocolResult {
  std::vector<FoldArtifacts> folds;
};

// Teacher -> soft labels -> (smoothing) -> student for every fold. Teachers
// share config.teacher.weight_init_seed and students share
// config.student.weight_init_seed. Artifacts are written to
// <out_dir>/fold_<k>/; protocol.json records completed folds, and a failing
// fold leaves it in place with the error before rethrowing. With workers > 1
// folds run on separate threads; results do not depend on the worker count.
FoldProtocolResult RunFoldProtocol(const DatasetManifest& manifest,
                                   const std::vector<FoldSplit>& folds,
                                   const DistillRunConfig& config,
                                   const std::string& out_dir, int workers = 1,
                                   FrameImageCache* images = nullptr);

}  // namespace sdtriplet

#endif  // SDTRIPLET_DISTILL_H_
