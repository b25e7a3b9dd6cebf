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

#ifndef SDTRIPLET_ENSEMBLE_H_
#define SDTRIPLET_ENSEMBLE_H_

#include <span>
#include <string>
#include <vector>

#include "sdtriplet/checkpoint.h"
#include "sdtriplet/datagen.h"
#include "sdtriplet/distill.h"
#include "sdtriplet/predictions.h"

namespace sdtriplet {

struct CheckpointRef {
  std::string path;
  std::string sha256;  // Checkpoint::Hash() of the stored model
};

// One trained configuration: its fold models are averaged first.
struct EnsembleMember {
  std::string name;
  std::string description;  // free text, e.g. "tiny-conv + MT(ivt) + SD"
  double weight = 1.0;
  std::vector<CheckpointRef> folds;
};

// Ensemble spec file (JSON):
//
//   {"expected_folds": 5,
//    "members": [{"name": "A", "weight": 1.0, "description": "...",
//                 "checkpoints": [{"path": "...", "sha256": "..."}, ...]}]}
//
// Relative checkpoint paths resolve against the spec file's directory.
struct EnsembleSpec {
  std::vector<EnsembleMember> members;
  int expected_folds = 5;

  void Validate() const;
};

EnsembleSpec ParseEnsembleSpec(const std::string& text,
                               const std::string& base_dir = "",
                               const std::string& source = "<ensemble>");
std::string FormatEnsembleSpec(const EnsembleSpec& spec);
EnsembleSpec LoadEnsembleSpec(const std::string& path);

// Elementwise mean over sets with identical frame coverage. Throws
// CoverageError naming differing frames and ShapeError on class-count
// mismatch. The result is independent of input order and never leaves the
// elementwise [min, max] of the inputs.
PredictionSet AverageFoldPredictions(std::span<const PredictionSet> sets);
// Same with non-negative weights (sum > 0), normalised internally.
PredictionSet WeightedAveragePredictions(std::span<const PredictionSet> sets,
                                         std::span<const double> weights);

// Fold-averaged predictions of one configuration's models over `frames`.
PredictionSet FoldAveragedPredictions(std::span<const Checkpoint> folds,
                                      const DatasetManifest& manifest,
                                      FrameImageCache& images,
                                      const std::vector<size_t>& frames);

struct EnsembleOutput {
  PredictionSet ensemble;
  std::vector<PredictionSet> members;  // fold averages, in spec order
};

// Loads every checkpoint (IntegrityError on a digest mismatch with the spec),
// predicts every manifest frame with deterministic resizing and averages
// over folds, then over members by weight.
EnsembleOutput EnsemblePredict(const EnsembleSpec& spec,
                               const DatasetManifest& manifest,
                               FrameImageCache& images, int workers = 1);

}  // namespace sdtriplet

#endif  // SDTRIPLET_ENSEMBLE_H_
