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

#ifndef SDTRIPLET_SOFT_LABELS_H_
#define SDTRIPLET_SOFT_LABELS_H_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "sdtriplet/datagen.h"

namespace sdtriplet {

// Teacher outputs for auxiliary heads of one frame: sigmoid probabilities for
// instrument/verb/target and the softmax distribution over phases. Empty
// vectors for heads the teacher does not have.
struct AuxSoftLabels {
  std::vector<double> instrument;
  std::vector<double> verb;
  std::vector<double> target;
  std::vector<double> phase;

  friend bool operator==(const AuxSoftLabels&, const AuxSoftLabels&) = default;
};

struct SoftLabelSet {
  int num_classes = 0;
  std::string teacher_hash;
  int fold_id = -1;
  double epsilon = 0.0;  // smoothing already applied
  std::map<FrameKey, std::vector<double>> triplet;
  std::map<FrameKey, AuxSoftLabels> aux;  // empty when not generated

  std::set<std::string> videos() const;
  friend bool operator==(const SoftLabelSet&, const SoftLabelSet&) = default;
};

// s' = (1 - eps) s + eps / 2 on every sigmoid target; phase distributions
// are smoothed towards uniform, q' = (1 - eps) q + eps / P.
SoftLabelSet SmoothSoftLabels(const SoftLabelSet& soft, double epsilon);

// Soft-label text format:
//
//   sdtriplet-softlabels 1
//   teacher <checkpoint hash>
//   fold <k>
//   epsilon <eps>
//   classes <C>
//   aux <I> <V> <T> <P>        (all zero when no auxiliary targets)
//   frames <N>
//   video_id,frame_idx,<C triplet values>[,<I+V+T+P aux values>]
//
// Values are written with 17 significant digits so the file round-trips
// exactly.
std::string FormatSoftLabels(const SoftLabelSet& soft);
SoftLabelSet ParseSoftLabels(const std::string& text,
                             const std::string& source = "<soft-labels>");
void SaveSoftLabels(const SoftLabelSet& soft, const std::string& path);
SoftLabelSet LoadSoftLabels(const std::string& path);

}  // namespace sdtriplet

#endif  // SDTRIPLET_SOFT_LABELS_H_
