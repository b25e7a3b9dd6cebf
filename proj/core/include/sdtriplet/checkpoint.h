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

#ifndef SDTRIPLET_CHECKPOINT_H_
#define SDTRIPLET_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdtriplet/network.h"

namespace sdtriplet {

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_map = 0.0;  // NaN when no validation frames were scored
  double lr_end = 0.0;
};

// Parameters plus everything needed to rebuild and audit the model.
//
// File layout:
//   "sdtriplet-checkpoint 1\n"
//   "sha256 <hex digest of the next line and the parameter bytes>\n"
//   <one-line JSON metadata>\n
//   <num_params little-endian float32 values>
struct Checkpoint {
  BackboneSpec backbone;
  HeadConfig heads;
  HeadDims dims;
  std::string role;  // "teacher" | "student"
  int fold_id = -1;
  int epoch = 0;           // epoch whose weights are stored
  double val_map = 0.0;    // validation triplet mAP at that epoch
  std::map<std::string, uint64_t> seeds;
  std::vector<EpochLog> curve;
  std::vector<float> params;

  std::string Hash() const;
  Network<float> ToNetwork() const;
};

void SaveCheckpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws IntegrityError when the stored digest does not match the content.
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace sdtriplet

#endif  // SDTRIPLET_CHECKPOINT_H_
