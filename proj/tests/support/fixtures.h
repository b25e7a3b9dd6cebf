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


// Small hand-built datasets shared by the unit tests.

#ifndef SDTRIPLET_TESTS_SUPPORT_FIXTURES_H_
#define SDTRIPLET_TESTS_SUPPORT_FIXTURES_H_

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sdtriplet/datagen.h"
#include "sdtriplet/distill.h"
#include "sdtriplet/vocab.h"

namespace sdtriplet::testing {

inline std::shared_ptr<const TripletVocabulary> FullVocab(int i, int v, int t) {
  return std::make_shared<const TripletVocabulary>(TripletVocabulary::Full(i, v, t));
}

inline LabelVector Labels(int num_classes, std::initializer_list<int> active) {
  LabelVector out(num_classes, 0);
  for (int c : active) out[c] = 1;
  return out;
}

// One frame per entry of `labels`; frame indices restart per video.
inline DatasetManifest MakeManifest(std::shared_ptr<const TripletVocabulary> vocab,
                                    const std::vector<std::string>& videos,
                                    const std::vector<LabelVector>& labels,
                                    int num_phases = 3) {
  std::vector<FrameRecord> frames;
  std::map<std::string, int> next;
  for (size_t f = 0; f < labels.size(); ++f) {
    FrameRecord r;
    r.video_id = videos[f];
    r.frame_idx = next[videos[f]]++;
    r.image = "synth:16:" + std::to_string(f + 1);
    r.labels = labels[f];
    r.phase = static_cast<int>(f) % num_phases;
    frames.push_back(std::move(r));
  }
  return DatasetManifest(std::move(vocab), std::move(frames), num_phases);
}

inline SyntheticSpec TinySpec(uint64_t seed) {
  SyntheticSpec spec;
  spec.n_videos = 6;
  spec.frames_per_video = 8;
  spec.num_instruments = 2;
  spec.num_verbs = 3;
  spec.num_targets = 2;
  spec.n_valid_triplets = 8;
  spec.num_phases = 3;
  spec.image_size = 16;
  spec.rng_seed = seed;
  return spec;
}

// A few-second training setup matching TinySpec images.
inline DistillRunConfig TinyRunConfig(int teacher_epochs = 2, int student_epochs = 3) {
  DistillRunConfig c;
  c.model.backbone.input_size = 16;
  c.model.backbone.stem_pool = 2;
  c.model.backbone.conv_channels = {4, 8, 8};
  c.model.backbone.embedding_dim = 16;
  c.model.augmentation.out_height = c.model.augmentation.out_width = 16;
  for (OptimizerConfig* o : {&c.teacher, &c.student}) {
    o->lr_max = 3e-3;
    o->lr_min = 3e-5;
    o->batch_size = 8;
  }
  c.teacher.epochs = teacher_epochs;
  c.student.epochs = student_epochs;
  return c;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "sdtriplet-XXXXXX").string();
    path_ = mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

}  // namespace sdtriplet::testing

#endif  // SDTRIPLET_TESTS_SUPPORT_FIXTURES_H_
