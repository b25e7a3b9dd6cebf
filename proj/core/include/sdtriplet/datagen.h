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

#ifndef SDTRIPLET_DATAGEN_H_
#define SDTRIPLET_DATAGEN_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sdtriplet/image.h"
#include "sdtriplet/vocab.h"

namespace sdtriplet {

// (video_id, frame_idx); ordering is the canonical row order everywhere.
using FrameKey = std::pair<std::string, int>;

struct FrameRecord {
  std::string video_id;
  int frame_idx = 0;
  // "synth:<size>:<seed>" for procedurally rendered frames, otherwise a PPM
  // path relative to the manifest's base directory.
  std::string image;
  LabelVector labels;  // observed annotation, possibly noisy
  int phase = 0;
  std::optional<LabelVector> clean_labels;

  FrameKey key() const { return {video_id, frame_idx}; }
  // Clean labels when retained, otherwise the observed ones.
  const LabelVector& reference_labels() const {
    return clean_labels ? *clean_labels : labels;
  }

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// An ordered list of frames over one vocabulary. Construction validates that
// (video, frame) keys are unique and frame indices are contiguous per video.
class DatasetManifest {
 public:
  DatasetManifest(std::shared_ptr<const TripletVocabulary> vocab,
                  std::vector<FrameRecord> frames, int num_phases);

  const TripletVocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const TripletVocabulary> vocab_ptr() const { return vocab_; }
  const std::vector<FrameRecord>& frames() const { return frames_; }
  int num_phases() const { return num_phases_; }
  int num_classes() const { return vocab_->num_classes(); }

  // Sorted unique video ids.
  std::vector<std::string> videos() const;
  std::map<std::string, int> frames_per_video() const;
  // Indices of frames whose video is in `videos`.
  std::vector<size_t> FrameIndicesFor(const std::set<std::string>& videos) const;
  const FrameRecord& at(const FrameKey& key) const;
  bool contains(const FrameKey& key) const { return index_.count(key) != 0; }

  // Where relative image paths resolve; set by LoadManifest.
  const std::string& base_dir() const { return base_dir_; }
  void set_base_dir(std::string dir) { base_dir_ = std::move(dir); }
  // Vocabulary reference written into the manifest header.
  const std::string& vocab_path() const { return vocab_path_; }
  void set_vocab_path(std::string path) { vocab_path_ = std::move(path); }

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return *a.vocab_ == *b.vocab_ && a.frames_ == b.frames_ &&
           a.num_phases_ == b.num_phases_;
  }

 private:
  std::shared_ptr<const TripletVocabulary> vocab_;
  std::vector<FrameRecord> frames_;
  int num_phases_;
  std::map<FrameKey, size_t> index_;
  std::string base_dir_;
  std::string vocab_path_ = "vocab.txt";
};

PrevalenceTable ComputePrevalence(const DatasetManifest& manifest,
                                  bool use_clean_labels = false);

struct SyntheticSpec {
  int n_videos = 50;
  int frames_per_video = 100;
  int num_instruments = 3;
  int num_verbs = 4;
  int num_targets = 5;
  int n_valid_triplets = 20;
  // Class k (in vocabulary order) is drawn with weight (k + 1)^-exponent.
  double imbalance_exponent = 2.0;
  int max_triplets_per_frame = 2;
  int num_phases = 7;
  int image_size = 56;
  uint64_t rng_seed = 1;

  void Validate() const;
};

struct SyntheticDataset {
  std::shared_ptr<const TripletVocabulary> vocab;
  DatasetManifest manifest;
};

// Video ids are "video_NNN"; phases are contiguous equal segments of each
// video. Images are "synth:" references rendered on demand.
SyntheticDataset GenerateSyntheticDataset(const SyntheticSpec& spec);

enum class NoiseMode { kSwapOneComponent, kDropTriplet, kAddTriplet };

struct NoiseConfig {
  double rate = 0.0;
  NoiseMode mode = NoiseMode::kSwapOneComponent;
  uint64_t rng_seed = 1;
};

struct NoiseReport {
  int64_t labels_considered = 0;
  int64_t labels_changed = 0;
  int64_t skipped_no_neighbor = 0;
};

// Corrupts observed labels; clean labels are kept (or first recorded) in
// FrameRecord::clean_labels. One Bernoulli draw per active label in class
// order, so the draw stream depends only on the clean labels.
DatasetManifest InjectLabelNoise(const DatasetManifest& manifest,
                                 const NoiseConfig& config,
                                 NoiseReport* report = nullptr);

NoiseMode ParseNoiseMode(const std::string& name);
std::string NoiseModeName(NoiseMode mode);

struct FoldSplit {
  int fold_id = 0;
  std::set<std::string> train_videos;
  std::set<std::string> val_videos;
};

// Video-level partition: videos are shuffled with `rng_seed` and dealt
// round-robin, so validation sets differ in size by at most one.
std::vector<FoldSplit> MakeFoldSplits(const std::vector<std::string>& videos,
                                      int n_folds, uint64_t rng_seed);
std::vector<FoldSplit> MakeFoldSplits(const DatasetManifest& manifest,
                                      int n_folds, uint64_t rng_seed);

std::string FormatFoldSplits(const std::vector<FoldSplit>& folds);
std::vector<FoldSplit> ParseFoldSplits(const std::string& text,
                                       const std::string& source = "<folds>");

// Manifest text format:
//
//   sdtriplet-manifest 1
//   vocab <path relative to the manifest>
//   phases <P>
//   classes <C>
//   frames <N>
//   video_id,frame_idx,image,labels,phase,clean_labels     (N rows)
//
// Label lists are ';'-separated class ids (empty for none); clean_labels is
// '-' when no clean copy is kept.
std::string FormatManifest(const DatasetManifest& manifest);
DatasetManifest ParseManifest(const std::string& text,
                              std::shared_ptr<const TripletVocabulary> vocab,
                              const std::string& source = "<manifest>");
void SaveManifest(const DatasetManifest& manifest, const std::string& path);
// Loads the vocabulary named in the header as well.
DatasetManifest LoadManifest(const std::string& path);

Image LoadFrameImage(const DatasetManifest& manifest, const FrameRecord& frame);

}  // namespace sdtriplet

#endif  // SDTRIPLET_DATAGEN_H_
