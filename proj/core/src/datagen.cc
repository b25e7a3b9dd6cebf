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

#include "sdtriplet/datagen.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {

DatasetManifest::DatasetManifest(std::shared_ptr<const TripletVocabulary> vocab,
                                 std::vector<FrameRecord> frames,
                                 int num_phases)
    : vocab_(std::move(vocab)),
      frames_(std::move(frames)),
      num_phases_(num_phases) {
  if (!vocab_) throw ValidationError("manifest without vocabulary");
  if (num_phases_ < 1) throw ValidationError("manifest needs >= 1 phase");
  const size_t c = vocab_->num_classes();
  std::map<std::string, std::pair<int, int>> ranges;  // min, max
  for (size_t i = 0; i < frames_.size(); ++i) {
    const FrameRecord& f = frames_[i];
    if (f.video_id.empty() || f.frame_idx < 0) {
      throw ValidationError("frame " + std::to_string(i) +
                            " has an empty video id or negative index");
    }
    if (f.labels.size() != c ||
        (f.clean_labels && f.clean_labels->size() != c)) {
      throw ShapeError("frame " + f.video_id + "/" +
                       std::to_string(f.frame_idx) +
                       " label vector length differs from class count");
    }
    for (uint8_t v : f.labels) {
      if (v > 1) throw ValidationError("label entries must be 0 or 1");
    }
    if (f.phase < 0 || f.phase >= num_phases_) {
      throw ValidationError("frame " + f.video_id + "/" +
                            std::to_string(f.frame_idx) +
                            " phase out of range");
    }
    if (!index_.emplace(f.key(), i).second) {
      throw ValidationError("duplicate frame " + f.video_id + "/" +
                            std::to_string(f.frame_idx));
    }
    auto [it, inserted] =
        ranges.emplace(f.video_id, std::make_pair(f.frame_idx, f.frame_idx));
    if (!inserted) {
      it->second.first = std::min(it->second.first, f.frame_idx);
      it->second.second = std::max(it->second.second, f.frame_idx);
    }
  }
  for (const auto& [video, count] : frames_per_video()) {
    const auto& [lo, hi] = ranges[video];
    if (hi - lo + 1 != count) {
      throw ValidationError("frame indices of video " + video +
                            " are not contiguous");
    }
  }
}

std::vector<std::string> DatasetManifest::videos() const {
  std::set<std::string> ids;
  for (const FrameRecord& f : frames_) ids.insert(f.video_id);
  return {ids.begin(), ids.end()};
}

std::map<std::string, int> DatasetManifest::frames_per_video() const {
  std::map<std::string, int> counts;
  for (const FrameRecord& f : frames_) ++counts[f.video_id];
  return counts;
}

std::vector<size_t> DatasetManifest::FrameIndicesFor(
    const std::set<std::string>& videos) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < frames_.size(); ++i) {
    if (videos.count(frames_[i].video_id)) out.push_back(i);
  }
  return out;
}

const FrameRecord& DatasetManifest::at(const FrameKey& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) {
    throw CoverageError("frame " + key.first + "/" +
                        std::to_string(key.second) + " not in manifest");
  }
  return frames_[it->second];
}

PrevalenceTable ComputePrevalence(const DatasetManifest& manifest,
                                  bool use_clean_labels) {
  std::vector<LabelVector> labels;
  labels.reserve(manifest.frames().size());
  for (const FrameRecord& f : manifest.frames()) {
    labels.push_back(use_clean_labels ? f.reference_labels() : f.labels);
  }
  return ComputePrevalence(labels, manifest.num_classes());
}

void SyntheticSpec::Validate() const {
  if (n_videos < 1 || frames_per_video < 1) {
    throw ValidationError("n_videos and frames_per_video must be >= 1");
  }
  if (num_instruments < 1 || num_verbs < 1 || num_targets < 1) {
    throw ValidationError("component dimensions must be >= 1");
  }
  if (n_valid_triplets < 1 ||
      n_valid_triplets > num_instruments * num_verbs * num_targets) {
    throw ValidationError("n_valid_triplets must lie in [1, I*V*T]");
  }
  if (!(imbalance_exponent >= 0.0) || !std::isfinite(imbalance_exponent)) {
    throw ValidationError("imbalance_exponent must be a finite value >= 0");
  }
  if (max_triplets_per_frame < 1 || max_triplets_per_frame > 9 ||
      max_triplets_per_frame > n_valid_triplets) {
    throw ValidationError(
        "max_triplets_per_frame must lie in [1, min(9, n_valid_triplets)]");
  }
  if (num_phases < 1) throw ValidationError("num_phases must be >= 1");
  if (image_size < 12) throw ValidationError("image_size must be >= 12");
}

SyntheticDataset GenerateSyntheticDataset(const SyntheticSpec& spec) {
  spec.Validate();
  std::mt19937_64 rng(spec.rng_seed);

  std::vector<Triplet> grid;
  for (int i = 0; i < spec.num_instruments; ++i) {
    for (int v = 0; v < spec.num_verbs; ++v) {
      for (int t = 0; t < spec.num_targets; ++t) grid.push_back({i, v, t});
    }
  }
  std::shuffle(grid.begin(), grid.end(), rng);
  grid.resize(spec.n_valid_triplets);
  auto vocab = std::make_shared<const TripletVocabulary>(
      TripletVocabulary::NumberedComponents(spec.num_instruments,
                                            spec.num_verbs, spec.num_targets),
      grid);

  const int c = vocab->num_classes();
  std::vector<double> weights(c);
  for (int k = 0; k < c; ++k) {
    weights[k] = std::pow(static_cast<double>(k + 1), -spec.imbalance_exponent);
  }

  std::vector<FrameRecord> frames;
  frames.reserve(size_t(spec.n_videos) * spec.frames_per_video);
  uint64_t frame_counter = 0;
  for (int vid = 0; vid < spec.n_videos; ++vid) {
    char name[32];
    std::snprintf(name, sizeof(name), "video_%03d", vid);
    for (int f = 0; f < spec.frames_per_video; ++f) {
      FrameRecord rec;
      rec.video_id = name;
      rec.frame_idx = f;
      rec.phase = static_cast<int>(static_cast<int64_t>(f) * spec.num_phases /
                                   spec.frames_per_video);
      rec.labels.assign(c, 0);
      const int k = 1 + static_cast<int>(rng() % spec.max_triplets_per_frame);
      std::vector<double> remaining = weights;
      for (int draw = 0; draw < k; ++draw) {
        const double total =
            std::accumulate(remaining.begin(), remaining.end(), 0.0);
        double u = UniformUnit(rng) * total;
        int chosen = c - 1;
        for (int j = 0; j < c; ++j) {
          if (remaining[j] <= 0.0) continue;
          if (u < remaining[j]) {
            chosen = j;
            break;
          }
          u -= remaining[j];
        }
        while (remaining[chosen] <= 0.0) --chosen;
        rec.labels[chosen] = 1;
        remaining[chosen] = 0.0;
      }
      rec.image = "synth:" + std::to_string(spec.image_size) + ":" +
                  std::to_string(MixSeed(spec.rng_seed, frame_counter++));
      frames.push_back(std::move(rec));
    }
  }
  DatasetManifest manifest(vocab, std::move(frames), spec.num_phases);
  return {vocab, std::move(manifest)};
}

NoiseMode ParseNoiseMode(const std::string& name) {
  if (name == "swap_one_component") return NoiseMode::kSwapOneComponent;
  if (name == "drop_triplet") return NoiseMode::kDropTriplet;
  if (name == "add_triplet") return NoiseMode::kAddTriplet;
  throw ValidationError("unknown noise mode '" + name + "'");
}

std::string NoiseModeName(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kSwapOneComponent:
      return "swap_one_component";
    case NoiseMode::kDropTriplet:
      return "drop_triplet";
    case NoiseMode::kAddTriplet:
      return "add_triplet";
  }
  return "unknown";
}

DatasetManifest InjectLabelNoise(const DatasetManifest& manifest,
                                 const NoiseConfig& config,
                                 NoiseReport* report) {
  if (!(config.rate >= 0.0 && config.rate <= 1.0)) {
    throw ValidationError("noise rate must lie in [0, 1]");
  }
  const TripletVocabulary& vocab = manifest.vocab();
  const int c = vocab.num_classes();
  std::vector<std::vector<int>> neighbors(c);
  for (int k = 0; k < c; ++k) neighbors[k] = vocab.OneComponentNeighbors(k);

  std::mt19937_64 rng(config.rng_seed);
  NoiseReport local;
  std::vector<FrameRecord> frames = manifest.frames();
  for (FrameRecord& f : frames) {
    if (!f.clean_labels) f.clean_labels = f.labels;
    const LabelVector source = f.labels;
    LabelVector noisy(c, 0);
    for (int k = 0; k < c; ++k) {
      if (!source[k]) continue;
      ++local.labels_considered;
      const bool corrupt = UniformUnit(rng) < config.rate;
      const uint64_t pick = rng();
      if (!corrupt) {
        noisy[k] = 1;
        continue;
      }
      switch (config.mode) {
        case NoiseMode::kDropTriplet:
          ++local.labels_changed;
          break;
        case NoiseMode::kSwapOneComponent:
        case NoiseMode::kAddTriplet: {
          const auto& nb = neighbors[k];
          if (config.mode == NoiseMode::kAddTriplet) noisy[k] = 1;
          if (nb.empty()) {
            noisy[k] = 1;
            ++local.skipped_no_neighbor;
            break;
          }
          noisy[nb[pick % nb.size()]] = 1;
          ++local.labels_changed;
          break;
        }
      }
    }
    f.labels = std::move(noisy);
  }
  if (report) *report = local;
  DatasetManifest out(manifest.vocab_ptr(), std::move(frames),
                      manifest.num_phases());
  out.set_base_dir(manifest.base_dir());
  out.set_vocab_path(manifest.vocab_path());
  return out;
}

std::vector<FoldSplit> MakeFoldSplits(const std::vector<std::string>& videos,
                                      int n_folds, uint64_t rng_seed) {
  std::vector<std::string> order(videos);
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (n_folds < 2) throw ValidationError("need at least 2 folds");
  if (static_cast<int>(order.size()) < n_folds) {
    throw ValidationError("fewer videos (" + std::to_string(order.size()) +
                          ") than folds (" + std::to_string(n_folds) + ")");
  }
  std::mt19937_64 rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<FoldSplit> folds(n_folds);
  for (int k = 0; k < n_folds; ++k) folds[k].fold_id = k;
  for (size_t i = 0; i < order.size(); ++i) {
    folds[i % n_folds].val_videos.insert(order[i]);
  }
  for (FoldSplit& fold : folds) {
    for (const std::string& v : order) {
      if (!fold.val_videos.count(v)) fold.train_videos.insert(v);
    }
  }
  return folds;
}

std::vector<FoldSplit> MakeFoldSplits(const DatasetManifest& manifest,
                                      int n_folds, uint64_t rng_seed) {
  return MakeFoldSplits(manifest.videos(), n_folds, rng_seed);
}

std::string FormatFoldSplits(const std::vector<FoldSplit>& folds) {
  std::string out = "sdtriplet-folds 1\n";
  for (const FoldSplit& fold : folds) {
    for (const std::string& v : fold.val_videos) {
      out += std::to_string(fold.fold_id) + "," + v + "\n";
    }
  }
  return out;
}

std::vector<FoldSplit> ParseFoldSplits(const std::string& text,
                                       const std::string& source) {
  const auto lines = Split(text, '\n');
  if (lines.empty() || Trim(lines[0]) != "sdtriplet-folds 1") {
    throw ParseError(source, 1, "expected header 'sdtriplet-folds 1'");
  }
  std::map<int, std::set<std::string>> val;
  std::set<std::string> all;
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = Trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = Split(line, ',');
    int fold = -1;
    try {
      fold = std::stoi(fields[0]);
    } catch (const std::exception&) {
    }
    if (fields.size() != 2 || fold < 0 || fields[1].empty()) {
      throw ParseError(source, static_cast<int>(i + 1),
                       "expected 'fold_id,video_id'");
    }
    if (!all.insert(fields[1]).second) {
      throw ParseError(source, static_cast<int>(i + 1),
                       "video " + fields[1] + " assigned twice");
    }
    val[fold].insert(fields[1]);
  }
  std::vector<FoldSplit> folds;
  for (const auto& [id, videos] : val) {
    if (id != static_cast<int>(folds.size())) {
      throw ParseError(source, 0, "fold ids are not contiguous from 0");
    }
    FoldSplit split;
    split.fold_id = id;
    split.val_videos = videos;
    for (const std::string& v : all) {
      if (!videos.count(v)) split.train_videos.insert(v);
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

}  // namespace sdtriplet
