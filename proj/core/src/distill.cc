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

#include "sdtriplet/distill.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "sdtriplet/errors.h"
#include "sdtriplet/losses.h"
#include "sdtriplet/util.h"

namespace sdtriplet {

void OptimizerConfig::Validate() const {
  if (!(lr_min >= 0.0) || !(lr_min <= lr_max)) {
    throw ConfigError("need 0 <= lr_min <= lr_max");
  }
  if (epochs <= 0) throw ConfigError("epochs must be > 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
}

void DistillRunConfig::Validate() const {
  model.backbone.Validate();
  model.heads.Validate();
  model.augmentation.Validate();
  teacher.Validate();
  student.Validate();
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw ConfigError("smoothing epsilon must lie in [0, 1)");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
}

SoftTargetScope ParseSoftTargetScope(const std::string& name) {
  if (name == "triplet_only") return SoftTargetScope::kTripletOnly;
  if (name == "all_heads") return SoftTargetScope::kAllHeads;
  throw ValidationError("unknown soft target scope '" + name + "'");
}

std::string SoftTargetScopeName(SoftTargetScope scope) {
  return scope == SoftTargetScope::kTripletOnly ? "triplet_only" : "all_heads";
}

CheckpointRule ParseCheckpointRule(const std::string& name) {
  if (name == "final") return CheckpointRule::kFinalEpoch;
  if (name == "best_val_map") return CheckpointRule::kBestValMap;
  throw ValidationError("unknown checkpoint rule '" + name + "'");
}

std::string CheckpointRuleName(CheckpointRule rule) {
  return rule == CheckpointRule::kFinalEpoch ? "final" : "best_val_map";
}

FrameImageCache::FrameImageCache(const DatasetManifest& manifest)
    : manifest_(manifest), images_(manifest.frames().size()) {}

const Image& FrameImageCache::Get(size_t frame_index) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = images_.at(frame_index);
  if (!slot) {
    slot = std::make_unique<Image>(
        LoadFrameImage(manifest_, manifest_.frames()[frame_index]));
  }
  return *slot;
}

FrameTargets HardTargets(const DatasetManifest& manifest, const FrameRecord& frame) {
  const ComponentLabels comp = manifest.vocab().ComponentMultiHot(frame.labels);
  const auto to_double = [](const LabelVector& v) {
    return std::vector<double>(v.begin(), v.end());
  };
  FrameTargets t;
  t.triplet = to_double(frame.labels);
  t.instrument = to_double(comp.instrument);
  t.verb = to_double(comp.verb);
  t.target = to_double(comp.target);
  t.phase.assign(manifest.num_phases(), 0.0);
  t.phase[frame.phase] = 1.0;
  return t;
}

namespace {

HeadDims DimsFor(const DatasetManifest& manifest) {
  const TripletVocabulary& v = manifest.vocab();
  return {v.num_classes(), v.num_instruments(), v.num_verbs(), v.num_targets(),
          manifest.num_phases()};
}

const std::vector<double>& TargetFor(const FrameTargets& t, Head head) {
  switch (head) {
    case Head::kTriplet:
      return t.triplet;
    case Head::kInstrument:
      return t.instrument;
    case Head::kVerb:
      return t.verb;
    case Head::kTarget:
      return t.target;
    case Head::kPhase:
      return t.phase;
  }
  return t.triplet;
}

// Resized inputs for a fixed frame list, prepared once per batch.
struct PreparedBatches {
  std::vector<Matrix<float>> inputs;
  std::vector<std::vector<size_t>> frames;
};

PreparedBatches PrepareEvalBatches(const Network<float>& network,
                                   FrameImageCache& images,
                                   const std::vector<size_t>& frames,
                                   int batch_size = 64) {
  PreparedBatches out;
  const int size = network.backbone().input_size;
  for (size_t start = 0; start < frames.size(); start += batch_size) {
    const size_t end = std::min(frames.size(), start + batch_size);
    std::vector<Image> resized;
    resized.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      resized.push_back(Resize(images.Get(frames[i]), size, size));
    }
    std::vector<const Image*> ptrs;
    for (const Image& im : resized) ptrs.push_back(&im);
    out.inputs.push_back(network.PrepareInput(ptrs));
    out.frames.emplace_back(frames.begin() + start, frames.begin() + end);
  }
  return out;
}

PredictionSet PredictPrepared(const Network<float>& network,
                              const DatasetManifest& manifest,
                              const PreparedBatches& batches) {
  PredictionSet out(manifest.num_classes());
  for (size_t b = 0; b < batches.inputs.size(); ++b) {
    const auto& frames = batches.frames[b];
    const ForwardOutput<float> fwd = network.Forward(
        batches.inputs[b], static_cast<int>(frames.size()), nullptr);
    const Matrix<float>& z = fwd[Head::kTriplet];
    for (size_t i = 0; i < frames.size(); ++i) {
      std::vector<double> probs(z.rows());
      for (Eigen::Index k = 0; k < z.rows(); ++k) probs[k] = Sigmoid(z(k, i));
      out.Set(manifest.frames()[frames[i]].key(), std::move(probs));
    }
  }
  return out;
}

double ValidationMap(const PredictionSet& predictions,
                     const DatasetManifest& manifest, LabelSource labels) {
  if (predictions.empty()) return std::nan("");
  MetricOptions options;
  options.labels = labels;
  return TripletMap(predictions, manifest, options).map;
}

}  // namespace

int SelectBestEpoch(const std::vector<EpochLog>& curve) {
  if (curve.empty()) throw ValidationError("empty training curve");
  int best = -1;
  for (size_t i = 0; i < curve.size(); ++i) {
    if (std::isnan(curve[i].val_map)) continue;
    if (best < 0 || curve[i].val_map > curve[best].val_map) best = static_cast<int>(i);
  }
  return best < 0 ? static_cast<int>(curve.size()) - 1 : best;
}

PredictionSet PredictTriplets(const Network<float>& network,
                              const DatasetManifest& manifest,
                              FrameImageCache& images,
                              const std::vector<size_t>& frames) {
  return PredictPrepared(network, manifest,
                         PrepareEvalBatches(network, images, frames));
}

TrainingRun TrainModel(const DatasetManifest& manifest, FrameImageCache& images,
                       const std::vector<size_t>& train_frames,
                       const std::vector<size_t>& val_frames,
                       const std::vector<FrameTargets>& targets,
                       const ModelConfig& model, const OptimizerConfig& optimizer,
                       CheckpointRule rule, LabelSource val_labels,
                       const std::string& role, int fold_id) {
  optimizer.Validate();
  model.augmentation.Validate();
  if (train_frames.empty()) throw ValidationError("empty training split");
  if (targets.size() != train_frames.size()) {
    throw ShapeError("need one target record per training frame");
  }
  AugmentationConfig augmentation = model.augmentation;
  augmentation.out_height = augmentation.out_width = model.backbone.input_size;

  Network<float> network(model.backbone, model.heads, DimsFor(manifest),
                         optimizer.weight_init_seed);
  Adam adam(network.num_params());
  std::mt19937_64 rng(optimizer.data_seed);
  const PreparedBatches val_batches = PrepareEvalBatches(network, images, val_frames);

  const int64_t n = static_cast<int64_t>(train_frames.size());
  const int64_t steps_per_epoch = (n + optimizer.batch_size - 1) / optimizer.batch_size;
  const int64_t total_steps = steps_per_epoch * optimizer.epochs;
  int64_t step = 0;

  std::vector<size_t> order(train_frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> grad(network.num_params());
  ForwardCache<float> cache;
  std::vector<EpochLog> curve;
  std::vector<float> kept_params;
  PredictionSet kept_predictions(manifest.num_classes());
  double best_map = -1.0;
  int kept_epoch = 0;

  for (int epoch = 1; epoch <= optimizer.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double lr = optimizer.lr_max;
    for (int64_t start = 0; start < n; start += optimizer.batch_size) {
      const int64_t end = std::min(n, start + optimizer.batch_size);
      const int batch = static_cast<int>(end - start);
      std::vector<Image> augmented;
      augmented.reserve(batch);
      for (int64_t i = start; i < end; ++i) {
        augmented.push_back(
            Augment(images.Get(train_frames[order[i]]), augmentation, rng));
      }
      std::vector<const Image*> ptrs;
      for (const Image& im : augmented) ptrs.push_back(&im);
      const Matrix<float> input = network.PrepareInput(ptrs);
      const ForwardOutput<float> out = network.Forward(input, batch, &cache);

      HeadTargets<float> head_targets;
      for (int h = 0; h < kNumHeads; ++h) {
        const Head head = static_cast<Head>(h);
        if (!model.heads.enabled(head)) continue;
        Matrix<float>& t = head_targets[head];
        t.resize(out.logits[h].rows(), batch);
        for (int b = 0; b < batch; ++b) {
          const auto& values = TargetFor(targets[order[start + b]], head);
          if (static_cast<Eigen::Index>(values.size()) != t.rows()) {
            throw ShapeError(std::string("target width mismatch for head '") +
                             HeadName(head) + "'");
          }
          for (Eigen::Index k = 0; k < t.rows(); ++k) {
            t(k, b) = static_cast<float>(values[k]);
          }
        }
      }
      const MultiTaskLoss<float> loss =
          ComputeMultiTaskLoss(out, head_targets, model.heads);
      loss_sum += loss.total * batch;
      std::fill(grad.begin(), grad.end(), 0.f);
      network.Backward(cache, loss.logit_grads, grad);
      lr = CosineLr(step, total_steps, optimizer.lr_max, optimizer.lr_min);
      adam.Step(network.params(), grad, lr);
      ++step;
    }

    PredictionSet val_predictions = PredictPrepared(network, manifest, val_batches);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(n);
    log.val_map = ValidationMap(val_predictions, manifest, val_labels);
    log.lr_end = lr;
    if (!std::isfinite(log.train_loss)) {
      throw NumericError(role + " training diverged at epoch " + std::to_string(epoch));
    }
    curve.push_back(log);

    const bool improved = !std::isnan(log.val_map) && log.val_map > best_map;
    const bool keep = rule == CheckpointRule::kFinalEpoch || val_frames.empty()
                          ? epoch == optimizer.epochs
                          : improved;
    if (improved) best_map = log.val_map;
    if (keep) {
      kept_params.assign(network.params().begin(), network.params().end());
      kept_predictions = std::move(val_predictions);
      kept_epoch = epoch;
    }
  }
  if (kept_params.empty()) {
    // Best rule without any defined validation mAP: fall back to the final
    // weights.
    kept_params.assign(network.params().begin(), network.params().end());
    kept_predictions = PredictPrepared(network, manifest, val_batches);
    kept_epoch = optimizer.epochs;
  }

  TrainingRun run;
  Checkpoint& c = run.checkpoint;
  c.backbone = model.backbone;
  c.heads = model.heads;
  c.dims = DimsFor(manifest);
  c.role = role;
  c.fold_id = fold_id;
  c.epoch = kept_epoch;
  c.val_map = curve[kept_epoch - 1].val_map;
  c.seeds = {{"weight_init", optimizer.weight_init_seed},
             {"data", optimizer.data_seed}};
  c.curve = std::move(curve);
  c.params = std::move(kept_params);
  run.selected_epoch = kept_epoch;
  run.val_predictions = std::move(kept_predictions);
  return run;
}

TrainingRun TrainTeacher(const DatasetManifest& manifest, FrameImageCache& images,
                         const FoldSplit& fold, const DistillRunConfig& config) {
  config.Validate();
  const auto train = manifest.FrameIndicesFor(fold.train_videos);
  const auto val = manifest.FrameIndicesFor(fold.val_videos);
  std::vector<FrameTargets> targets;
  targets.reserve(train.size());
  for (size_t i : train) targets.push_back(HardTargets(manifest, manifest.frames()[i]));
  return TrainModel(manifest, images, train, val, targets, config.model,
                    config.teacher, config.teacher_rule, config.val_labels,
                    "teacher", fold.fold_id);
}

SoftLabelSet GenerateSoftLabels(const Checkpoint& teacher,
                                const DatasetManifest& manifest,
                                FrameImageCache& images, const FoldSplit& fold) {
  if (teacher.fold_id != fold.fold_id) {
    throw ValidationError("teacher checkpoint belongs to fold " +
                          std::to_string(teacher.fold_id) + ", not fold " +
                          std::to_string(fold.fold_id));
  }
  const Network<float> network = teacher.ToNetwork();
  if (network.dims().triplet != manifest.num_classes()) {
    throw ShapeError("teacher class count differs from the manifest vocabulary");
  }
  const auto frames = manifest.FrameIndicesFor(fold.train_videos);
  const PreparedBatches batches = PrepareEvalBatches(network, images, frames);

  SoftLabelSet soft;
  soft.num_classes = manifest.num_classes();
  soft.teacher_hash = teacher.Hash();
  soft.fold_id = fold.fold_id;
  const HeadConfig& heads = network.heads();
  const bool has_aux = heads.instrument || heads.verb || heads.target || heads.phase;
  for (size_t b = 0; b < batches.inputs.size(); ++b) {
    const auto& idx = batches.frames[b];
    const ForwardOutput<float> out =
        network.Forward(batches.inputs[b], static_cast<int>(idx.size()), nullptr);
    for (size_t i = 0; i < idx.size(); ++i) {
      const FrameKey key = manifest.frames()[idx[i]].key();
      const auto sigmoid_column = [&](Head h) {
        const Matrix<float>& z = out[h];
        std::vector<double> p;
        if (z.size() == 0) return p;
        p.resize(z.rows());
        for (Eigen::Index k = 0; k < z.rows(); ++k) p[k] = Sigmoid(z(k, i));
        return p;
      };
      soft.triplet[key] = sigmoid_column(Head::kTriplet);
      if (!has_aux) continue;
      AuxSoftLabels aux;
      aux.instrument = sigmoid_column(Head::kInstrument);
      aux.verb = sigmoid_column(Head::kVerb);
      aux.target = sigmoid_column(Head::kTarget);
      const Matrix<float>& zp = out[Head::kPhase];
      if (zp.size() != 0) {
        std::vector<double> logits(zp.rows());
        for (Eigen::Index k = 0; k < zp.rows(); ++k) logits[k] = zp(k, i);
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double& v : logits) sum += (v = std::exp(v - m));
        for (double& v : logits) v /= sum;
        aux.phase = std::move(logits);
      }
      soft.aux[key] = std::move(aux);
    }
  }
  return soft;
}

void CheckSoftLabelCoverage(const SoftLabelSet& soft,
                            const DatasetManifest& manifest,
                            const FoldSplit& fold) {
  if (soft.num_classes != manifest.num_classes()) {
    throw ShapeError("soft labels have " + std::to_string(soft.num_classes) +
                     " classes, manifest has " +
                     std::to_string(manifest.num_classes()));
  }
  std::vector<std::string> problems;
  for (const auto& [key, _] : soft.triplet) {
    if (fold.val_videos.count(key.first)) {
      problems.push_back("validation frame " + key.first + "/" +
                         std::to_string(key.second) + " present");
    } else if (!manifest.contains(key) || !fold.train_videos.count(key.first)) {
      problems.push_back("unknown frame " + key.first + "/" +
                         std::to_string(key.second));
    }
  }
  for (size_t i : manifest.FrameIndicesFor(fold.train_videos)) {
    const FrameKey key = manifest.frames()[i].key();
    if (!soft.triplet.count(key)) {
      problems.push_back("missing " + key.first + "/" + std::to_string(key.second));
    }
  }
  if (problems.empty()) return;
  std::string message = "soft labels do not match the training split of fold " +
                        std::to_string(fold.fold_id) + " (" +
                        std::to_string(problems.size()) + " issues):";
  for (size_t i = 0; i < std::min<size_t>(problems.size(), 10); ++i) {
    message += " " + problems[i] + ";";
  }
  throw CoverageError(message);
}

TrainingRun TrainStudent(const DatasetManifest& manifest, FrameImageCache& images,
                         const FoldSplit& fold, const SoftLabelSet& soft,
                         const DistillRunConfig& config) {
  config.Validate();
  CheckSoftLabelCoverage(soft, manifest, fold);
  const auto train = manifest.FrameIndicesFor(fold.train_videos);
  const auto val = manifest.FrameIndicesFor(fold.val_videos);
  const double a = config.alpha;
  const auto blend = [a](std::vector<double>& hard, const std::vector<double>& s) {
    if (s.empty()) return;
    if (s.size() != hard.size()) throw ShapeError("soft target width mismatch");
    for (size_t k = 0; k < hard.size(); ++k) hard[k] = a * s[k] + (1.0 - a) * hard[k];
  };
  std::vector<FrameTargets> targets;
  targets.reserve(train.size());
  for (size_t i : train) {
    const FrameRecord& f = manifest.frames()[i];
    FrameTargets t = HardTargets(manifest, f);
    blend(t.triplet, soft.triplet.at(f.key()));
    if (config.scope == SoftTargetScope::kAllHeads) {
      const auto it = soft.aux.find(f.key());
      if (it != soft.aux.end()) {
        blend(t.instrument, it->second.instrument);
        blend(t.verb, it->second.verb);
        blend(t.target, it->second.target);
        blend(t.phase, it->second.phase);
      }
    }
    targets.push_back(std::move(t));
  }
  return TrainModel(manifest, images, train, val, targets, config.model,
                    config.student, config.student_rule, config.val_labels,
                    "student", fold.fold_id);
}

namespace {

void WriteProtocolStatus(const std::string& out_dir,
                         const std::vector<int>& completed, int failed_fold,
                         const std::string& error) {
  if (out_dir.empty()) return;
  nlohmann::json j;
  j["completed_folds"] = completed;
  j["status"] = failed_fold < 0 ? "ok" : "failed";
  if (failed_fold >= 0) {
    j["failed_fold"] = failed_fold;
    j["error"] = error;
  }
  WriteTextFile(out_dir + "/protocol.json", j.dump(2) + "\n");
}

}  // namespace

FoldProtocolResult RunFoldProtocol(const DatasetManifest& manifest,
                                   const std::vector<FoldSplit>& folds,
                                   const DistillRunConfig& config,
                                   const std::string& out_dir, int workers,
                                   FrameImageCache* images) {
  config.Validate();
  if (folds.empty()) throw ValidationError("no folds to run");
  std::unique_ptr<FrameImageCache> owned;
  if (!images) {
    owned = std::make_unique<FrameImageCache>(manifest);
    images = owned.get();
  }
  FoldProtocolResult result;
  result.folds.resize(folds.size());
  std::vector<std::string> errors(folds.size());
  std::vector<char> done(folds.size(), 0);
  std::mutex status_mutex;

  const auto run_fold = [&](size_t index) {
    const FoldSplit& fold = folds[index];
    FoldArtifacts art;
    art.fold_id = fold.fold_id;
    art.teacher = TrainTeacher(manifest, *images, fold, config);
    SoftLabelSet soft = GenerateSoftLabels(art.teacher.checkpoint, manifest, *images, fold);
    soft = SmoothSoftLabels(soft, config.epsilon);
    art.student = TrainStudent(manifest, *images, fold, soft, config);
    art.teacher_hash = art.teacher.checkpoint.Hash();
    art.student_hash = art.student.checkpoint.Hash();
    if (!out_dir.empty()) {
      const std::string dir = out_dir + "/fold_" + std::to_string(fold.fold_id);
      art.teacher_path = dir + "/teacher.ckpt";
      art.student_path = dir + "/student.ckpt";
      art.soft_label_path = dir + "/soft_labels.csv";
      SaveCheckpoint(art.teacher.checkpoint, art.teacher_path);
      SaveSoftLabels(soft, art.soft_label_path);
      SaveCheckpoint(art.student.checkpoint, art.student_path);
    }
    result.folds[index] = std::move(art);
  };

  std::atomic<size_t> next{0};
  const auto worker = [&] {
    while (true) {
      const size_t index = next.fetch_add(1);
      if (index >= folds.size()) return;
      try {
        run_fold(index);
        std::lock_guard<std::mutex> lock(status_mutex);
        done[index] = 1;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(status_mutex);
        errors[index] = e.what();
      }
    }
  };
  const int threads = std::clamp(workers, 1, static_cast<int>(folds.size()));
  if (threads == 1) {
    for (size_t i = 0; i < folds.size(); ++i) {
      next = i;
      try {
        run_fold(i);
        done[i] = 1;
      } catch (const std::exception& e) {
        errors[i] = e.what();
        break;
      }
    }
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<int> completed;
  for (size_t i = 0; i < folds.size(); ++i) {
    if (done[i]) completed.push_back(folds[i].fold_id);
  }
  for (size_t i = 0; i < folds.size(); ++i) {
    if (!errors[i].empty()) {
      WriteProtocolStatus(out_dir, completed, folds[i].fold_id, errors[i]);
      throw Error("fold " + std::to_string(folds[i].fold_id) + " failed: " + errors[i]);
    }
  }
  WriteProtocolStatus(out_dir, completed, -1, "");
  return result;
}

}  // namespace sdtriplet
