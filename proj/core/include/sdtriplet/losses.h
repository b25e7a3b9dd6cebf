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

#ifndef SDTRIPLET_LOSSES_H_
#define SDTRIPLET_LOSSES_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sdtriplet/network.h"

namespace sdtriplet {

double Sigmoid(double z);
std::vector<double> SigmoidProbs(std::span<const double> logits);

// Mean over elements of -[t log s(z) + (1-t) log(1-s(z))], evaluated from the
// logits as max(z,0) - z t + log1p(exp(-|z|)). Targets may be soft.
double MultilabelBceLoss(std::span<const double> logits,
                         std::span<const double> targets);
// d(MultilabelBceLoss)/dz = (s(z) - t) / n.
std::vector<double> MultilabelBceGradient(std::span<const double> logits,
                                          std::span<const double> targets);

// Softmax cross-entropy against a class index.
double PhaseCrossEntropy(std::span<const double> logits, int phase_id);
// Softmax cross-entropy against a target distribution (one-hot for hard
// labels).
double SoftmaxCrossEntropy(std::span<const double> logits,
                           std::span<const double> target_distribution);
std::vector<double> SoftmaxCrossEntropyGradient(
    std::span<const double> logits, std::span<const double> target_distribution);

// lr_min + (lr_max - lr_min)(1 + cos(pi t / T)) / 2, exact at both ends.
double CosineLr(int64_t step, int64_t total_steps, double lr_max,
                double lr_min);

// Per-head targets, each (head width x batch). Sigmoid heads take values in
// [0, 1]; the phase head takes a distribution per column.
template <typename Scalar>
struct HeadTargets {
  std::array<Matrix<Scalar>, kNumHeads> values;
  Matrix<Scalar>& operator[](Head h) { return values[static_cast<int>(h)]; }
  const Matrix<Scalar>& operator[](Head h) const {
    return values[static_cast<int>(h)];
  }
};

template <typename Scalar>
struct MultiTaskLoss {
  double total = 0.0;
  std::array<double, kNumHeads> per_head{};
  // d(total)/d(logits) per head, already scaled by the head weight.
  std::array<Matrix<Scalar>, kNumHeads> logit_grads;
};

// Sum over enabled heads of weight * head loss, where a head loss is the
// batch mean of the per-frame loss.
template <typename Scalar>
MultiTaskLoss<Scalar> ComputeMultiTaskLoss(const ForwardOutput<Scalar>& output,
                                           const HeadTargets<Scalar>& targets,
                                           const HeadConfig& heads);

extern template MultiTaskLoss<float> ComputeMultiTaskLoss(
    const ForwardOutput<float>&, const HeadTargets<float>&, const HeadConfig&);
extern template MultiTaskLoss<double> ComputeMultiTaskLoss(
    const ForwardOutput<double>&, const HeadTargets<double>&,
    const HeadConfig&);

}  // namespace sdtriplet

#endif  // SDTRIPLET_LOSSES_H_
