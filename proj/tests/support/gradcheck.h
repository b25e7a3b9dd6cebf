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


// Central-difference probes of the analytic gradients on a small
// double-precision network.

#ifndef SDTRIPLET_TESTS_SUPPORT_GRADCHECK_H_
#define SDTRIPLET_TESTS_SUPPORT_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sdtriplet/image.h"
#include "sdtriplet/losses.h"
#include "sdtriplet/network.h"

namespace sdtriplet::testing {

inline BackboneSpec ProbeBackbone() {
  BackboneSpec b;
  b.name = "probe";
  b.input_size = 8;
  b.stem_pool = 2;
  b.conv_channels = {3, 4};
  b.embedding_dim = 6;
  return b;
}

inline HeadDims ProbeDims() { return {5, 2, 3, 2, 3}; }

struct ProbeProblem {
  Network<double> net;
  std::vector<Image> images;
  HeadTargets<double> targets;

  std::vector<const Image*> batch() const {
    std::vector<const Image*> out;
    for (const Image& img : images) out.push_back(&img);
    return out;
  }
};

inline ProbeProblem MakeProbeProblem(const HeadConfig& heads, int batch,
                                     uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProbeProblem p{Network<double>(ProbeBackbone(), heads, ProbeDims(), seed), {}, {}};
  // Small random biases keep ReLUs away from their kink at zero.
  for (double& w : p.net.params()) w += 0.05 * (UniformUnit(rng) - 0.5);
  for (int b = 0; b < batch; ++b) {
    Image img(8, 8);
    for (float& px : img.pixels) px = static_cast<float>(UniformUnit(rng));
    p.images.push_back(std::move(img));
  }
  const HeadDims dims = ProbeDims();
  for (int h = 0; h < kNumHeads; ++h) {
    const Head head = static_cast<Head>(h);
    if (!heads.enabled(head)) continue;
    Matrix<double> t(dims.of(head), batch);
    for (int b = 0; b < batch; ++b) {
      double sum = 0.0;
      for (int r = 0; r < t.rows(); ++r) {
        t(r, b) = UniformUnit(rng);
        sum += t(r, b);
      }
      if (head == Head::kPhase) {
        for (int r = 0; r < t.rows(); ++r) t(r, b) /= sum;
      }
    }
    p.targets[head] = std::move(t);
  }
  return p;
}

inline double ProbeLoss(const ProbeProblem& p, const std::vector<double>& params) {
  Network<double> net(p.net.backbone(), p.net.heads(), p.net.dims(), params);
  const auto batch = p.batch();
  const auto input = net.PrepareInput(batch);
  const auto out = net.Forward(input, static_cast<int>(batch.size()), nullptr);
  return ComputeMultiTaskLoss(out, p.targets, p.net.heads()).total;
}

inline std::vector<double> ProbeGradient(const ProbeProblem& p) {
  const auto batch = p.batch();
  const auto input = p.net.PrepareInput(batch);
  ForwardCache<double> cache;
  const auto out = p.net.Forward(input, static_cast<int>(batch.size()), &cache);
  const auto loss = ComputeMultiTaskLoss(out, p.targets, p.net.heads());
  std::vector<double> grad(p.net.num_params(), 0.0);
  p.net.Backward(cache, loss.logit_grads, grad);
  return grad;
}

// Relative error |a - f| / max(|a|, |f|) between the analytic directional
// derivative along a random unit direction and its central difference.
inline double DirectionalProbe(const ProbeProblem& p, const std::vector<double>& grad,
                               std::mt19937_64& rng, double eps) {
  std::normal_distribution<double> normal;
  std::vector<double> d(grad.size());
  double norm = 0.0;
  for (double& x : d) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  double analytic = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    d[i] /= norm;
    analytic += grad[i] * d[i];
  }
  std::vector<double> plus(p.net.params().begin(), p.net.params().end());
  std::vector<double> minus = plus;
  for (size_t i = 0; i < d.size(); ++i) {
    plus[i] += eps * d[i];
    minus[i] -= eps * d[i];
  }
  const double numeric = (ProbeLoss(p, plus) - ProbeLoss(p, minus)) / (2 * eps);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

}  // namespace sdtriplet::testing

#endif  // SDTRIPLET_TESTS_SUPPORT_GRADCHECK_H_
