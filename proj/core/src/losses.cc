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

#include "sdtriplet/losses.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sdtriplet/errors.h"

namespace sdtriplet {
namespace {

void CheckPair(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size()) {
    throw ShapeError("logits and targets differ in length");
  }
  if (logits.empty()) throw ShapeError("empty logit vector");
  for (size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i]) || std::isnan(targets[i])) {
      throw NumericError("NaN in loss input");
    }
    if (targets[i] < 0.0 || targets[i] > 1.0) {
      throw RangeError("target outside [0, 1]");
    }
  }
}

double BceTerm(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

double LogSumExp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> SigmoidProbs(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), Sigmoid);
  return out;
}

double MultilabelBceLoss(std::span<const double> logits,
                         std::span<const double> targets) {
  CheckPair(logits, targets);
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) sum += BceTerm(logits[i], targets[i]);
  return sum / static_cast<double>(logits.size());
}

std::vector<double> MultilabelBceGradient(std::span<const double> logits,
                                          std::span<const double> targets) {
  CheckPair(logits, targets);
  std::vector<double> g(logits.size());
  const double n = static_cast<double>(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    g[i] = (Sigmoid(logits[i]) - targets[i]) / n;
  }
  return g;
}

double PhaseCrossEntropy(std::span<const double> logits, int phase_id) {
  if (logits.empty()) throw ShapeError("empty logit vector");
  if (phase_id < 0 || phase_id >= static_cast<int>(logits.size())) {
    throw IndexError("phase id " + std::to_string(phase_id) + " out of range");
  }
  for (double z : logits) {
    if (std::isnan(z)) throw NumericError("NaN in loss input");
  }
  return LogSumExp(logits) - logits[phase_id];
}

double SoftmaxCrossEntropy(std::span<const double> logits,
                           std::span<const double> target_distribution) {
  CheckPair(logits, target_distribution);
  const double lse = LogSumExp(logits);
  double loss = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    loss += target_distribution[i] * (lse - logits[i]);
  }
  return loss;
}

std::vector<double> SoftmaxCrossEntropyGradient(
    std::span<const double> logits, std::span<const double> target_distribution) {
  CheckPair(logits, target_distribution);
  const double lse = LogSumExp(logits);
  double mass = 0.0;
  for (double q : target_distribution) mass += q;
  std::vector<double> g(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    g[i] = mass * std::exp(logits[i] - lse) - target_distribution[i];
  }
  return g;
}

double CosineLr(int64_t step, int64_t total_steps, double lr_max,
                double lr_min) {
  if (total_steps <= 0) throw RangeError("total_steps must be > 0");
  if (step < 0 || step > total_steps) {
    throw RangeError("step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  }
  if (lr_min > lr_max) throw RangeError("lr_min exceeds lr_max");
  if (step == 0) return lr_max;
  if (step == total_steps) return lr_min;
  const double phase = std::numbers::pi * static_cast<double>(step) /
                       static_cast<double>(total_steps);
  const double lr = lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
  return std::clamp(lr, lr_min, lr_max);
}

template <typename Scalar>
MultiTaskLoss<Scalar> ComputeMultiTaskLoss(const ForwardOutput<Scalar>& output,
                                           const HeadTargets<Scalar>& targets,
                                           const HeadConfig& heads) {
  MultiTaskLoss<Scalar> result;
  for (int h = 0; h < kNumHeads; ++h) {
    const Head head = static_cast<Head>(h);
    if (!heads.enabled(head)) continue;
    const Matrix<Scalar>& z = output.logits[h];
    const Matrix<Scalar>& t = targets.values[h];
    if (z.size() == 0) {
      throw ConfigError(std::string("no logits for enabled head '") +
                        HeadName(head) + "'");
    }
    if (t.size() == 0) {
      throw ConfigError(std::string("missing target for enabled head '") +
                        HeadName(head) + "'");
    }
    if (t.rows() != z.rows() || t.cols() != z.cols()) {
      throw ShapeError(std::string("target shape mismatch for head '") +
                       HeadName(head) + "'");
    }
    const double weight = heads.weight(head);
    const Eigen::Index batch = z.cols();
    Matrix<Scalar> grad(z.rows(), z.cols());
    double loss = 0.0;
    if (head == Head::kPhase) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        double m = -INFINITY;
        for (Eigen::Index i = 0; i < z.rows(); ++i) m = std::max(m, double(z(i, b)));
        double s = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) s += std::exp(double(z(i, b)) - m);
        const double lse = m + std::log(s);
        double mass = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
          const double q = double(t(i, b));
          if (std::isnan(q) || std::isnan(double(z(i, b)))) {
            throw NumericError("NaN in loss input");
          }
          loss += q * (lse - double(z(i, b)));
          mass += q;
        }
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
          grad(i, b) = static_cast<Scalar>(
              weight * (mass * std::exp(double(z(i, b)) - lse) - double(t(i, b))) /
              double(batch));
        }
      }
      loss /= double(batch);
    } else {
      const double n = double(z.size());
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index b = 0; b < batch; ++b) {
          const double zi = double(z(i, b)), ti = double(t(i, b));
          if (std::isnan(zi) || std::isnan(ti)) {
            throw NumericError("NaN in loss input");
          }
          loss += BceTerm(zi, ti);
          grad(i, b) = static_cast<Scalar>(weight * (Sigmoid(zi) - ti) / n);
        }
      }
      loss /= n;
    }
    result.per_head[h] = loss;
    result.total += weight * loss;
    result.logit_grads[h] = std::move(grad);
  }
  return result;
}

template MultiTaskLoss<float> ComputeMultiTaskLoss(const ForwardOutput<float>&,
                                                   const HeadTargets<float>&,
                                                   const HeadConfig&);
template MultiTaskLoss<double> ComputeMultiTaskLoss(const ForwardOutput<double>&,
                                                    const HeadTargets<double>&,
                                                    const HeadConfig&);

}  // namespace sdtriplet
