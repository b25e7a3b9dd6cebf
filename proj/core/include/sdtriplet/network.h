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

#ifndef SDTRIPLET_NETWORK_H_
#define SDTRIPLET_NETWORK_H_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdtriplet/image.h"

namespace sdtriplet {

// Backbone description. "tiny-conv" variants are realised here; the Swin
// entries describe the full-scale backbones and cannot be instantiated in
// this build.
struct BackboneSpec {
  std::string name = "tiny-conv";
  int embedding_dim = 128;
  bool pretrained = false;
  int input_size = 224;
  int stem_pool = 8;                  // fixed average-pool downsampling
  std::vector<int> conv_channels = {8, 16, 32};
  bool realizable = true;

  void Validate() const;
  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

const std::vector<BackboneSpec>& BackboneRegistry();
// Throws ConfigError listing the registry entries when `name` is unknown.
BackboneSpec LookupBackbone(const std::string& name);

enum class Head { kTriplet = 0, kInstrument, kVerb, kTarget, kPhase };
inline constexpr int kNumHeads = 5;
const char* HeadName(Head head);

struct HeadConfig {
  bool instrument = false;
  bool verb = false;
  bool target = false;
  bool phase = false;
  double w_triplet = 1.0;
  double w_instrument = 1.0;
  double w_verb = 1.0;
  double w_target = 1.0;
  double w_phase = 1.0;

  bool enabled(Head head) const;
  double weight(Head head) const;
  void Validate() const;

  static HeadConfig TripletOnly() { return {}; }
  static HeadConfig MultiTask(bool with_phase) {
    HeadConfig c;
    c.instrument = c.verb = c.target = true;
    c.phase = with_phase;
    return c;
  }
  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

// Output widths: C triplets, I instruments, V verbs, T targets, P phases.
struct HeadDims {
  int triplet = 0;
  int instrument = 0;
  int verb = 0;
  int target = 0;
  int phase = 0;

  int of(Head head) const;
  friend bool operator==(const HeadDims&, const HeadDims&) = default;
};

template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Logits per head, each (head width x batch); disabled heads are empty.
template <typename Scalar>
struct ForwardOutput {
  std::array<Matrix<Scalar>, kNumHeads> logits;
  const Matrix<Scalar>& operator[](Head h) const {
    return logits[static_cast<int>(h)];
  }
};

// Activations kept by a training forward pass for the backward pass.
template <typename Scalar>
struct ForwardCache {
  int batch = 0;
  std::vector<Matrix<Scalar>> block_input;   // per conv block (C x B*H*W)
  std::vector<Matrix<Scalar>> block_cols;    // im2col of block input
  std::vector<Matrix<Scalar>> block_preact;  // conv output before ReLU
  Matrix<Scalar> pooled;                     // global average pool (C x B)
  Matrix<Scalar> embed_preact;
  Matrix<Scalar> embed;
};

// tiny-conv: fixed average-pool stem, conv3x3+ReLU blocks (2x2 average pool
// between blocks), global average pool, ReLU embedding, one linear layer per
// enabled head. All parameters live in one flat vector.
template <typename Scalar>
class Network {
 public:
  Network(BackboneSpec backbone, HeadConfig heads, HeadDims dims,
          uint64_t init_seed);
  Network(BackboneSpec backbone, HeadConfig heads, HeadDims dims,
          std::vector<Scalar> params);

  const BackboneSpec& backbone() const { return backbone_; }
  const HeadConfig& heads() const { return heads_; }
  const HeadDims& dims() const { return dims_; }

  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }
  size_t num_params() const { return params_.size(); }

  // Applies the stem pooling and converts a batch of input_size^2 images to
  // the (3 x B*s*s) layout the first block consumes.
  Matrix<Scalar> PrepareInput(std::span<const Image* const> images) const;

  // Eval-mode forward: a pure function of (params, input).
  ForwardOutput<Scalar> Forward(std::span<const Image* const> images) const;
  ForwardOutput<Scalar> Forward(const Matrix<Scalar>& prepared, int batch,
                                ForwardCache<Scalar>* cache) const;

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
  void Backward(const ForwardCache<Scalar>& cache,
                const std::array<Matrix<Scalar>, kNumHeads>& logit_grads,
                std::span<Scalar> grad) const;

 private:
  struct Block {
    int in_channels, out_channels, size;  // size = input spatial side
    size_t weight_offset, bias_offset;
  };
  struct Linear {
    int in, out;
    size_t weight_offset, bias_offset;
  };

  void Layout();

  BackboneSpec backbone_;
  HeadConfig heads_;
  HeadDims dims_;
  std::vector<Block> blocks_;
  Linear embed_{};
  std::array<Linear, kNumHeads> head_layers_{};
  std::vector<Scalar> params_;
};

extern template class Network<float>;
extern template class Network<double>;

// Adam with bias correction; the learning rate is supplied per step.
class Adam {
 public:
  explicit Adam(size_t num_params, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void Step(std::span<float> params, std::span<const float> grad, double lr);
  int64_t steps() const { return step_; }

 private:
  double beta1_, beta2_, epsilon_;
  int64_t step_ = 0;
  std::vector<float> m_, v_;
};

}  // namespace sdtriplet

#endif  // SDTRIPLET_NETWORK_H_
