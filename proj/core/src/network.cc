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

#include "sdtriplet/network.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "sdtriplet/errors.h"

namespace sdtriplet {

void BackboneSpec::Validate() const {
  if (embedding_dim <= 0) throw ConfigError("embedding_dim must be > 0");
  if (conv_channels.empty()) throw ConfigError("backbone has no conv blocks");
  for (int c : conv_channels) {
    if (c <= 0) throw ConfigError("conv channel counts must be > 0");
  }
  if (stem_pool < 1 || input_size < 1 || input_size % stem_pool != 0) {
    throw ConfigError("input_size must be a positive multiple of stem_pool");
  }
  int side = input_size / stem_pool;
  for (size_t k = 0; k + 1 < conv_channels.size(); ++k) {
    if (side % 2 != 0 || side < 2) {
      throw ConfigError("feature map side " + std::to_string(side) +
                        " cannot be halved before block " +
                        std::to_string(k + 2));
    }
    side /= 2;
  }
}

const std::vector<BackboneSpec>& BackboneRegistry() {
  static const std::vector<BackboneSpec> registry = [] {
    std::vector<BackboneSpec> r;
    r.push_back(BackboneSpec{});
    BackboneSpec large;
    large.name = "tiny-conv-large";
    large.embedding_dim = 192;
    large.conv_channels = {12, 24, 48};
    r.push_back(large);
    BackboneSpec swin_base;
    swin_base.name = "swin-base";
    swin_base.embedding_dim = 1024;
    swin_base.pretrained = true;
    swin_base.realizable = false;
    r.push_back(swin_base);
    BackboneSpec swin_large = swin_base;
    swin_large.name = "swin-large";
    swin_large.embedding_dim = 1536;
    r.push_back(swin_large);
    return r;
  }();
  return registry;
}

BackboneSpec LookupBackbone(const std::string& name) {
  std::string known;
  for (const BackboneSpec& spec : BackboneRegistry()) {
    if (spec.name == name) return spec;
    known += (known.empty() ? "" : ", ") + spec.name;
  }
  throw ConfigError("unknown backbone '" + name + "'; registry: " + known);
}

const char* HeadName(Head head) {
  switch (head) {
    case Head::kTriplet:
      return "triplet";
    case Head::kInstrument:
      return "instrument";
    case Head::kVerb:
      return "verb";
    case Head::kTarget:
      return "target";
    case Head::kPhase:
      return "phase";
  }
  return "?";
}

bool HeadConfig::enabled(Head head) const {
  switch (head) {
    case Head::kTriplet:
      return true;
    case Head::kInstrument:
      return instrument;
    case Head::kVerb:
      return verb;
    case Head::kTarget:
      return target;
    case Head::kPhase:
      return phase;
  }
  return false;
}

double HeadConfig::weight(Head head) const {
  switch (head) {
    case Head::kTriplet:
      return w_triplet;
    case Head::kInstrument:
      return w_instrument;
    case Head::kVerb:
      return w_verb;
    case Head::kTarget:
      return w_target;
    case Head::kPhase:
      return w_phase;
  }
  return 0.0;
}

void HeadConfig::Validate() const {
  for (double w : {w_triplet, w_instrument, w_verb, w_target, w_phase}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("head loss weights must be finite and >= 0");
    }
  }
  if (!(w_triplet > 0.0)) throw ConfigError("w_triplet must be > 0");
}

int HeadDims::of(Head head) const {
  switch (head) {
    case Head::kTriplet:
      return triplet;
    case Head::kInstrument:
      return instrument;
    case Head::kVerb:
      return verb;
    case Head::kTarget:
      return target;
    case Head::kPhase:
      return phase;
  }
  return 0;
}

namespace {

template <typename Scalar>
using ConstMap = Eigen::Map<const Matrix<Scalar>>;
template <typename Scalar>
using MutMap = Eigen::Map<Matrix<Scalar>>;

// 3x3, stride 1, zero padding 1. Input (C x B*S*S), output (9C x B*S*S).
template <typename Scalar>
Matrix<Scalar> Im2Col(const Matrix<Scalar>& in, int batch, int side) {
  const int channels = static_cast<int>(in.rows());
  const int area = side * side;
  Matrix<Scalar> cols(channels * 9, static_cast<Eigen::Index>(batch) * area);
  for (int c = 0; c < channels; ++c) {
    const Scalar* src = in.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (int b = 0; b < batch; ++b) {
          const Scalar* plane = src + static_cast<size_t>(b) * area;
          Scalar* out = dst + static_cast<size_t>(b) * area;
          for (int y = 0; y < side; ++y) {
            const int yy = y + ky - 1;
            Scalar* row = out + y * side;
            if (yy < 0 || yy >= side) {
              std::fill(row, row + side, Scalar(0));
              continue;
            }
            const Scalar* in_row = plane + yy * side;
            for (int x = 0; x < side; ++x) {
              const int xx = x + kx - 1;
              row[x] = (xx < 0 || xx >= side) ? Scalar(0) : in_row[xx];
            }
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
Matrix<Scalar> Col2Im(const Matrix<Scalar>& cols, int channels, int batch,
                      int side) {
  const int area = side * side;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(
      channels, static_cast<Eigen::Index>(batch) * area);
  for (int c = 0; c < channels; ++c) {
    Scalar* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (int b = 0; b < batch; ++b) {
          Scalar* plane = dst + static_cast<size_t>(b) * area;
          const Scalar* in = src + static_cast<size_t>(b) * area;
          for (int y = 0; y < side; ++y) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= side) continue;
            Scalar* out_row = plane + yy * side;
            const Scalar* in_row = in + y * side;
            for (int x = 0; x < side; ++x) {
              const int xx = x + kx - 1;
              if (xx >= 0 && xx < side) out_row[xx] += in_row[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> AvgPool2(const Matrix<Scalar>& in, int batch, int side) {
  const int half = side / 2;
  Matrix<Scalar> out(in.rows(), static_cast<Eigen::Index>(batch) * half * half);
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const Scalar* src = in.row(c).data();
    Scalar* dst = out.row(c).data();
    for (int b = 0; b < batch; ++b) {
      const Scalar* plane = src + static_cast<size_t>(b) * side * side;
      Scalar* o = dst + static_cast<size_t>(b) * half * half;
      for (int y = 0; y < half; ++y) {
        for (int x = 0; x < half; ++x) {
          const Scalar* p = plane + (2 * y) * side + 2 * x;
          o[y * half + x] = Scalar(0.25) * (p[0] + p[1] + p[side] + p[side + 1]);
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> AvgPool2Backward(const Matrix<Scalar>& grad, int batch,
                                int side) {
  const int half = side / 2;
  Matrix<Scalar> out(grad.rows(), static_cast<Eigen::Index>(batch) * side * side);
  for (Eigen::Index c = 0; c < grad.rows(); ++c) {
    const Scalar* src = grad.row(c).data();
    Scalar* dst = out.row(c).data();
    for (int b = 0; b < batch; ++b) {
      const Scalar* g = src + static_cast<size_t>(b) * half * half;
      Scalar* plane = dst + static_cast<size_t>(b) * side * side;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          plane[y * side + x] = Scalar(0.25) * g[(y / 2) * half + (x / 2)];
        }
      }
    }
  }
  return out;
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(BackboneSpec backbone, HeadConfig heads, HeadDims dims,
                         uint64_t init_seed)
    : backbone_(std::move(backbone)), heads_(heads), dims_(dims) {
  Layout();
  std::mt19937_64 rng(init_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](size_t offset, size_t count, double stddev) {
    for (size_t i = 0; i < count; ++i) {
      params_[offset + i] = static_cast<Scalar>(normal(rng) * stddev);
    }
  };
  for (const Block& b : blocks_) {
    fill(b.weight_offset, size_t(b.out_channels) * b.in_channels * 9,
         std::sqrt(2.0 / (b.in_channels * 9)));
  }
  fill(embed_.weight_offset, size_t(embed_.out) * embed_.in,
       std::sqrt(2.0 / embed_.in));
  for (int h = 0; h < kNumHeads; ++h) {
    const Linear& l = head_layers_[h];
    if (l.out == 0) continue;
    fill(l.weight_offset, size_t(l.out) * l.in, std::sqrt(1.0 / l.in));
  }
}

template <typename Scalar>
Network<Scalar>::Network(BackboneSpec backbone, HeadConfig heads, HeadDims dims,
                         std::vector<Scalar> params)
    : backbone_(std::move(backbone)), heads_(heads), dims_(dims) {
  Layout();
  if (params.size() != params_.size()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                     " entries, architecture needs " +
                     std::to_string(params_.size()));
  }
  params_ = std::move(params);
}

template <typename Scalar>
void Network<Scalar>::Layout() {
  if (!backbone_.realizable) {
    throw ConfigError("backbone '" + backbone_.name +
                      "' has no realisation in this build");
  }
  backbone_.Validate();
  heads_.Validate();
  if (dims_.triplet <= 0) throw ConfigError("triplet head needs >= 1 class");
  size_t offset = 0;
  int channels = 3;
  int side = backbone_.input_size / backbone_.stem_pool;
  for (size_t k = 0; k < backbone_.conv_channels.size(); ++k) {
    Block b{channels, backbone_.conv_channels[k], side, 0, 0};
    b.weight_offset = offset;
    offset += size_t(b.out_channels) * b.in_channels * 9;
    b.bias_offset = offset;
    offset += b.out_channels;
    blocks_.push_back(b);
    channels = b.out_channels;
    if (k + 1 < backbone_.conv_channels.size()) side /= 2;
  }
  embed_ = {channels, backbone_.embedding_dim, offset, 0};
  offset += size_t(embed_.in) * embed_.out;
  embed_.bias_offset = offset;
  offset += embed_.out;
  for (int h = 0; h < kNumHeads; ++h) {
    const Head head = static_cast<Head>(h);
    if (!heads_.enabled(head)) continue;
    const int width = dims_.of(head);
    if (width <= 0) {
      throw ConfigError(std::string("enabled head '") + HeadName(head) +
                        "' has zero width");
    }
    Linear l{backbone_.embedding_dim, width, offset, 0};
    offset += size_t(l.in) * l.out;
    l.bias_offset = offset;
    offset += l.out;
    head_layers_[h] = l;
  }
  params_.assign(offset, Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> Network<Scalar>::PrepareInput(
    std::span<const Image* const> images) const {
  if (images.empty()) throw ShapeError("empty batch");
  const int size = backbone_.input_size;
  const int f = backbone_.stem_pool;
  const int side = size / f;
  const int area = side * side;
  const Scalar norm = Scalar(1) / Scalar(f * f);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(
      3, static_cast<Eigen::Index>(images.size()) * area);
  for (size_t b = 0; b < images.size(); ++b) {
    const Image& img = *images[b];
    img.Validate();
    if (img.height != size || img.width != size) {
      throw ShapeError("expected " + std::to_string(size) + "x" +
                       std::to_string(size) + "x3 input, got " +
                       std::to_string(img.height) + "x" +
                       std::to_string(img.width) + "x3");
    }
    for (int y = 0; y < size; ++y) {
      const float* row = &img.pixels[size_t(y) * size * 3];
      const size_t out_row = b * area + size_t(y / f) * side;
      for (int x = 0; x < size; ++x) {
        const size_t j = out_row + x / f;
        out(0, j) += row[3 * x];
        out(1, j) += row[3 * x + 1];
        out(2, j) += row[3 * x + 2];
      }
    }
  }
  out *= norm;
  return out;
}

template <typename Scalar>
ForwardOutput<Scalar> Network<Scalar>::Forward(
    std::span<const Image* const> images) const {
  return Forward(PrepareInput(images), static_cast<int>(images.size()), nullptr);
}

template <typename Scalar>
ForwardOutput<Scalar> Network<Scalar>::Forward(const Matrix<Scalar>& prepared,
                                               int batch,
                                               ForwardCache<Scalar>* cache) const {
  const int first_side = blocks_.front().size;
  if (prepared.rows() != 3 ||
      prepared.cols() != static_cast<Eigen::Index>(batch) * first_side * first_side) {
    throw ShapeError("prepared input has the wrong shape");
  }
  if (cache) {
    cache->batch = batch;
    cache->block_cols.clear();
    cache->block_preact.clear();
  }
  Matrix<Scalar> x = prepared;
  for (size_t k = 0; k < blocks_.size(); ++k) {
    const Block& b = blocks_[k];
    Matrix<Scalar> cols = Im2Col(x, batch, b.size);
    ConstMap<Scalar> w(params_.data() + b.weight_offset, b.out_channels,
                       b.in_channels * 9);
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bias(
        params_.data() + b.bias_offset, b.out_channels);
    Matrix<Scalar> pre = w * cols;
    pre.colwise() += bias;
    Matrix<Scalar> act = pre.cwiseMax(Scalar(0));
    if (cache) {
      cache->block_cols.push_back(std::move(cols));
      cache->block_preact.push_back(std::move(pre));
    }
    x = (k + 1 < blocks_.size()) ? AvgPool2(act, batch, b.size) : std::move(act);
  }
  const int last_side = blocks_.back().size;
  const int area = last_side * last_side;
  Matrix<Scalar> pooled(x.rows(), batch);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (int bi = 0; bi < batch; ++bi) {
      pooled(c, bi) = x.row(c).segment(static_cast<Eigen::Index>(bi) * area, area).sum() /
                      Scalar(area);
    }
  }
  ConstMap<Scalar> we(params_.data() + embed_.weight_offset, embed_.out, embed_.in);
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> be(
      params_.data() + embed_.bias_offset, embed_.out);
  Matrix<Scalar> embed_pre = we * pooled;
  embed_pre.colwise() += be;
  Matrix<Scalar> embed = embed_pre.cwiseMax(Scalar(0));

  ForwardOutput<Scalar> out;
  for (int h = 0; h < kNumHeads; ++h) {
    const Linear& l = head_layers_[h];
    if (l.out == 0) continue;
    ConstMap<Scalar> wh(params_.data() + l.weight_offset, l.out, l.in);
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bh(
        params_.data() + l.bias_offset, l.out);
    out.logits[h] = wh * embed;
    out.logits[h].colwise() += bh;
  }
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->embed_preact = std::move(embed_pre);
    cache->embed = std::move(embed);
  }
  return out;
}

template <typename Scalar>
void Network<Scalar>::Backward(
    const ForwardCache<Scalar>& cache,
    const std::array<Matrix<Scalar>, kNumHeads>& logit_grads,
    std::span<Scalar> grad) const {
  if (grad.size() != params_.size()) throw ShapeError("gradient size mismatch");
  const int batch = cache.batch;
  Matrix<Scalar> d_embed = Matrix<Scalar>::Zero(embed_.out, batch);
  for (int h = 0; h < kNumHeads; ++h) {
    const Linear& l = head_layers_[h];
    if (l.out == 0) continue;
    const Matrix<Scalar>& g = logit_grads[h];
    if (g.rows() != l.out || g.cols() != batch) {
      throw ShapeError(std::string("logit gradient for head '") +
                       HeadName(static_cast<Head>(h)) + "' has the wrong shape");
    }
    ConstMap<Scalar> wh(params_.data() + l.weight_offset, l.out, l.in);
    MutMap<Scalar> dwh(grad.data() + l.weight_offset, l.out, l.in);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> dbh(
        grad.data() + l.bias_offset, l.out);
    dwh.noalias() += g * cache.embed.transpose();
    dbh += g.rowwise().sum();
    d_embed.noalias() += wh.transpose() * g;
  }
  Matrix<Scalar> d_embed_pre =
      (cache.embed_preact.array() > Scalar(0)).select(d_embed, Scalar(0));
  ConstMap<Scalar> we(params_.data() + embed_.weight_offset, embed_.out, embed_.in);
  MutMap<Scalar> dwe(grad.data() + embed_.weight_offset, embed_.out, embed_.in);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> dbe(
      grad.data() + embed_.bias_offset, embed_.out);
  dwe.noalias() += d_embed_pre * cache.pooled.transpose();
  dbe += d_embed_pre.rowwise().sum();
  const Matrix<Scalar> d_pooled = we.transpose() * d_embed_pre;

  const int last_side = blocks_.back().size;
  const int area = last_side * last_side;
  Matrix<Scalar> d_x(d_pooled.rows(), static_cast<Eigen::Index>(batch) * area);
  for (Eigen::Index c = 0; c < d_pooled.rows(); ++c) {
    for (int bi = 0; bi < batch; ++bi) {
      d_x.row(c).segment(static_cast<Eigen::Index>(bi) * area, area).setConstant(
          d_pooled(c, bi) / Scalar(area));
    }
  }
  for (int k = static_cast<int>(blocks_.size()) - 1; k >= 0; --k) {
    const Block& b = blocks_[k];
    Matrix<Scalar> d_act = (k + 1 < static_cast<int>(blocks_.size()))
                               ? AvgPool2Backward(d_x, batch, b.size)
                               : std::move(d_x);
    const Matrix<Scalar>& pre = cache.block_preact[k];
    Matrix<Scalar> d_pre = (pre.array() > Scalar(0)).select(d_act, Scalar(0));
    MutMap<Scalar> dw(grad.data() + b.weight_offset, b.out_channels,
                      b.in_channels * 9);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> db(
        grad.data() + b.bias_offset, b.out_channels);
    dw.noalias() += d_pre * cache.block_cols[k].transpose();
    db += d_pre.rowwise().sum();
    if (k > 0) {
      ConstMap<Scalar> w(params_.data() + b.weight_offset, b.out_channels,
                         b.in_channels * 9);
      const Matrix<Scalar> d_cols = w.transpose() * d_pre;
      d_x = Col2Im(d_cols, b.in_channels, batch, b.size);
    }
  }
}

template class Network<float>;
template class Network<double>;

Adam::Adam(size_t num_params, double beta1, double beta2, double epsilon)
    : beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      m_(num_params, 0.f),
      v_(num_params, 0.f) {}

void Adam::Step(std::span<float> params, std::span<const float> grad,
                double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("optimizer state size mismatch");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step_size = static_cast<float>(lr / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  const float eps = static_cast<float>(epsilon_);
  for (size_t i = 0; i < params.size(); ++i) {
    const float g = grad[i];
    m_[i] = b1 * m_[i] + (1.f - b1) * g;
    v_[i] = b2 * v_[i] + (1.f - b2) * g * g;
    params[i] -= step_size * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_c2 + eps);
  }
}

}  // namespace sdtriplet
