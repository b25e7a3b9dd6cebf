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

#include "sdtriplet/augment.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sdtriplet/errors.h"

namespace sdtriplet {
namespace {

void CheckProbability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(std::string(name) + " must lie in [0, 1]");
  }
}

struct Transform {
  bool hflip = false;
  bool vflip = false;
  double angle = 0.0;  // radians
  bool color = false;
  float brightness = 1.f;
  float saturation = 1.f;
};

Image Render(const Image& src, int out_h, int out_w, const Transform& tf) {
  src.Validate();
  if (out_h <= 0 || out_w <= 0) throw ValidationError("bad output size");
  Image out(out_h, out_w);
  const double scale_x = static_cast<double>(src.width) / out_w;
  const double scale_y = static_cast<double>(src.height) / out_h;
  const double cx = src.width / 2.0;
  const double cy = src.height / 2.0;
  const double cos_a = std::cos(tf.angle);
  const double sin_a = std::sin(tf.angle);
  const bool rotate = tf.angle != 0.0;

  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * scale_x;
      double sy = (y + 0.5) * scale_y;
      if (tf.hflip) sx = src.width - sx;
      if (tf.vflip) sy = src.height - sy;
      if (rotate) {
        const double dx = sx - cx, dy = sy - cy;
        sx = cx + cos_a * dx + sin_a * dy;
        sy = cy - sin_a * dx + cos_a * dy;
      }
      const double px = sx - 0.5, py = sy - 0.5;
      float* dst = &out.pixels[(size_t(y) * out_w + x) * 3];
      if (px < -0.5 || py < -0.5 || px > src.width - 0.5 ||
          py > src.height - 0.5) {
        dst[0] = dst[1] = dst[2] = 0.f;
        continue;
      }
      const double fx = std::floor(px), fy = std::floor(py);
      const float wx = static_cast<float>(px - fx);
      const float wy = static_cast<float>(py - fy);
      const int x0 = std::clamp(static_cast<int>(fx), 0, src.width - 1);
      const int y0 = std::clamp(static_cast<int>(fy), 0, src.height - 1);
      const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, src.width - 1);
      const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, src.height - 1);
      for (int c = 0; c < 3; ++c) {
        const float top = src.at(y0, x0, c) * (1.f - wx) + src.at(y0, x1, c) * wx;
        const float bottom =
            src.at(y1, x0, c) * (1.f - wx) + src.at(y1, x1, c) * wx;
        dst[c] = top * (1.f - wy) + bottom * wy;
      }
    }
  }

  if (tf.color) {
    for (size_t i = 0; i < out.pixels.size(); i += 3) {
      float r = out.pixels[i] * tf.brightness;
      float g = out.pixels[i + 1] * tf.brightness;
      float b = out.pixels[i + 2] * tf.brightness;
      const float gray = 0.299f * r + 0.587f * g + 0.114f * b;
      r = gray + tf.saturation * (r - gray);
      g = gray + tf.saturation * (g - gray);
      b = gray + tf.saturation * (b - gray);
      out.pixels[i] = std::clamp(r, 0.f, 1.f);
      out.pixels[i + 1] = std::clamp(g, 0.f, 1.f);
      out.pixels[i + 2] = std::clamp(b, 0.f, 1.f);
    }
  }
  return out;
}

}  // namespace

void AugmentationConfig::Validate() const {
  if (out_height <= 0 || out_width <= 0) {
    throw ValidationError("resize target must be positive");
  }
  CheckProbability(p_hflip, "p_hflip");
  CheckProbability(p_vflip, "p_vflip");
  CheckProbability(p_rotate, "p_rotate");
  CheckProbability(p_color, "p_color");
  if (rotation_degrees < 0 || brightness < 0 || brightness >= 1 ||
      saturation < 0) {
    throw ValidationError("augmentation magnitudes out of range");
  }
}

AugmentationConfig AugmentationConfig::ResizeOnly() const {
  AugmentationConfig c = *this;
  c.p_hflip = c.p_vflip = c.p_rotate = c.p_color = 0.0;
  return c;
}

Image Augment(const Image& image, const AugmentationConfig& config,
              std::mt19937_64& rng) {
  config.Validate();
  double u[7];
  for (double& v : u) v = UniformUnit(rng);
  Transform tf;
  tf.hflip = u[0] < config.p_hflip;
  tf.vflip = u[1] < config.p_vflip;
  if (u[2] < config.p_rotate) {
    tf.angle = (2.0 * u[3] - 1.0) * config.rotation_degrees *
               std::numbers::pi / 180.0;
  }
  if (u[4] < config.p_color) {
    tf.color = true;
    tf.brightness = static_cast<float>(1.0 + config.brightness * (2.0 * u[5] - 1.0));
    tf.saturation = static_cast<float>(1.0 + config.saturation * (2.0 * u[6] - 1.0));
  }
  return Render(image, config.out_height, config.out_width, tf);
}

Image Resize(const Image& image, int out_height, int out_width) {
  return Render(image, out_height, out_width, Transform{});
}

}  // namespace sdtriplet
