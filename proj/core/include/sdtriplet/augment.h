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

#ifndef SDTRIPLET_AUGMENT_H_
#define SDTRIPLET_AUGMENT_H_

#include <random>

#include "sdtriplet/image.h"

namespace sdtriplet {

// Light training augmentation. The resize is unconditional; each stochastic
// transform fires independently with its own probability.
struct AugmentationConfig {
  int out_height = 224;
  int out_width = 224;
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double p_rotate = 0.5;
  double p_color = 0.5;
  double rotation_degrees = 15.0;    // angle drawn from [-r, r]
  double brightness = 0.2;           // factor drawn from [1-b, 1+b]
  double saturation = 0.2;           // factor drawn from [1-s, 1+s]

  void Validate() const;
  // Same output size with every stochastic transform disabled.
  AugmentationConfig ResizeOnly() const;
};

// Consumes exactly seven draws from `rng` regardless of which transforms
// fire, so streams stay aligned across configurations.
Image Augment(const Image& image, const AugmentationConfig& config,
              std::mt19937_64& rng);

// Bilinear resize with half-pixel centres; identity when sizes match.
Image Resize(const Image& image, int out_height, int out_width);

}  // namespace sdtriplet

#endif  // SDTRIPLET_AUGMENT_H_
