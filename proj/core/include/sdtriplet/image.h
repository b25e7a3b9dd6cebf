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

#ifndef SDTRIPLET_IMAGE_H_
#define SDTRIPLET_IMAGE_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdtriplet/vocab.h"

namespace sdtriplet {

// Interleaved HWC float image with three channels and intensities in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(size_t(h) * w * 3, 0.f) {}

  float& at(int y, int x, int c) { return pixels[(size_t(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return pixels[(size_t(y) * width + x) * 3 + c];
  }

  // Throws FormatError unless dimensions are positive and match the buffer.
  void Validate() const;

  friend bool operator==(const Image&, const Image&) = default;
};

// Binary PPM (P6, maxval 255).
Image LoadPpm(const std::string& path);
void SavePpm(const Image& image, const std::string& path);

// Parameters of the procedural renderer behind "synth:" image references.
struct SyntheticRenderSpec {
  int size = 56;
  int num_phases = 7;
  double pixel_noise = 0.03;
};

// Draws one tile per active triplet. Tile colour encodes the components:
// red level = instrument, green level = verb, blue level = target. The
// background grey level encodes the phase. Deterministic in `seed`.
Image RenderSyntheticFrame(const TripletVocabulary& vocab,
                           std::span<const uint8_t> labels, int phase,
                           const SyntheticRenderSpec& spec, uint64_t seed);

// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace sdtriplet

#endif  // SDTRIPLET_IMAGE_H_
