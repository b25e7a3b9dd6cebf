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

#include "sdtriplet/image.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sdtriplet/errors.h"

namespace sdtriplet {

void Image::Validate() const {
  if (height <= 0 || width <= 0) {
    throw FormatError("image has non-positive dimensions");
  }
  if (pixels.size() != size_t(height) * width * 3) {
    throw FormatError("image buffer does not hold height*width*3 values");
  }
}

Image LoadPpm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (!in || magic != "P6" || width <= 0 || height <= 0 || maxval != 255) {
    throw FormatError(path + ": not a binary 8-bit PPM (P6) image");
  }
  in.get();
  std::vector<unsigned char> raw(size_t(width) * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw FormatError(path + ": truncated pixel data");
  Image image(height, width);
  for (size_t i = 0; i < raw.size(); ++i) image.pixels[i] = raw[i] / 255.f;
  return image;
}

void SavePpm(const Image& image, const std::string& path) {
  image.Validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(image.pixels[i], 0.f, 1.f) * 255.f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

namespace {

float Level(int index, int count) {
  if (count <= 1) return 0.65f;
  return 0.3f + 0.7f * static_cast<float>(index) / static_cast<float>(count - 1);
}

}  // namespace

Image RenderSyntheticFrame(const TripletVocabulary& vocab,
                           std::span<const uint8_t> labels, int phase,
                           const SyntheticRenderSpec& spec, uint64_t seed) {
  if (spec.size < 12) throw ValidationError("render size must be >= 12");
  if (static_cast<int>(labels.size()) != vocab.num_classes()) {
    throw ShapeError("label vector length mismatch");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.f, static_cast<float>(spec.pixel_noise));

  const float background =
      0.05f + 0.10f * static_cast<float>(phase) /
                  static_cast<float>(std::max(spec.num_phases - 1, 1));
  Image image(spec.size, spec.size);
  for (float& p : image.pixels) p = background;

  constexpr int kGrid = 3;
  const int cell = spec.size / kGrid;
  const int tile = spec.size / 4;
  std::vector<int> cells(kGrid * kGrid);
  for (int i = 0; i < kGrid * kGrid; ++i) cells[i] = i;
  std::shuffle(cells.begin(), cells.end(), rng);

  int placed = 0;
  for (int c = 0; c < vocab.num_classes(); ++c) {
    if (labels[c] == 0) continue;
    if (placed == kGrid * kGrid) break;
    const Triplet t = vocab.Decompose(c);
    const float rgb[3] = {Level(t.instrument, vocab.num_instruments()),
                          Level(t.verb, vocab.num_verbs()),
                          Level(t.target, vocab.num_targets())};
    const int slot = cells[placed++];
    const int jitter = std::max(cell - tile, 0) + 1;
    const int y0 = (slot / kGrid) * cell + static_cast<int>(rng() % jitter);
    const int x0 = (slot % kGrid) * cell + static_cast<int>(rng() % jitter);
    for (int y = y0; y < std::min(y0 + tile, spec.size); ++y) {
      for (int x = x0; x < std::min(x0 + tile, spec.size); ++x) {
        for (int ch = 0; ch < 3; ++ch) image.at(y, x, ch) = rgb[ch];
      }
    }
  }
  for (float& p : image.pixels) p = std::clamp(p + noise(rng), 0.f, 1.f);
  return image;
}

}  // namespace sdtriplet
