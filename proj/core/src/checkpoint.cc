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

#include "sdtriplet/checkpoint.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {
namespace {

using nlohmann::json;

json OptionalNumber(double v) { return std::isnan(v) ? json() : json(v); }
double NumberOrNan(const json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

std::string MetadataJson(const Checkpoint& c) {
  json j;
  j["backbone"] = {{"name", c.backbone.name},
                   {"embedding_dim", c.backbone.embedding_dim},
                   {"pretrained", c.backbone.pretrained},
                   {"input_size", c.backbone.input_size},
                   {"stem_pool", c.backbone.stem_pool},
                   {"conv_channels", c.backbone.conv_channels}};
  j["heads"] = {{"instrument", c.heads.instrument}, {"verb", c.heads.verb},
                {"target", c.heads.target},         {"phase", c.heads.phase},
                {"w_triplet", c.heads.w_triplet},   {"w_instrument", c.heads.w_instrument},
                {"w_verb", c.heads.w_verb},         {"w_target", c.heads.w_target},
                {"w_phase", c.heads.w_phase}};
  j["dims"] = {c.dims.triplet, c.dims.instrument, c.dims.verb, c.dims.target,
               c.dims.phase};
  j["role"] = c.role;
  j["fold_id"] = c.fold_id;
  j["epoch"] = c.epoch;
  j["val_map"] = OptionalNumber(c.val_map);
  j["seeds"] = c.seeds;
  json curve = json::array();
  for (const EpochLog& e : c.curve) {
    curve.push_back({{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"val_map", OptionalNumber(e.val_map)},
                     {"lr_end", e.lr_end}});
  }
  j["curve"] = curve;
  j["num_params"] = c.params.size();
  return j.dump();
}

std::string Digest(const std::string& metadata, const std::vector<float>& params) {
  std::vector<uint8_t> bytes(metadata.begin(), metadata.end());
  const size_t offset = bytes.size();
  bytes.resize(offset + params.size() * sizeof(float));
  std::memcpy(bytes.data() + offset, params.data(), params.size() * sizeof(float));
  return Sha256Hex(bytes);
}

}  // namespace

std::string Checkpoint::Hash() const { return Digest(MetadataJson(*this), params); }

Network<float> Checkpoint::ToNetwork() const {
  return Network<float>(backbone, heads, dims, params);
}

void SaveCheckpoint(const Checkpoint& c, const std::string& path) {
  const std::string metadata = MetadataJson(c);
  std::string blob = "sdtriplet-checkpoint 1\nsha256 " + Digest(metadata, c.params) +
                     "\n" + metadata + "\n";
  const size_t offset = blob.size();
  blob.resize(offset + c.params.size() * sizeof(float));
  std::memcpy(blob.data() + offset, c.params.data(), c.params.size() * sizeof(float));
  WriteTextFile(path, blob);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  const std::string blob = ReadTextFile(path);
  std::istringstream in(blob);
  std::string header, digest_line, metadata;
  std::getline(in, header);
  std::getline(in, digest_line);
  std::getline(in, metadata);
  if (header != "sdtriplet-checkpoint 1" || digest_line.rfind("sha256 ", 0) != 0) {
    throw FormatError(path + ": not an sdtriplet checkpoint");
  }
  Checkpoint c;
  size_t num_params = 0;
  try {
    const json j = json::parse(metadata);
    const json& b = j.at("backbone");
    c.backbone.name = b.at("name").get<std::string>();
    c.backbone.embedding_dim = b.at("embedding_dim");
    c.backbone.pretrained = b.at("pretrained");
    c.backbone.input_size = b.at("input_size");
    c.backbone.stem_pool = b.at("stem_pool");
    c.backbone.conv_channels = b.at("conv_channels").get<std::vector<int>>();
    const json& h = j.at("heads");
    c.heads.instrument = h.at("instrument");
    c.heads.verb = h.at("verb");
    c.heads.target = h.at("target");
    c.heads.phase = h.at("phase");
    c.heads.w_triplet = h.at("w_triplet");
    c.heads.w_instrument = h.at("w_instrument");
    c.heads.w_verb = h.at("w_verb");
    c.heads.w_target = h.at("w_target");
    c.heads.w_phase = h.at("w_phase");
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 5) throw FormatError("dims must have 5 entries");
    c.dims = {dims[0], dims[1], dims[2], dims[3], dims[4]};
    c.role = j.at("role");
    c.fold_id = j.at("fold_id");
    c.epoch = j.at("epoch");
    c.val_map = NumberOrNan(j.at("val_map"));
    c.seeds = j.at("seeds").get<std::map<std::string, uint64_t>>();
    for (const json& e : j.at("curve")) {
      c.curve.push_back({e.at("epoch"), e.at("train_loss"),
                         NumberOrNan(e.at("val_map")), e.at("lr_end")});
    }
    num_params = j.at("num_params");
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad checkpoint metadata: " + e.what());
  }
  const size_t offset = static_cast<size_t>(in.tellg());
  if (blob.size() != offset + num_params * sizeof(float)) {
    throw IntegrityError(path + ": parameter block has the wrong size");
  }
  c.params.resize(num_params);
  std::memcpy(c.params.data(), blob.data() + offset, num_params * sizeof(float));
  if (Digest(metadata, c.params) != digest_line.substr(7)) {
    throw IntegrityError(path + ": checkpoint digest mismatch");
  }
  return c;
}

}  // namespace sdtriplet
