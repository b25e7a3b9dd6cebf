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

#ifndef SDTRIPLET_UTIL_H_
#define SDTRIPLET_UTIL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sdtriplet {

std::string ReadTextFile(const std::string& path);
// Writes to a sibling temporary file and renames it into place.
void WriteTextFile(const std::string& path, std::string_view contents);

std::string Sha256Hex(std::span<const uint8_t> bytes);
std::string Sha256Hex(std::string_view text);

std::vector<std::string> Split(std::string_view text, char delimiter);
std::string_view Trim(std::string_view text);

// Deterministic 64-bit seed mixing (splitmix64 finalizer).
uint64_t MixSeed(uint64_t seed, uint64_t salt);

}  // namespace sdtriplet

#endif  // SDTRIPLET_UTIL_H_
