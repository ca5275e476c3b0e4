// Copyright 2026 The tokstd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tokstd/encoder.hpp"
#include "tokstd/quantizer.hpp"

namespace tokstd {

struct NamedTensor {
  std::string name;
  std::vector<uint64_t> dims;
  std::vector<float> data;
};

/// "BSTM" container: magic, u32 version, u32 tensor count, then per tensor
/// u16 name length, UTF-8 name, u8 rank, u64 dims, little-endian f32 data.
std::vector<uint8_t> EncodeTensors(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> DecodeTensors(std::span<const uint8_t> bytes);

std::vector<NamedTensor> ModelToTensors(const EncoderModel& model, const Codebook& codebook);
void TensorsToModel(const std::vector<NamedTensor>& tensors, EncoderModel* model, Codebook* codebook);

void SaveCheckpoint(const std::string& path, const EncoderModel& model, const Codebook& codebook);
void LoadCheckpoint(const std::string& path, EncoderModel* model, Codebook* codebook);

/// Rounds every stored value to f32 precision, matching what a
/// save/load cycle yields.
void RoundToStoredPrecision(EncoderModel& model, Codebook& codebook);

}  // namespace tokstd
