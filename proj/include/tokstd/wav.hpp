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

namespace tokstd {

inline constexpr int kSampleRate = 16000;

/// Mono audio with samples scaled to [-1, 1).
struct Audio {
  int sample_rate = kSampleRate;
  std::vector<float> samples;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Parses a RIFF/WAVE byte stream. Only PCM16 mono at 16 kHz is accepted.
Audio DecodeWav(std::span<const uint8_t> bytes, const std::string& name = "<memory>");
std::vector<uint8_t> EncodeWav(const Audio& audio);

Audio ReadWav(const std::string& path);
void WriteWav(const std::string& path, const Audio& audio);

/// Rounds samples to the PCM16 grid so in-memory audio matches what a
/// write/read cycle produces.
void QuantizeToPcm16(std::vector<float>& samples);

}  // namespace tokstd
