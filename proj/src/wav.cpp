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

#include "tokstd/wav.hpp"

#include <algorithm>
#include <cmath>

#include "tokstd/common.hpp"

namespace tokstd {
namespace {

int16_t ToPcm(float x) {
  double v = std::round(static_cast<double>(x) * 32768.0);
  return static_cast<int16_t>(std::clamp(v, -32768.0, 32767.0));
}

}  // namespace

void QuantizeToPcm16(std::vector<float>& samples) {
  for (float& s : samples) s = static_cast<float>(ToPcm(s) / 32768.0);
}

Audio DecodeWav(std::span<const uint8_t> bytes, const std::string& name) {
  ByteReader r(bytes);
  try {
    if (r.bytes(4) != "RIFF") Fail(ErrorKind::kFormat, name + ": not a RIFF file");
    r.u32();
    if (r.bytes(4) != "WAVE") Fail(ErrorKind::kFormat, name + ": not a WAVE file");
    bool have_fmt = false;
    Audio audio;
    while (!r.at_end()) {
      std::string id = r.bytes(4);
      uint32_t size = r.u32();
      if (id == "fmt ") {
        if (size < 16) Fail(ErrorKind::kFormat, name + ": short fmt chunk");
        uint16_t format = r.u16();
        uint16_t channels = r.u16();
        uint32_t rate = r.u32();
        r.u32();
        r.u16();
        uint16_t bits = r.u16();
        r.bytes(size - 16);
        if (format != 1 || bits != 16) {
          Fail(ErrorKind::kFormat, name + ": expected PCM16, got format " + std::to_string(format) +
                                       " with " + std::to_string(bits) + " bits");
        }
        if (channels != 1) {
          Fail(ErrorKind::kFormat, name + ": expected mono, got " + std::to_string(channels) + " channels");
        }
        if (rate != static_cast<uint32_t>(kSampleRate)) {
          Fail(ErrorKind::kFormat, name + ": expected 16000 Hz, got " + std::to_string(rate));
        }
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) Fail(ErrorKind::kFormat, name + ": data chunk before fmt chunk");
        size_t n = size / 2;
        audio.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
          audio.samples[i] = static_cast<float>(static_cast<int16_t>(r.u16()) / 32768.0);
        }
        if (size % 2) r.u8();
        return audio;
      } else {
        r.bytes(size + (size % 2));
      }
    }
    Fail(ErrorKind::kFormat, name + ": no data chunk");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorruption) Fail(ErrorKind::kFormat, name + ": " + e.what());
    throw;
  }
}

std::vector<uint8_t> EncodeWav(const Audio& audio) {
  ByteWriter w;
  uint32_t data_bytes = static_cast<uint32_t>(audio.samples.size() * 2);
  w.bytes("RIFF");
  w.u32(36 + data_bytes);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(static_cast<uint32_t>(audio.sample_rate));
  w.u32(static_cast<uint32_t>(audio.sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data");
  w.u32(data_bytes);
  for (float s : audio.samples) w.u16(static_cast<uint16_t>(ToPcm(s)));
  return std::move(w.data());
}

Audio ReadWav(const std::string& path) { return DecodeWav(ReadFileBytes(path), path); }

void WriteWav(const std::string& path, const Audio& audio) { WriteFileBytes(path, EncodeWav(audio)); }

}  // namespace tokstd
