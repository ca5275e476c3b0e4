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

#include <span>
#include <string>

#include "tokstd/common.hpp"
#include "tokstd/corpus.hpp"

namespace tokstd {

struct FeatureConfig {
  int sample_rate = 16000;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 96;
  double fmin = 50.0;
  double fmax = 7600.0;
  double log_floor = 1e-10;
  int n_fft = 512;

  int win_samples() const;
  int hop_samples() const;
  /// Feature value produced by digital silence.
  double silence_value() const;
  /// Number of frames `Featurize` emits for `n_samples` samples, or 0 when
  /// the input is shorter than one window.
  int frames_for(size_t n_samples) const;
  void validate() const;
};

struct FeatureSequence {
  Mat data;  // T x D
  double hop_ms = 10.0;

  int frames() const { return static_cast<int>(data.rows()); }
  int dims() const { return static_cast<int>(data.cols()); }
};

struct PaddedUtterance {
  FeatureSequence features;  // exactly L_frames rows
  int word_start = 0;
  int word_end = 0;
};

double HzToMel(double hz);
double MelToHz(double mel);

/// Triangular HTK-Mel filterbank, D x (n_fft/2 + 1). Throws a configuration
/// error when a filter covers no FFT bin.
Mat BuildMelFilterbank(const FeatureConfig& cfg, int n_fft);

/// Triangle edge frequencies (Hz), D + 2 values; filter m peaks at element
/// m + 1.
std::vector<double> MelCenterFrequencies(const FeatureConfig& cfg);

/// Log-Mel energies with a Hann window; T = floor((len - win) / hop) + 1.
FeatureSequence Featurize(std::span<const float> samples, const FeatureConfig& cfg);

/// Reusable featurizer that caches the filterbank and window.
class Featurizer {
 public:
  explicit Featurizer(const FeatureConfig& cfg);
  FeatureSequence operator()(std::span<const float> samples) const;
  const FeatureConfig& config() const { return cfg_; }

 private:
  FeatureConfig cfg_;
  Mat filterbank_;
  std::vector<double> window_;
};

/// Frame span [first, last) covered by an occurrence at the given hop.
std::pair<int, int> OccurrenceFrames(const TermOccurrence& occ, double hop_ms);

/// Centers the occurrence in an `l_frames` window. Frames outside the track
/// (or every non-word frame when `keep_context` is false) take `pad_value`.
PaddedUtterance ContextualPad(const FeatureSequence& track, const TermOccurrence& occ, int l_frames,
                              double pad_value, bool keep_context = true);

/// "BSTF" feature dump.
std::vector<uint8_t> EncodeFeatureDump(const FeatureSequence& seq);
FeatureSequence DecodeFeatureDump(std::span<const uint8_t> bytes, double hop_ms = 10.0);

}  // namespace tokstd
