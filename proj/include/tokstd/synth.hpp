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
#include <string>
#include <vector>

#include "tokstd/corpus.hpp"
#include "tokstd/wav.hpp"

namespace tokstd {

struct SynthConfig {
  int vocab_size = 20;
  int phonemes_per_term_min = 3;
  int phonemes_per_term_max = 5;
  int phoneme_inventory_size = 16;
  int speakers = 10;
  int utterances_per_term = 8;
  int phone_dur_frames_min = 6;
  int phone_dur_frames_max = 10;
  /// Standard deviation, in dB, of the per-speaker spectral gain.
  double speaker_transform_scale = 6.0;
  /// Log-scale standard deviation of a per-speaker frequency warp.
  double speaker_warp = 0.0;
  double noise_std = 0.003;
  int sample_rate = kSampleRate;
  uint64_t seed = 42;

  int words_per_track = 4;
  /// Unannotated random words mixed into every archive track.
  int filler_words_per_track = 0;
  double gap_min_s = 0.15;
  double gap_max_s = 0.35;
  double edge_silence_s = 0.2;
  /// Speakers beyond `speakers` that only appear in queries.
  int heldout_speakers = 2;
  int n_queries = 50;
  double query_margin_s = 0.05;
  /// Frame length the phone durations are counted in.
  double frame_s = 0.01;

  void validate() const;
};

struct SynthTrack {
  TrackRecord record;
  Audio audio;
};

struct SynthCorpus {
  std::vector<SynthTrack> archive;
  std::vector<SynthTrack> queries;

  std::vector<TrackRecord> archive_records() const;
  std::vector<TrackRecord> query_records() const;
};

std::string TermName(int v);
std::string SpeakerName(int s);

/// Renders the corpus in memory. Samples are already PCM16-quantized, so they
/// equal what a WAV round trip returns.
SynthCorpus SynthesizeCorpus(const SynthConfig& cfg);

/// Writes archive/*.wav, archive.jsonl, queries/*.wav and queries.jsonl
/// under `out_dir`. Manifest paths are relative to `out_dir`.
void WriteSynthCorpus(const SynthCorpus& corpus, const std::string& out_dir);

}  // namespace tokstd
