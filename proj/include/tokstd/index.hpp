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
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tokstd/corpus.hpp"
#include "tokstd/encoder.hpp"
#include "tokstd/features.hpp"
#include "tokstd/quantizer.hpp"
#include "tokstd/wav.hpp"

namespace tokstd {

struct IndexConfig {
  double segment_len = 1.0;
  double hop = 0.5;
  int codebook_size = 256;

  void validate() const;
  int segment_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  bool operator==(const IndexConfig&) const = default;
};

/// Ordered token pair packed as (first << 32) | second.
using BigramKey = uint64_t;

inline BigramKey MakeBigram(uint32_t first, uint32_t second) {
  return (static_cast<uint64_t>(first) << 32) | second;
}
inline uint32_t BigramFirst(BigramKey b) { return static_cast<uint32_t>(b >> 32); }
inline uint32_t BigramSecond(BigramKey b) { return static_cast<uint32_t>(b); }

struct BigramSequence {
  std::vector<BigramKey> bigrams;
};

BigramSequence ToBigrams(std::span<const int> tokens);

/// Sorted, duplicate-free members of a bigram sequence.
std::vector<BigramKey> BigramSet(std::span<const BigramKey> seq);

struct Posting {
  uint32_t track = 0;    // index into InvertedIndex::track_ids
  uint32_t segment = 0;  // j
  std::vector<BigramKey> bigram_seq;
  std::vector<BigramKey> bigram_set;
  /// Position in bigram_set of every bigram_seq entry; derived, not stored.
  std::vector<uint32_t> seq_ids;

  /// Fills bigram_set and seq_ids from bigram_seq.
  void finalize();
  bool operator==(const Posting&) const = default;
};

struct InvertedIndex {
  IndexConfig config;
  std::vector<std::string> track_ids;
  /// Segments ordered by (track, segment); a posting list holds ordinals
  /// into this vector.
  std::vector<Posting> segments;
  std::unordered_map<BigramKey, std::vector<uint32_t>> postings;

  const std::vector<uint32_t>* find(BigramKey b) const;
  bool operator==(const InvertedIndex&) const = default;
};

/// Windows of `segment_len` starting every `hop`; a trailing partial window
/// (or a track shorter than one window) is zero-padded.
std::vector<std::vector<float>> SegmentTrack(std::span<const float> samples, const IndexConfig& cfg,
                                             int sample_rate = kSampleRate);
size_t SegmentCount(size_t n_samples, const IndexConfig& cfg, int sample_rate = kSampleRate);

/// Builds postings from already-tokenized segments: `segment_tokens[i][j]` are
/// the tokens of segment j of track i.
InvertedIndex BuildIndexFromTokens(const std::vector<std::string>& track_ids,
                                   const std::vector<std::vector<std::vector<int>>>& segment_tokens,
                                   const IndexConfig& cfg);

/// Tokens for one audio window: featurize, encode, quantize.
std::vector<int> TokenizeAudio(std::span<const float> samples, const EncoderModel& model, const Codebook& codebook,
                               const Featurizer& featurizer);

struct IndexBuildReport {
  InvertedIndex index;
  std::vector<std::string> skipped;  // "track_id: reason"
};

using AudioLoader = std::function<Audio(const TrackRecord&)>;

/// Tokenizes every segment of every track. Tracks whose audio cannot be
/// loaded are skipped and reported. Tracks are processed in parallel when
/// `exec` is kParallel; the merge is always in record order.
IndexBuildReport BuildIndex(const std::vector<TrackRecord>& records, const AudioLoader& load,
                            const EncoderModel& model, const Codebook& codebook, const IndexConfig& cfg,
                            const FeatureConfig& fcfg, Exec exec = Exec::kSerial);

/// "BSTI" index file; see SaveIndex for the layout.
std::vector<uint8_t> EncodeIndex(const InvertedIndex& idx);
InvertedIndex DecodeIndex(std::span<const uint8_t> bytes);
void SaveIndex(const InvertedIndex& idx, const std::string& path);
InvertedIndex LoadIndex(const std::string& path);

}  // namespace tokstd
