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
#include <vector>

#include "tokstd/index.hpp"

namespace tokstd {

struct QueryTokens {
  std::vector<BigramKey> bigrams;  // ordered, length >= 1
  std::string term;                // evaluation label, may be empty
};

struct ScoredCandidate {
  uint32_t track = 0;
  uint32_t segment = 0;
  double score = 0.0;
  int offset = 0;  // best window start, in bigrams
  bool operator==(const ScoredCandidate&) const = default;
};

/// |a ∩ b| / |a ∪ b| over sorted, duplicate-free sets; 0 when both are empty.
double Jaccard(std::span<const BigramKey> a, std::span<const BigramKey> b);

/// Segment ordinals sharing at least one bigram with the query, ascending.
std::vector<uint32_t> CoarseCandidates(const InvertedIndex& idx, const QueryTokens& q);

/// Best set-Jaccard between the query and any window of |Q| consecutive
/// candidate bigrams; candidates shorter than the query are compared whole.
ScoredCandidate FineScore(const Posting& candidate, const QueryTokens& q);

struct SearchOptions {
  size_t top_k = 10;  // 0 keeps every candidate
  /// Keep only each track's best segment.
  bool per_track = true;
  Exec exec = Exec::kSerial;
};

/// Coarse search, fine scoring and ranking (score descending, then track and
/// segment ascending).
std::vector<ScoredCandidate> Rank(const InvertedIndex& idx, const QueryTokens& q, const SearchOptions& opts);

/// Tokenizes query audio like an indexed segment: the query is centered in a
/// silence-padded window of `l_frames` and only its own frames are kept.
QueryTokens TokenizeQuery(std::span<const float> samples, const EncoderModel& model, const Codebook& codebook,
                          const Featurizer& featurizer, int l_frames);

std::vector<ScoredCandidate> Search(const InvertedIndex& idx, const EncoderModel& model, const Codebook& codebook,
                                    std::span<const float> query_audio, const FeatureConfig& fcfg,
                                    const SearchOptions& opts);

/// JSON array of {track, segment, score, offset}.
std::string ResultsToJson(const InvertedIndex& idx, const std::vector<ScoredCandidate>& results);

}  // namespace tokstd
