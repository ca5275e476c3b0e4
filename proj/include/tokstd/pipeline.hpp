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

#include <string>
#include <vector>

#include "tokstd/corpus.hpp"
#include "tokstd/encoder.hpp"
#include "tokstd/features.hpp"
#include "tokstd/index.hpp"
#include "tokstd/metrics.hpp"
#include "tokstd/quantizer.hpp"
#include "tokstd/search.hpp"
#include "tokstd/wav.hpp"

namespace tokstd {

std::vector<FeatureSequence> FeaturizeAll(const std::vector<Audio>& audio, const FeatureConfig& fcfg,
                                          Exec exec = Exec::kSerial);

/// Loads the audio of every record, resolving paths against the manifest.
std::vector<Audio> LoadTrackAudio(const std::vector<TrackRecord>& records, const std::string& manifest_path);

/// Word-span tokens of every occurrence, each tokenized inside its
/// contextual window, in record order.
struct OccurrenceTokens {
  std::string term;
  std::vector<int> tokens;
};
std::vector<OccurrenceTokens> TokenizeOccurrences(const EncoderModel& model, const Codebook& codebook,
                                                  const std::vector<TrackRecord>& records,
                                                  const std::vector<FeatureSequence>& features, int l_frames,
                                                  double pad_value);

/// Mean unigram-set Jaccard over all same-term and all cross-term
/// occurrence pairs.
struct JaccardSummary {
  double same_term = 0.0;
  double cross_term = 0.0;
  size_t same_pairs = 0;
  size_t cross_pairs = 0;
};
JaccardSummary TokenJaccard(const std::vector<OccurrenceTokens>& occurrences);

/// Runs every query through `Search` and scores the rankings.
MetricsReport EvaluateRetrieval(const InvertedIndex& idx, const EncoderModel& model, const Codebook& codebook,
                                const std::vector<TrackRecord>& archive, const std::vector<TrackRecord>& queries,
                                const std::vector<Audio>& query_audio, const FeatureConfig& fcfg,
                                const SearchOptions& opts, const MetricsConfig& mcfg);

}  // namespace tokstd
