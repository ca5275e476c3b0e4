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

namespace tokstd {

struct TermOccurrence {
  std::string term;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const TermOccurrence&) const = default;
};

struct TrackRecord {
  std::string track_id;
  std::string path;
  std::string speaker_id;
  std::vector<TermOccurrence> occurrences;

  bool operator==(const TrackRecord&) const = default;
};

/// One side of an utterance pair: the track (by position in the record list)
/// and the occurrence inside it.
struct UtteranceRef {
  size_t track_index = 0;
  std::string track_id;
  TermOccurrence occurrence;
};

struct UtterancePair {
  std::string term;
  UtteranceRef utt_a;
  UtteranceRef utt_b;
};

std::vector<TrackRecord> ParseManifest(const std::string& text);
std::string FormatManifest(const std::vector<TrackRecord>& records);

std::vector<TrackRecord> LoadManifest(const std::string& path);
void SaveManifest(const std::string& path, const std::vector<TrackRecord>& records);

/// Resolves a record path relative to the directory holding the manifest.
std::string ResolveTrackPath(const std::string& manifest_path, const std::string& track_path);

/// Every unordered pair of distinct occurrences sharing a term, grouped by
/// term in first-seen order.
std::vector<UtterancePair> EnumeratePairs(const std::vector<TrackRecord>& records);

/// Samples pairs without replacement. `max_pairs_per_term == 0` keeps every
/// pair; the result is shuffled deterministically from `seed`.
std::vector<UtterancePair> ExtractPairs(const std::vector<TrackRecord>& records, uint64_t seed,
                                        size_t max_pairs_per_term = 0);

}  // namespace tokstd
