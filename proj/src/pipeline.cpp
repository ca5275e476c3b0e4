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

#include "tokstd/pipeline.hpp"

#include <algorithm>
#include <iterator>

namespace tokstd {

std::vector<FeatureSequence> FeaturizeAll(const std::vector<Audio>& audio, const FeatureConfig& fcfg, Exec exec) {
  Featurizer featurizer(fcfg);
  std::vector<FeatureSequence> out(audio.size());
  const int n = static_cast<int>(audio.size());
#pragma omp parallel for schedule(dynamic) num_threads(Threads()) if (exec == Exec::kParallel)
  for (int i = 0; i < n; ++i) out[i] = featurizer(audio[i].samples);
  return out;
}

std::vector<Audio> LoadTrackAudio(const std::vector<TrackRecord>& records, const std::string& manifest_path) {
  std::vector<Audio> out;
  out.reserve(records.size());
  for (const TrackRecord& r : records) out.push_back(ReadWav(ResolveTrackPath(manifest_path, r.path)));
  return out;
}

std::vector<OccurrenceTokens> TokenizeOccurrences(const EncoderModel& model, const Codebook& codebook,
                                                  const std::vector<TrackRecord>& records,
                                                  const std::vector<FeatureSequence>& features, int l_frames,
                                                  double pad_value) {
  std::vector<OccurrenceTokens> out;
  for (size_t i = 0; i < records.size(); ++i) {
    for (const TermOccurrence& occ : records[i].occurrences) {
      PaddedUtterance pu = ContextualPad(features.at(i), occ, l_frames, pad_value);
      Mat z = Encode(model, pu.features.data).rows;
      TokenSequence tok = TokenizeSequence(codebook, z.middleRows(pu.word_start, pu.word_end - pu.word_start));
      out.push_back({occ.term, std::move(tok.tokens)});
    }
  }
  return out;
}

JaccardSummary TokenJaccard(const std::vector<OccurrenceTokens>& occurrences) {
  std::vector<std::vector<int>> sets;
  for (const auto& o : occurrences) {
    std::vector<int> s = o.tokens;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    sets.push_back(std::move(s));
  }
  JaccardSummary out;
  double same = 0.0, cross = 0.0;
  for (size_t a = 0; a < sets.size(); ++a) {
    for (size_t b = a + 1; b < sets.size(); ++b) {
      std::vector<int> inter;
      std::set_intersection(sets[a].begin(), sets[a].end(), sets[b].begin(), sets[b].end(), std::back_inserter(inter));
      size_t uni = sets[a].size() + sets[b].size() - inter.size();
      double j = uni == 0 ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
      if (occurrences[a].term == occurrences[b].term) {
        same += j;
        ++out.same_pairs;
      } else {
        cross += j;
        ++out.cross_pairs;
      }
    }
  }
  if (out.same_pairs) out.same_term = same / static_cast<double>(out.same_pairs);
  if (out.cross_pairs) out.cross_term = cross / static_cast<double>(out.cross_pairs);
  return out;
}

MetricsReport EvaluateRetrieval(const InvertedIndex& idx, const EncoderModel& model, const Codebook& codebook,
                                const std::vector<TrackRecord>& archive, const std::vector<TrackRecord>& queries,
                                const std::vector<Audio>& query_audio, const FeatureConfig& fcfg,
                                const SearchOptions& opts, const MetricsConfig& mcfg) {
  if (queries.size() != query_audio.size()) Fail(ErrorKind::kShape, "one audio clip per query required");
  std::vector<std::string> ids, terms;
  std::vector<std::vector<ScoredCandidate>> results;
  for (size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].occurrences.empty()) Fail(ErrorKind::kValidation, "query " + queries[q].track_id + " has no term");
    ids.push_back(queries[q].track_id);
    terms.push_back(queries[q].occurrences.front().term);
    results.push_back(Search(idx, model, codebook, query_audio[q].samples, fcfg, opts));
  }
  return Evaluate(idx, archive, ids, terms, results, mcfg);
}

}  // namespace tokstd
