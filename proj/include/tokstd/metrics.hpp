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

#include <set>
#include <string>
#include <vector>

#include "tokstd/corpus.hpp"
#include "tokstd/index.hpp"
#include "tokstd/search.hpp"

namespace tokstd {

/// Items are segment ordinals in an index.
using RelevantSet = std::set<uint32_t>;

struct MetricsConfig {
  double beta = 999.9;
  double overlap_ratio = 0.5;
  void validate() const;
};

double ReciprocalRank(const std::vector<uint32_t>& ranked, const RelevantSet& relevant);
double AveragePrecision(const std::vector<uint32_t>& ranked, const RelevantSet& relevant);
double Mean(const std::vector<double>& values);

/// Detection scores for one query: (segment ordinal, score) for every
/// detected segment. Undetected segments never pass a threshold.
struct QueryTrials {
  std::vector<std::pair<uint32_t, double>> detections;
  RelevantSet relevant;
};

struct MtwvResult {
  double mtwv = 0.0;
  double threshold = 0.0;  // +inf when no threshold beats the all-miss point
  size_t queries = 0;      // queries with at least one relevant segment
};

/// Maximum over shared thresholds of 1 - mean_q(P_miss + beta * P_FA), with
/// trials = indexed segments.
MtwvResult Mtwv(const std::vector<QueryTrials>& queries, size_t total_segments, const MetricsConfig& cfg);

/// Segments of `idx` containing at least `overlap_ratio` of an occurrence of
/// `term`, taken from the archive manifest.
RelevantSet RelevantSegments(const InvertedIndex& idx, const std::vector<TrackRecord>& archive,
                             const std::string& term, const MetricsConfig& cfg);

struct QueryReport {
  std::string query_id;
  std::string term;
  size_t relevant = 0;
  double rr = 0.0;
  double ap = 0.0;
};

struct MetricsReport {
  double map = 0.0;
  double mrr = 0.0;
  double mtwv = 0.0;
  double mtwv_threshold = 0.0;
  double beta = 0.0;
  size_t n_queries = 0;
  std::vector<QueryReport> per_query;
  std::vector<std::string> warnings;
};

/// Scores ranked results (one list per query) against manifest relevance.
/// Queries without relevant segments are excluded with a warning.
MetricsReport Evaluate(const InvertedIndex& idx, const std::vector<TrackRecord>& archive,
                       const std::vector<std::string>& query_ids, const std::vector<std::string>& query_terms,
                       const std::vector<std::vector<ScoredCandidate>>& results, const MetricsConfig& cfg);

std::string ReportToJson(const MetricsReport& r);
std::string ReportToCsv(const MetricsReport& r);

}  // namespace tokstd
