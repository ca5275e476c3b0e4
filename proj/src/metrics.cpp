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

#include "tokstd/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace tokstd {

void MetricsConfig::validate() const {
  if (!(beta > 0.0)) Fail(ErrorKind::kConfig, "beta must be positive");
  if (!(overlap_ratio > 0.0 && overlap_ratio <= 1.0)) Fail(ErrorKind::kConfig, "overlap_ratio must be in (0, 1]");
}

double ReciprocalRank(const std::vector<uint32_t>& ranked, const RelevantSet& relevant) {
  for (size_t r = 0; r < ranked.size(); ++r) {
    if (relevant.count(ranked[r])) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

double AveragePrecision(const std::vector<uint32_t>& ranked, const RelevantSet& relevant) {
  if (relevant.empty()) return 0.0;
  double sum = 0.0;
  size_t hits = 0;
  for (size_t r = 0; r < ranked.size(); ++r) {
    if (relevant.count(ranked[r])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double Mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

MtwvResult Mtwv(const std::vector<QueryTrials>& queries, size_t total_segments, const MetricsConfig& cfg) {
  MtwvResult out;
  out.threshold = std::numeric_limits<double>::infinity();
  std::vector<const QueryTrials*> used;
  for (const QueryTrials& q : queries) {
    if (!q.relevant.empty()) used.push_back(&q);
  }
  out.queries = used.size();
  if (used.empty()) return out;

  std::vector<double> thresholds;
  for (const QueryTrials* q : used) {
    for (const auto& d : q->detections) thresholds.push_back(d.second);
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // TWV(+inf) = 1 - mean(1 + 0) = 0.
  out.mtwv = 0.0;
  for (double theta : thresholds) {
    double cost = 0.0;
    for (const QueryTrials* q : used) {
      size_t hits = 0, fa = 0;
      for (const auto& [seg, score] : q->detections) {
        if (score < theta) continue;
        if (q->relevant.count(seg)) {
          ++hits;
        } else {
          ++fa;
        }
      }
      double n_true = static_cast<double>(q->relevant.size());
      double n_nontarget = static_cast<double>(total_segments) - n_true;
      double p_miss = 1.0 - static_cast<double>(hits) / n_true;
      double p_fa = n_nontarget > 0 ? static_cast<double>(fa) / n_nontarget : 0.0;
      cost += p_miss + cfg.beta * p_fa;
    }
    double twv = 1.0 - cost / static_cast<double>(used.size());
    if (twv > out.mtwv) {
      out.mtwv = twv;
      out.threshold = theta;
    }
  }
  return out;
}

RelevantSet RelevantSegments(const InvertedIndex& idx, const std::vector<TrackRecord>& archive,
                             const std::string& term, const MetricsConfig& cfg) {
  std::map<std::string, const TrackRecord*> by_id;
  for (const TrackRecord& r : archive) by_id[r.track_id] = &r;
  RelevantSet out;
  for (uint32_t ord = 0; ord < idx.segments.size(); ++ord) {
    const Posting& p = idx.segments[ord];
    auto it = by_id.find(idx.track_ids[p.track]);
    if (it == by_id.end()) continue;
    double seg_start = p.segment * idx.config.hop;
    double seg_end = seg_start + idx.config.segment_len;
    for (const TermOccurrence& o : it->second->occurrences) {
      if (o.term != term) continue;
      double overlap = std::min(seg_end, o.end_s) - std::max(seg_start, o.start_s);
      if (overlap >= cfg.overlap_ratio * (o.end_s - o.start_s) - 1e-9) {
        out.insert(ord);
        break;
      }
    }
  }
  return out;
}

MetricsReport Evaluate(const InvertedIndex& idx, const std::vector<TrackRecord>& archive,
                       const std::vector<std::string>& query_ids, const std::vector<std::string>& query_terms,
                       const std::vector<std::vector<ScoredCandidate>>& results, const MetricsConfig& cfg) {
  cfg.validate();
  if (query_ids.size() != query_terms.size() || query_ids.size() != results.size()) {
    Fail(ErrorKind::kShape, "query ids, terms and results must align");
  }
  // Map (track, segment) back to ordinals.
  std::map<std::pair<uint32_t, uint32_t>, uint32_t> ordinal;
  for (uint32_t o = 0; o < idx.segments.size(); ++o) ordinal[{idx.segments[o].track, idx.segments[o].segment}] = o;

  MetricsReport rep;
  rep.beta = cfg.beta;
  std::vector<double> rr, ap;
  std::vector<QueryTrials> trials;
  for (size_t q = 0; q < query_ids.size(); ++q) {
    RelevantSet rel = RelevantSegments(idx, archive, query_terms[q], cfg);
    if (rel.empty()) {
      rep.warnings.push_back("query " + query_ids[q] + " (\"" + query_terms[q] + "\") has no relevant segments; excluded");
      continue;
    }
    std::vector<uint32_t> ranked;
    QueryTrials t;
    t.relevant = rel;
    for (const ScoredCandidate& c : results[q]) {
      uint32_t o = ordinal.at({c.track, c.segment});
      ranked.push_back(o);
      t.detections.emplace_back(o, c.score);
    }
    QueryReport qr{query_ids[q], query_terms[q], rel.size(), ReciprocalRank(ranked, rel), AveragePrecision(ranked, rel)};
    rr.push_back(qr.rr);
    ap.push_back(qr.ap);
    rep.per_query.push_back(qr);
    trials.push_back(std::move(t));
  }
  rep.n_queries = rep.per_query.size();
  rep.mrr = Mean(rr);
  rep.map = Mean(ap);
  MtwvResult m = Mtwv(trials, idx.segments.size(), cfg);
  rep.mtwv = m.mtwv;
  rep.mtwv_threshold = m.threshold;
  return rep;
}

std::string ReportToJson(const MetricsReport& r) {
  nlohmann::json j = {{"map", r.map}, {"mrr", r.mrr}, {"mtwv", r.mtwv}, {"beta", r.beta}, {"n_queries", r.n_queries}};
  return j.dump(2);
}

std::string ReportToCsv(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "query_id,term,n_relevant,reciprocal_rank,average_precision\n";
  for (const QueryReport& q : r.per_query) {
    os << q.query_id << ',' << q.term << ',' << q.relevant << ',' << q.rr << ',' << q.ap << '\n';
  }
  return os.str();
}

}  // namespace tokstd
