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

#include "tokstd/search.hpp"

#include <algorithm>

#include <json.hpp>

#include "tokstd/train.hpp"

namespace tokstd {

double Jaccard(std::span<const BigramKey> a, std::span<const BigramKey> b) {
  size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<uint32_t> CoarseCandidates(const InvertedIndex& idx, const QueryTokens& q) {
  std::vector<uint32_t> out;
  for (BigramKey b : BigramSet(q.bigrams)) {
    if (const auto* list = idx.find(b)) out.insert(out.end(), list->begin(), list->end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Sliding-window set Jaccard against a fixed query set.
ScoredCandidate ScoreWithSet(const Posting& cand, const std::vector<BigramKey>& q_set, size_t q_len) {
  ScoredCandidate out{cand.track, cand.segment, 0.0, 0};
  const std::vector<BigramKey>& seq = cand.bigram_seq;
  if (seq.size() <= q_len) {
    out.score = Jaccard(q_set, cand.bigram_set);
    return out;
  }
  // Local dense ids over the candidate's distinct bigrams. Scratch buffers
  // are per thread, so the hot loop does not allocate.
  const std::vector<BigramKey>& uniq = cand.bigram_set;
  thread_local std::vector<uint32_t> local;
  thread_local std::vector<int> count;
  thread_local std::vector<char> in_q;
  const uint32_t* ids = cand.seq_ids.data();
  if (cand.seq_ids.size() != seq.size()) {  // posting built without finalize()
    local.resize(seq.size());
    for (size_t k = 0; k < seq.size(); ++k) {
      local[k] = static_cast<uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), seq[k]) - uniq.begin());
    }
    ids = local.data();
  }
  in_q.assign(uniq.size(), 0);
  for (size_t u = 0, v = 0; u < uniq.size() && v < q_set.size();) {
    if (uniq[u] < q_set[v]) {
      ++u;
    } else if (q_set[v] < uniq[u]) {
      ++v;
    } else {
      in_q[u++] = 1;
      ++v;
    }
  }
  count.assign(uniq.size(), 0);
  size_t distinct = 0, inter = 0;
  auto add = [&](uint32_t id) {
    if (count[id]++ == 0) {
      ++distinct;
      inter += in_q[id];
    }
  };
  auto remove = [&](uint32_t id) {
    if (--count[id] == 0) {
      --distinct;
      inter -= in_q[id];
    }
  };
  auto score = [&] {
    size_t uni = distinct + q_set.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  };
  for (size_t k = 0; k < q_len; ++k) add(ids[k]);
  out.score = score();
  const size_t windows = seq.size() - q_len + 1;
  for (size_t w = 1; w < windows; ++w) {
    remove(ids[w - 1]);
    add(ids[w + q_len - 1]);
    double s = score();
    if (s > out.score) {
      out.score = s;
      out.offset = static_cast<int>(w);
    }
  }
  return out;
}

bool Better(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.track != b.track) return a.track < b.track;
  return a.segment < b.segment;
}

}  // namespace

ScoredCandidate FineScore(const Posting& candidate, const QueryTokens& q) {
  return ScoreWithSet(candidate, BigramSet(q.bigrams), q.bigrams.size());
}

std::vector<ScoredCandidate> Rank(const InvertedIndex& idx, const QueryTokens& q, const SearchOptions& opts) {
  std::vector<uint32_t> cands = CoarseCandidates(idx, q);
  const std::vector<BigramKey> q_set = BigramSet(q.bigrams);
  std::vector<ScoredCandidate> scored(cands.size());
  const int n = static_cast<int>(cands.size());
  if (opts.exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic, 64) num_threads(Threads())
    for (int c = 0; c < n; ++c) scored[c] = ScoreWithSet(idx.segments[cands[c]], q_set, q.bigrams.size());
  } else {
    for (int c = 0; c < n; ++c) scored[c] = ScoreWithSet(idx.segments[cands[c]], q_set, q.bigrams.size());
  }
  std::sort(scored.begin(), scored.end(), Better);
  if (opts.per_track) {
    std::vector<char> seen(idx.track_ids.size(), 0);
    std::vector<ScoredCandidate> best;
    for (const ScoredCandidate& s : scored) {
      if (seen[s.track]) continue;
      seen[s.track] = 1;
      best.push_back(s);
    }
    scored = std::move(best);
  }
  if (opts.top_k > 0 && scored.size() > opts.top_k) scored.resize(opts.top_k);
  return scored;
}

QueryTokens TokenizeQuery(std::span<const float> samples, const EncoderModel& model, const Codebook& codebook,
                          const Featurizer& featurizer, int l_frames) {
  const FeatureConfig& fcfg = featurizer.config();
  if (fcfg.frames_for(samples.size()) < 1) {
    Fail(ErrorKind::kQuery, "query of " + std::to_string(samples.size()) + " samples is shorter than one feature window");
  }
  FeatureSequence f = featurizer(samples);
  TermOccurrence whole{"", 0.0, f.frames() * fcfg.hop_ms / 1000.0};
  PaddedUtterance pu = ContextualPad(f, whole, l_frames, fcfg.silence_value(), false);
  Mat z = Encode(model, pu.features.data).rows;
  TokenSequence tok = TokenizeSequence(codebook, z.middleRows(pu.word_start, pu.word_end - pu.word_start));
  QueryTokens q;
  q.bigrams = ToBigrams(tok.tokens).bigrams;
  if (q.bigrams.empty()) Fail(ErrorKind::kQuery, "query too short to form a bigram");
  return q;
}

std::vector<ScoredCandidate> Search(const InvertedIndex& idx, const EncoderModel& model, const Codebook& codebook,
                                    std::span<const float> query_audio, const FeatureConfig& fcfg,
                                    const SearchOptions& opts) {
  Featurizer featurizer(fcfg);
  QueryTokens q = TokenizeQuery(query_audio, model, codebook, featurizer, WindowFrames(fcfg, idx.config.segment_len));
  return Rank(idx, q, opts);
}

std::string ResultsToJson(const InvertedIndex& idx, const std::vector<ScoredCandidate>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ScoredCandidate& r : results) {
    arr.push_back({{"track", idx.track_ids.at(r.track)}, {"segment", r.segment}, {"score", r.score},
                   {"offset", r.offset}});
  }
  return arr.dump();
}

}  // namespace tokstd
