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

#include <gtest/gtest.h>

#include <json.hpp>
#include <random>

#include "tokstd/search.hpp"
#include "tokstd/train.hpp"
#include "test_util.hpp"

namespace tokstd {
namespace {

std::vector<BigramKey> SetOf(std::vector<int> tokens) { return BigramSet(ToBigrams(tokens).bigrams); }

QueryTokens Q(std::vector<int> tokens) { return QueryTokens{ToBigrams(tokens).bigrams, ""}; }

Posting P(std::vector<int> tokens, uint32_t track = 0, uint32_t seg = 0) {
  Posting p;
  p.track = track;
  p.segment = seg;
  p.bigram_seq = ToBigrams(tokens).bigrams;
  p.finalize();
  return p;
}

// Oracles written against the definitions, without shortcuts.
ScoredCandidate BruteFine(const Posting& c, const QueryTokens& q) {
  std::vector<BigramKey> qs = BigramSet(q.bigrams);
  ScoredCandidate best{c.track, c.segment, -1.0, 0};
  const size_t n = q.bigrams.size(), m = c.bigram_seq.size();
  if (m <= n) return {c.track, c.segment, Jaccard(qs, BigramSet(c.bigram_seq)), 0};
  for (size_t t = 0; t + n <= m; ++t) {
    std::vector<BigramKey> w(c.bigram_seq.begin() + t, c.bigram_seq.begin() + t + n);
    std::set<BigramKey> ws(w.begin(), w.end()), qq(qs.begin(), qs.end()), u = ws;
    u.insert(qq.begin(), qq.end());
    size_t inter = ws.size() + qq.size() - u.size();
    double s = static_cast<double>(inter) / static_cast<double>(u.size());
    if (s > best.score) best.score = s, best.offset = static_cast<int>(t);
  }
  return best;
}

std::vector<uint32_t> BruteCoarse(const InvertedIndex& idx, const QueryTokens& q) {
  std::vector<uint32_t> out;
  for (size_t s = 0; s < idx.segments.size(); ++s) {
    bool shared = false;
    for (BigramKey a : idx.segments[s].bigram_seq) {
      for (BigramKey b : q.bigrams) shared |= a == b;
    }
    if (shared) out.push_back(static_cast<uint32_t>(s));
  }
  return out;
}

InvertedIndex RandomIndex(int tracks, int segs, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(0, 20), tok(0, k - 1);
  std::vector<std::string> ids;
  std::vector<std::vector<std::vector<int>>> t(tracks);
  for (int i = 0; i < tracks; ++i) {
    ids.push_back("t" + std::to_string(i));
    t[i].resize(segs);
    for (auto& s : t[i]) {
      s.resize(len(rng));
      for (int& x : s) x = tok(rng);
    }
  }
  return BuildIndexFromTokens(ids, t, IndexConfig{});
}

QueryTokens RandomQuery(int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(2, 8), tok(0, k - 1);
  std::vector<int> q(len(rng));
  for (int& x : q) x = tok(rng);
  return Q(q);
}

TEST(Jaccard, Examples) {
  auto a = SetOf({1, 1, 3, 3, 8});
  EXPECT_EQ(Jaccard(a, a), 1.0);
  EXPECT_EQ(Jaccard(a, SetOf({5, 6, 7})), 0.0);
  EXPECT_DOUBLE_EQ(Jaccard(a, SetOf({1, 3, 3, 3, 8, 8})), 0.6);
  EXPECT_EQ(Jaccard({}, {}), 0.0);
  EXPECT_EQ(Jaccard(a, {}), 0.0);
}

TEST(Coarse, Examples) {
  InvertedIndex idx = BuildIndexFromTokens({"a", "b"}, {{{1, 2, 3}}, {{4, 5}, {2, 3, 9}}}, IndexConfig{});
  EXPECT_TRUE(CoarseCandidates(idx, Q({7, 7, 7})).empty());
  EXPECT_EQ(CoarseCandidates(idx, Q({4, 5})), std::vector<uint32_t>{1});
  EXPECT_EQ(CoarseCandidates(idx, Q({2, 3})), (std::vector<uint32_t>{0, 2}));
}

TEST(Fine, Examples) {
  ScoredCandidate s = FineScore(P({9, 9, 1, 2, 3, 9, 8}), Q({1, 2, 3}));
  EXPECT_EQ(s.score, 1.0);
  EXPECT_EQ(s.offset, 2);
  // Candidate shorter than the query: whole-set comparison.
  ScoredCandidate t = FineScore(P({1, 2}), Q({1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(t.score, 1.0 / 3.0);
  EXPECT_EQ(t.offset, 0);
  // Ties keep the first offset.
  EXPECT_EQ(FineScore(P({1, 2, 5, 1, 2}), Q({1, 2})).offset, 0);
  EXPECT_EQ(FineScore(P({}), Q({1, 2})).score, 0.0);
}

TEST(Fine, MatchesExhaustiveWindows) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(0, 30), tok(0, 5);
  for (int rep = 0; rep < 2000; ++rep) {
    std::vector<int> c(len(rng));
    for (int& x : c) x = tok(rng);
    QueryTokens q = RandomQuery(6, rng);
    Posting p = P(c, 3, 4);
    ScoredCandidate got = FineScore(p, q), want = BruteFine(p, q);
    if (want.score < 0) want.score = 0;
    ASSERT_EQ(got.score, want.score);
    ASSERT_EQ(got.offset, want.offset);
    EXPECT_GE(got.score, 0.0);
    EXPECT_LE(got.score, 1.0);
  }
}

TEST(Rank, MatchesOracles) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 30; ++rep) {
    InvertedIndex idx = RandomIndex(6, 8, 8, rng);
    QueryTokens q = RandomQuery(8, rng);
    std::vector<uint32_t> coarse = CoarseCandidates(idx, q);
    EXPECT_EQ(coarse, BruteCoarse(idx, q));
    // Every segment with a positive fine score is a coarse candidate.
    for (size_t s = 0; s < idx.segments.size(); ++s) {
      if (FineScore(idx.segments[s], q).score > 0) {
        EXPECT_TRUE(std::binary_search(coarse.begin(), coarse.end(), static_cast<uint32_t>(s)));
      }
    }
    SearchOptions all{0, false, Exec::kSerial};
    std::vector<ScoredCandidate> r = Rank(idx, q, all);
    ASSERT_EQ(r.size(), coarse.size());
    for (size_t i = 1; i < r.size(); ++i) {
      bool ordered = r[i - 1].score > r[i].score ||
                     (r[i - 1].score == r[i].score && std::tie(r[i - 1].track, r[i - 1].segment) <
                                                          std::tie(r[i].track, r[i].segment));
      EXPECT_TRUE(ordered);
    }
    SetThreads(3);
    EXPECT_EQ(Rank(idx, q, {0, false, Exec::kParallel}), r);
    SetThreads(1);

    std::vector<ScoredCandidate> top = Rank(idx, q, {3, false, Exec::kSerial});
    EXPECT_EQ(top, std::vector<ScoredCandidate>(r.begin(), r.begin() + std::min<size_t>(3, r.size())));
    std::vector<ScoredCandidate> per = Rank(idx, q, {0, true, Exec::kSerial});
    std::set<uint32_t> tracks;
    for (const auto& c : per) EXPECT_TRUE(tracks.insert(c.track).second);
    for (const auto& c : per) {
      for (const auto& o : r) {
        if (o.track == c.track) EXPECT_LE(o.score, c.score);
      }
    }
  }
}

TEST(Rank, TopKLargerThanCandidates) {
  InvertedIndex idx = BuildIndexFromTokens({"a"}, {{{1, 2}, {2, 3}}}, IndexConfig{});
  EXPECT_EQ(Rank(idx, Q({1, 2, 3}), {50, false, Exec::kSerial}).size(), 2u);
  EXPECT_EQ(Rank(idx, Q({1, 2, 3}), {50, true, Exec::kSerial}).size(), 1u);
}

TEST(Results, Json) {
  InvertedIndex idx = BuildIndexFromTokens({"a", "b"}, {{{1, 2}}, {{1, 2}}}, IndexConfig{});
  auto r = Rank(idx, Q({1, 2}), {5, true, Exec::kSerial});
  auto j = nlohmann::json::parse(ResultsToJson(idx, r));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["track"], "a");
  EXPECT_EQ(j[1]["track"], "b");
  EXPECT_EQ(j[0]["segment"], 0);
  EXPECT_EQ(j[0]["score"], 1.0);
  EXPECT_EQ(j[0]["offset"], 0);
}

class AudioSearch : public ::testing::Test {
 protected:
  void SetUp() override {
    EncoderConfig ec{96, 8, 2, 2, 8, 1, 0};
    model = InitEncoder(ec, 4);
    std::mt19937_64 rng(5);
    cb = InitCodebook(testing::RandomUnitRows(64, 8, rng), 16, 1);
    std::normal_distribution<float> n(0.0f, 0.2f);
    for (int t = 0; t < 3; ++t) {
      std::vector<float> s(16000 * 2);
      for (size_t i = 0; i < s.size(); ++i) s[i] = n(rng) * static_cast<float>(std::sin(0.001 * (t + 1) * i));
      tracks.push_back(s);
    }
    Featurizer fz{fcfg};
    std::vector<std::vector<std::vector<int>>> tok(3);
    for (int t = 0; t < 3; ++t) {
      for (const auto& w : SegmentTrack(tracks[t], icfg)) tok[t].push_back(TokenizeAudio(w, model, cb, fz));
    }
    idx = BuildIndexFromTokens({"x", "y", "z"}, tok, icfg);
  }
  EncoderModel model;
  Codebook cb;
  FeatureConfig fcfg;
  IndexConfig icfg;
  std::vector<std::vector<float>> tracks;
  InvertedIndex idx;
};

TEST_F(AudioSearch, SelfRetrieval) {
  auto windows = SegmentTrack(tracks[1], icfg);
  auto r = Search(idx, model, cb, windows[2], fcfg, {10, false, Exec::kSerial});
  ASSERT_FALSE(r.empty());
  EXPECT_EQ(r[0].track, 1u);
  EXPECT_EQ(r[0].segment, 2u);
  EXPECT_EQ(r[0].score, 1.0);
}

TEST_F(AudioSearch, QueryErrors) {
  std::vector<float> tiny(100, 0.1f);
  try {
    Search(idx, model, cb, tiny, fcfg, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kQuery);
  }
  // One frame yields one token and no bigram.
  std::vector<float> one(fcfg.win_samples(), 0.1f);
  EXPECT_THROW(Search(idx, model, cb, one, fcfg, {}), Error);
}

TEST_F(AudioSearch, QueryKeepsOnlyItsFrames) {
  Featurizer fz{fcfg};
  std::vector<float> q(tracks[0].begin() + 4000, tracks[0].begin() + 12000);
  QueryTokens t = TokenizeQuery(q, model, cb, fz, 98);
  EXPECT_EQ(static_cast<int>(t.bigrams.size()), fcfg.frames_for(q.size()) - 1);
}

}  // namespace
}  // namespace tokstd
