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

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "tokstd/align.hpp"
#include "tokstd/corpus.hpp"
#include "tokstd/features.hpp"
#include "tokstd/synth.hpp"
#include "test_util.hpp"

namespace tokstd {
namespace {

const char* kLine =
    R"({"track_id":"t1","path":"a.wav","speaker_id":"s1","occurrences":[{"term":"hello","start_s":0.1,"end_s":0.7}]})";

ErrorKind KindOf(const std::string& text) {
  try {
    ParseManifest(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ErrorKind::kIo;
}

TEST(Manifest, ParsesWellFormedLine) {
  auto recs = ParseManifest(kLine);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].track_id, "t1");
  EXPECT_EQ(recs[0].path, "a.wav");
  EXPECT_EQ(recs[0].speaker_id, "s1");
  ASSERT_EQ(recs[0].occurrences.size(), 1u);
  EXPECT_EQ(recs[0].occurrences[0].term, "hello");
  EXPECT_DOUBLE_EQ(recs[0].occurrences[0].start_s, 0.1);
  EXPECT_DOUBLE_EQ(recs[0].occurrences[0].end_s, 0.7);
}

TEST(Manifest, MissingFieldIsSchemaErrorNamingIt) {
  try {
    ParseManifest(R"({"track_id":"t1","speaker_id":"s1","occurrences":[]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
    EXPECT_NE(std::string(e.what()).find("\"path\""), std::string::npos) << e.what();
  }
}

TEST(Manifest, DuplicateTrackIdIsValidationError) {
  EXPECT_EQ(KindOf(std::string(kLine) + "\n" + kLine + "\n"), ErrorKind::kValidation);
}

TEST(Manifest, MalformedLineReportsLineNumber) {
  try {
    ParseManifest(std::string(kLine) + "\n{not json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Manifest, RejectsBadOccurrences) {
  EXPECT_EQ(KindOf(R"({"track_id":"t","path":"p","speaker_id":"s","occurrences":[{"term":"a","start_s":0.5,"end_s":0.4}]})"),
            ErrorKind::kValidation);
  EXPECT_EQ(KindOf(R"({"track_id":"t","path":"p","speaker_id":"s","occurrences":[{"term":"a","start_s":-0.1,"end_s":0.4}]})"),
            ErrorKind::kValidation);
  EXPECT_EQ(KindOf(R"({"track_id":"t","path":"p","speaker_id":"s","occurrences":[{"term":"a","start_s":0.5,"end_s":0.6},{"term":"b","start_s":0.1,"end_s":0.2}]})"),
            ErrorKind::kValidation);
  EXPECT_EQ(KindOf(R"({"track_id":1,"path":"p","speaker_id":"s","occurrences":[]})"), ErrorKind::kSchema);
  EXPECT_EQ(KindOf(R"([1,2])"), ErrorKind::kSchema);
}

TEST(Manifest, SkipsBlankLinesAndPreservesOrder) {
  std::string text = std::string(kLine) + "\n\n" +
                     R"({"track_id":"t0","path":"b.wav","speaker_id":"s2","occurrences":[]})" + "\n";
  auto recs = ParseManifest(text);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].track_id, "t1");
  EXPECT_EQ(recs[1].track_id, "t0");
}

TEST(Manifest, RoundTrip) {
  std::vector<TrackRecord> recs{
      {"a", "x/a.wav", "s1", {{"cat", 0.1, 0.35}, {"dog", 0.5, 0.9}}},
      {"b", "b.wav", "s2", {}},
      {"c \"q\"", "c.wav", "s3", {{"ünï", 1.0 / 3.0, 0.75}}},
  };
  EXPECT_EQ(ParseManifest(FormatManifest(recs)), recs);
  testing::TempDir dir("manifest");
  SaveManifest(dir.file("m.jsonl"), recs);
  EXPECT_EQ(LoadManifest(dir.file("m.jsonl")), recs);
}

TEST(Manifest, ResolvesRelativePaths) {
  EXPECT_EQ(ResolveTrackPath("/data/set/archive.jsonl", "archive/t1.wav"), "/data/set/archive/t1.wav");
  EXPECT_EQ(ResolveTrackPath("/data/set/archive.jsonl", "/abs/t1.wav"), "/abs/t1.wav");
  EXPECT_EQ(ResolveTrackPath("archive.jsonl", "t1.wav"), "t1.wav");
}

std::vector<TrackRecord> Corpus(const std::map<std::string, int>& counts) {
  std::vector<TrackRecord> recs;
  int id = 0;
  for (const auto& [term, n] : counts) {
    for (int i = 0; i < n; ++i) {
      recs.push_back({"t" + std::to_string(id++), "p", "s", {{term, 0.0, 0.5}}});
    }
  }
  return recs;
}

TEST(Pairs, TwoOccurrencesGiveExactlyOnePair) {
  auto pairs = EnumeratePairs(Corpus({{"cat", 2}}));
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].utt_a.track_id, "t0");
  EXPECT_EQ(pairs[0].utt_b.track_id, "t1");
}

TEST(Pairs, ThreeOccurrencesCoveredAcrossEpochs) {
  auto recs = Corpus({{"cat", 3}, {"dog", 2}});
  std::set<std::pair<std::string, std::string>> expected;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) expected.insert({"t" + std::to_string(i), "t" + std::to_string(j)});
  }
  ASSERT_EQ(expected.size(), 3u);
  std::set<std::pair<std::string, std::string>> seen;
  for (uint64_t epoch = 0; epoch < 20; ++epoch) {
    for (const auto& p : ExtractPairs(recs, epoch, 1)) {
      if (p.term != "cat") continue;
      auto k = std::minmax(p.utt_a.track_id, p.utt_b.track_id);
      seen.insert({k.first, k.second});
    }
  }
  EXPECT_EQ(seen, expected);
}

TEST(Pairs, ExtractIsReproducibleAndWithoutReplacement) {
  auto recs = Corpus({{"a", 5}, {"b", 4}, {"c", 1}});
  auto p1 = ExtractPairs(recs, 7);
  auto p2 = ExtractPairs(recs, 7);
  ASSERT_EQ(p1.size(), 10u + 6u);
  std::set<std::pair<std::string, std::string>> uniq;
  for (size_t i = 0; i < p1.size(); ++i) {
    EXPECT_EQ(p1[i].utt_a.track_id, p2[i].utt_a.track_id);
    EXPECT_EQ(p1[i].utt_b.track_id, p2[i].utt_b.track_id);
    EXPECT_EQ(p1[i].utt_a.occurrence.term, p1[i].utt_b.occurrence.term);
    EXPECT_EQ(p1[i].term, p1[i].utt_a.occurrence.term);
    EXPECT_NE(p1[i].utt_a.track_id, p1[i].utt_b.track_id);
    uniq.insert(std::minmax(p1[i].utt_a.track_id, p1[i].utt_b.track_id));
  }
  EXPECT_EQ(uniq.size(), p1.size());
  auto capped = ExtractPairs(recs, 7, 2);
  EXPECT_EQ(capped.size(), 4u);
}

TEST(Pairs, SameTrackOccurrencesPair) {
  std::vector<TrackRecord> recs{{"t", "p", "s", {{"x", 0.0, 0.2}, {"x", 0.5, 0.7}}}};
  auto pairs = EnumeratePairs(recs);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].utt_a.occurrence.start_s, 0.0);
  EXPECT_EQ(pairs[0].utt_b.occurrence.start_s, 0.5);
}

TEST(Pairs, SingletonTermsAreEmptyCorpus) {
  try {
    ExtractPairs(Corpus({{"a", 1}, {"b", 1}}), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyCorpus);
  }
}

SynthConfig SmallSynth() {
  SynthConfig c;
  c.vocab_size = 5;
  c.utterances_per_term = 4;
  c.speakers = 3;
  c.n_queries = 3;
  return c;
}

TEST(Synth, CountsOccurrences) {
  SynthCorpus c = SynthesizeCorpus(SmallSynth());
  size_t occ = 0;
  std::map<std::string, int> per_term;
  for (const auto& t : c.archive) {
    occ += t.record.occurrences.size();
    for (const auto& o : t.record.occurrences) {
      ++per_term[o.term];
      EXPECT_LE(o.end_s, t.audio.duration_s() + 1e-9);
      EXPECT_LT(o.start_s, o.end_s);
    }
  }
  EXPECT_EQ(occ, 20u);
  EXPECT_EQ(per_term.size(), 5u);
  for (const auto& [term, n] : per_term) EXPECT_EQ(n, 4) << term;
  EXPECT_EQ(c.queries.size(), 3u);
}

TEST(Synth, TracksAreSingleSpeakerAndQueriesHeldOut) {
  SynthCorpus c = SynthesizeCorpus(SmallSynth());
  std::set<std::string> archive_speakers;
  for (const auto& t : c.archive) archive_speakers.insert(t.record.speaker_id);
  for (const auto& q : c.queries) {
    EXPECT_EQ(archive_speakers.count(q.record.speaker_id), 0u);
    ASSERT_EQ(q.record.occurrences.size(), 1u);
  }
}

TEST(Synth, DeterministicBytes) {
  testing::TempDir a("synth_a"), b("synth_b");
  WriteSynthCorpus(SynthesizeCorpus(SmallSynth()), a.str());
  WriteSynthCorpus(SynthesizeCorpus(SmallSynth()), b.str());
  size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.str())) {
    if (!e.is_regular_file()) continue;
    auto rel = std::filesystem::relative(e.path(), a.str());
    EXPECT_EQ(ReadFileBytes(e.path().string()), ReadFileBytes((std::filesystem::path(b.str()) / rel).string()))
        << rel;
    ++files;
  }
  EXPECT_GT(files, 5u);
  EXPECT_EQ(LoadManifest(a.file("archive.jsonl")), SynthesizeCorpus(SmallSynth()).archive_records());
}

TEST(Synth, SeedChangesOutput) {
  SynthConfig c1 = SmallSynth(), c2 = SmallSynth();
  c2.seed = c1.seed + 1;
  EXPECT_NE(SynthesizeCorpus(c1).archive[0].audio.samples, SynthesizeCorpus(c2).archive[0].audio.samples);
}

TEST(Synth, InMemoryAudioMatchesWavRoundTrip) {
  SynthCorpus c = SynthesizeCorpus(SmallSynth());
  EXPECT_EQ(DecodeWav(EncodeWav(c.archive[0].audio)).samples, c.archive[0].audio.samples);
}

TEST(Synth, ValidatesConfig) {
  SynthConfig c = SmallSynth();
  c.noise_std = -1;
  EXPECT_THROW(SynthesizeCorpus(c), Error);
  c = SmallSynth();
  c.vocab_size = 0;
  EXPECT_THROW(SynthesizeCorpus(c), Error);
  c = SmallSynth();
  c.phone_dur_frames_max = c.phone_dur_frames_min - 1;
  EXPECT_THROW(SynthesizeCorpus(c), Error);
}

TEST(Synth, UnwritableOutputIsIoError) {
  try {
    WriteSynthCorpus(SynthesizeCorpus(SmallSynth()), "/proc/definitely/not/writable");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

// Same-term utterances must be closer in feature space than different terms.
TEST(Synth, SameTermDtwCostBelowCrossTerm) {
  SynthConfig cfg;  // full-size toy corpus
  cfg.n_queries = 0;
  SynthCorpus c = SynthesizeCorpus(cfg);
  FeatureConfig fcfg;
  Featurizer fz(fcfg);
  struct Utt {
    std::string term;
    Mat feats;
  };
  std::vector<Utt> utts;
  std::vector<Mat> tracks;
  for (const auto& t : c.archive) tracks.push_back(fz(t.audio.samples).data);
  Mat all(0, fcfg.n_mels);
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(fcfg.n_mels);
  Eigen::Index rows = 0;
  for (const Mat& m : tracks) {
    mean += m.colwise().sum();
    rows += m.rows();
  }
  mean /= static_cast<double>(rows);
  for (size_t i = 0; i < c.archive.size(); ++i) {
    for (const auto& o : c.archive[i].record.occurrences) {
      auto [f, l] = OccurrenceFrames(o, fcfg.hop_ms);
      l = std::min<int>(l, static_cast<int>(tracks[i].rows()));
      Mat seg = tracks[i].middleRows(f, l - f).rowwise() - mean;
      utts.push_back({o.term, seg});
    }
  }
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<size_t> pick(0, utts.size() - 1);
  double same = 0, cross = 0;
  int n_same = 0, n_cross = 0;
  while (n_same < 50 || n_cross < 50) {
    size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    Alignment al = DtwAlign(utts[a].feats, utts[b].feats);
    double cost = al.total_cost / static_cast<double>(al.path.size());
    if (utts[a].term == utts[b].term) {
      if (n_same < 50) same += cost, ++n_same;
    } else if (n_cross < 50) {
      cross += cost, ++n_cross;
    }
  }
  EXPECT_LT(same / n_same, cross / n_cross);
}

}  // namespace
}  // namespace tokstd
