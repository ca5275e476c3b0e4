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

#include "tokstd/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <exception>

namespace tokstd {

void IndexConfig::validate() const {
  if (!(hop > 0.0 && hop <= segment_len)) Fail(ErrorKind::kConfig, "index needs 0 < hop <= segment_len");
  if (codebook_size < 1) Fail(ErrorKind::kConfig, "codebook_size must be >= 1");
}

int IndexConfig::segment_samples(int sample_rate) const {
  return static_cast<int>(std::lround(segment_len * sample_rate));
}

int IndexConfig::hop_samples(int sample_rate) const { return static_cast<int>(std::lround(hop * sample_rate)); }

const std::vector<uint32_t>* InvertedIndex::find(BigramKey b) const {
  auto it = postings.find(b);
  return it == postings.end() ? nullptr : &it->second;
}

BigramSequence ToBigrams(std::span<const int> tokens) {
  BigramSequence out;
  if (tokens.size() < 2) return out;
  out.bigrams.reserve(tokens.size() - 1);
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    out.bigrams.push_back(MakeBigram(static_cast<uint32_t>(tokens[i]), static_cast<uint32_t>(tokens[i + 1])));
  }
  return out;
}

std::vector<BigramKey> BigramSet(std::span<const BigramKey> seq) {
  std::vector<BigramKey> s(seq.begin(), seq.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void Posting::finalize() {
  bigram_set = BigramSet(bigram_seq);
  seq_ids.resize(bigram_seq.size());
  for (size_t k = 0; k < bigram_seq.size(); ++k) {
    seq_ids[k] = static_cast<uint32_t>(std::lower_bound(bigram_set.begin(), bigram_set.end(), bigram_seq[k]) -
                                       bigram_set.begin());
  }
}

size_t SegmentCount(size_t n_samples, const IndexConfig& cfg, int sample_rate) {
  const size_t len = static_cast<size_t>(cfg.segment_samples(sample_rate));
  const size_t hop = static_cast<size_t>(cfg.hop_samples(sample_rate));
  if (n_samples <= len) return 1;
  size_t full = (n_samples - len) / hop + 1;
  size_t last_end = (full - 1) * hop + len;
  return last_end < n_samples ? full + 1 : full;
}

std::vector<std::vector<float>> SegmentTrack(std::span<const float> samples, const IndexConfig& cfg,
                                             int sample_rate) {
  cfg.validate();
  const size_t len = static_cast<size_t>(cfg.segment_samples(sample_rate));
  const size_t hop = static_cast<size_t>(cfg.hop_samples(sample_rate));
  size_t count = SegmentCount(samples.size(), cfg, sample_rate);
  std::vector<std::vector<float>> out(count, std::vector<float>(len, 0.0f));
  for (size_t j = 0; j < count; ++j) {
    size_t begin = j * hop;
    size_t end = std::min(samples.size(), begin + len);
    if (begin < end) std::copy(samples.begin() + begin, samples.begin() + end, out[j].begin());
  }
  return out;
}

InvertedIndex BuildIndexFromTokens(const std::vector<std::string>& track_ids,
                                   const std::vector<std::vector<std::vector<int>>>& segment_tokens,
                                   const IndexConfig& cfg) {
  if (track_ids.size() != segment_tokens.size()) Fail(ErrorKind::kShape, "one token list per track required");
  InvertedIndex idx;
  idx.config = cfg;
  idx.track_ids = track_ids;
  for (size_t i = 0; i < segment_tokens.size(); ++i) {
    for (size_t j = 0; j < segment_tokens[i].size(); ++j) {
      Posting p;
      p.track = static_cast<uint32_t>(i);
      p.segment = static_cast<uint32_t>(j);
      p.bigram_seq = ToBigrams(segment_tokens[i][j]).bigrams;
      p.finalize();
      const uint32_t ordinal = static_cast<uint32_t>(idx.segments.size());
      for (BigramKey b : p.bigram_set) idx.postings[b].push_back(ordinal);
      idx.segments.push_back(std::move(p));
    }
  }
  return idx;
}

std::vector<int> TokenizeAudio(std::span<const float> samples, const EncoderModel& model, const Codebook& codebook,
                               const Featurizer& featurizer) {
  FeatureSequence f = featurizer(samples);
  return TokenizeSequence(codebook, Encode(model, f.data).rows).tokens;
}

IndexBuildReport BuildIndex(const std::vector<TrackRecord>& records, const AudioLoader& load,
                            const EncoderModel& model, const Codebook& codebook, const IndexConfig& cfg,
                            const FeatureConfig& fcfg, Exec exec) {
  cfg.validate();
  if (model.config.d_embed != codebook.dim()) {
    Fail(ErrorKind::kShape, "encoder embedding dimension does not match the codebook");
  }
  if (model.config.input_dim != fcfg.n_mels) Fail(ErrorKind::kShape, "feature dimension does not match the encoder");
  Featurizer featurizer(fcfg);
  const int n = static_cast<int>(records.size());
  std::vector<std::vector<std::vector<int>>> tokens(n);
  std::vector<std::string> errors(n);

  auto process = [&](int i) {
    try {
      Audio audio = load(records[i]);
      for (const auto& window : SegmentTrack(audio.samples, cfg, audio.sample_rate)) {
        tokens[i].push_back(TokenizeAudio(window, model, codebook, featurizer));
      }
    } catch (const std::exception& e) {
      tokens[i].clear();
      errors[i] = e.what();
    }
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic) num_threads(Threads())
    for (int i = 0; i < n; ++i) process(i);
  } else {
    for (int i = 0; i < n; ++i) process(i);
  }

  IndexBuildReport report;
  std::vector<std::string> ids;
  std::vector<std::vector<std::vector<int>>> kept;
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      report.skipped.push_back(records[i].track_id + ": " + errors[i]);
      continue;
    }
    ids.push_back(records[i].track_id);
    kept.push_back(std::move(tokens[i]));
  }
  report.index = BuildIndexFromTokens(ids, kept, cfg);
  return report;
}

// Layout (little endian):
//   "BSTI", u32 version, u32 K, u64 segment_len bits (f64), u64 hop bits (f64)
//   u32 track count, per track: u16 byte length + UTF-8 id
//   u64 segment count, per segment: u32 track, u32 j, varint bigram count,
//       then varint first + varint second per bigram
//   u64 key count, per key in ascending order: u32 first, u32 second,
//       varint posting count, delta-varint segment ordinals
//   u32 CRC32C of all preceding bytes
namespace {

constexpr uint32_t kIndexVersion = 1;

InvertedIndex ParseIndexBody(ByteReader& r) {
  InvertedIndex idx;
  idx.config.codebook_size = static_cast<int>(r.u32());
  idx.config.segment_len = std::bit_cast<double>(r.u64());
  idx.config.hop = std::bit_cast<double>(r.u64());
  uint32_t tracks = r.u32();
  if (tracks > r.remaining() / 2) Fail(ErrorKind::kCorruption, "track count exceeds file size at offset " + std::to_string(r.offset()));
  for (uint32_t i = 0; i < tracks; ++i) idx.track_ids.push_back(r.bytes(r.u16()));

  uint64_t segments = r.u64();
  if (segments > r.remaining() / 9) {
    Fail(ErrorKind::kCorruption, "segment count exceeds file size at offset " + std::to_string(r.offset()));
  }
  idx.segments.resize(segments);
  uint32_t prev_track = 0, prev_seg = 0;
  for (uint64_t s = 0; s < segments; ++s) {
    Posting& p = idx.segments[s];
    size_t at = r.offset();
    p.track = r.u32();
    p.segment = r.u32();
    if (p.track >= tracks) Fail(ErrorKind::kCorruption, "segment track out of range at offset " + std::to_string(at));
    if (s > 0 && (p.track < prev_track || (p.track == prev_track && p.segment <= prev_seg))) {
      Fail(ErrorKind::kCorruption, "segment table out of order at offset " + std::to_string(at));
    }
    prev_track = p.track;
    prev_seg = p.segment;
    uint64_t count = r.varint();
    if (count > r.remaining() / 2) Fail(ErrorKind::kCorruption, "bigram count exceeds file size at offset " + std::to_string(r.offset()));
    p.bigram_seq.reserve(count);
    for (uint64_t k = 0; k < count; ++k) {
      uint64_t a = r.varint(), b = r.varint();
      if (a > UINT32_MAX || b > UINT32_MAX) Fail(ErrorKind::kCorruption, "token out of range at offset " + std::to_string(r.offset()));
      p.bigram_seq.push_back(MakeBigram(static_cast<uint32_t>(a), static_cast<uint32_t>(b)));
    }
    p.finalize();
  }

  uint64_t keys = r.u64();
  if (keys > r.remaining() / 9) Fail(ErrorKind::kCorruption, "key count exceeds file size at offset " + std::to_string(r.offset()));
  for (uint64_t k = 0; k < keys; ++k) {
    uint32_t a = r.u32(), b = r.u32();
    uint64_t count = r.varint();
    if (count > r.remaining()) Fail(ErrorKind::kCorruption, "posting count exceeds file size at offset " + std::to_string(r.offset()));
    std::vector<uint32_t> list;
    list.reserve(count);
    uint64_t prev = 0;
    for (uint64_t n = 0; n < count; ++n) {
      uint64_t delta = r.varint();
      uint64_t ord = n == 0 ? delta : prev + delta;
      if (ord >= segments || (n > 0 && delta == 0)) {
        Fail(ErrorKind::kCorruption, "invalid posting entry at offset " + std::to_string(r.offset()));
      }
      list.push_back(static_cast<uint32_t>(ord));
      prev = ord;
    }
    if (!idx.postings.emplace(MakeBigram(a, b), std::move(list)).second) {
      Fail(ErrorKind::kCorruption, "duplicate posting key at offset " + std::to_string(r.offset()));
    }
  }
  return idx;
}

}  // namespace

std::vector<uint8_t> EncodeIndex(const InvertedIndex& idx) {
  ByteWriter w;
  w.bytes("BSTI");
  w.u32(kIndexVersion);
  w.u32(static_cast<uint32_t>(idx.config.codebook_size));
  w.u64(std::bit_cast<uint64_t>(idx.config.segment_len));
  w.u64(std::bit_cast<uint64_t>(idx.config.hop));
  w.u32(static_cast<uint32_t>(idx.track_ids.size()));
  for (const std::string& id : idx.track_ids) {
    if (id.size() > 0xFFFF) Fail(ErrorKind::kFormat, "track id too long: " + id.substr(0, 32));
    w.u16(static_cast<uint16_t>(id.size()));
    w.bytes(id);
  }
  w.u64(idx.segments.size());
  for (const Posting& p : idx.segments) {
    w.u32(p.track);
    w.u32(p.segment);
    w.varint(p.bigram_seq.size());
    for (BigramKey b : p.bigram_seq) {
      w.varint(BigramFirst(b));
      w.varint(BigramSecond(b));
    }
  }
  std::vector<BigramKey> keys;
  keys.reserve(idx.postings.size());
  for (const auto& [k, _] : idx.postings) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  w.u64(keys.size());
  for (BigramKey k : keys) {
    const std::vector<uint32_t>& list = idx.postings.at(k);
    w.u32(BigramFirst(k));
    w.u32(BigramSecond(k));
    w.varint(list.size());
    uint32_t prev = 0;
    for (size_t n = 0; n < list.size(); ++n) {
      w.varint(n == 0 ? list[n] : list[n] - prev);
      prev = list[n];
    }
  }
  w.u32(Crc32c(w.data()));
  return std::move(w.data());
}

InvertedIndex DecodeIndex(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8) Fail(ErrorKind::kFormat, "file too small for a BSTI index");
  ByteReader r(bytes);
  if (r.bytes(4) != "BSTI") Fail(ErrorKind::kFormat, "bad magic, not a BSTI index");
  uint32_t version = r.u32();
  if (version != kIndexVersion) Fail(ErrorKind::kFormat, "unsupported index version " + std::to_string(version));

  // Parse first so truncation is reported with the offset where data ran
  // out; a body that parses but fails the checksum is reported as such.
  std::span<const uint8_t> body = bytes.first(bytes.size() >= 4 ? bytes.size() - 4 : 0);
  ByteReader br(body);
  br.bytes(8);
  InvertedIndex idx = ParseIndexBody(br);
  if (!br.at_end()) Fail(ErrorKind::kCorruption, "trailing bytes after offset " + std::to_string(br.offset()));
  ByteReader tail(bytes.subspan(bytes.size() - 4));
  uint32_t stored = tail.u32();
  if (stored != Crc32c(body)) Fail(ErrorKind::kCorruption, "checksum mismatch (CRC32C)");
  return idx;
}

void SaveIndex(const InvertedIndex& idx, const std::string& path) { WriteFileBytes(path, EncodeIndex(idx)); }

InvertedIndex LoadIndex(const std::string& path) { return DecodeIndex(ReadFileBytes(path)); }

}  // namespace tokstd
