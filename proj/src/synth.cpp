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

#include "tokstd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "tokstd/common.hpp"
#include "tokstd/features.hpp"

namespace tokstd {
namespace {

struct Partial {
  double freq;
  double amp;
};

struct Phoneme {
  bool tonal = true;
  std::vector<Partial> partials;
};

struct Speaker {
  // gain_db(mel) = scale * sum_k coef[k] * cos((k + 1) * pi * mel / mel_max + phase[k])
  std::vector<double> coef;
  std::vector<double> phase;
  double scale = 0.0;
  double mel_max = 1.0;
  double warp = 1.0;

  double gain(double hz) const {
    double m = HzToMel(hz) / mel_max;
    double db = 0.0;
    for (size_t k = 0; k < coef.size(); ++k) db += coef[k] * std::cos((k + 1) * std::numbers::pi * m + phase[k]);
    return std::pow(10.0, scale * db / 20.0);
  }
};

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

Phoneme MakePhoneme(Rng& rng, double nyquist) {
  Phoneme p;
  p.tonal = rng.uniform(0.0, 1.0) < 0.7;
  if (p.tonal) {
    double f0 = rng.log_uniform(150.0, 1500.0);
    p.partials.push_back({f0, 1.0});
    for (int h = 2; h <= 3; ++h) p.partials.push_back({f0 * h, rng.uniform(0.2, 1.0)});
  } else {
    double center = rng.log_uniform(1000.0, 6000.0);
    double half = 0.15 * center;
    for (int i = 0; i < 24; ++i) p.partials.push_back({rng.uniform(center - half, center + half), 0.35});
  }
  for (auto& q : p.partials) q.freq = std::min(q.freq, 0.95 * nyquist);
  return p;
}

Speaker MakeSpeaker(Rng& rng, double scale, double warp, double mel_max) {
  Speaker s;
  s.warp = std::exp(warp * std::clamp(rng.normal(), -2.0, 2.0));
  s.scale = scale;
  s.mel_max = mel_max;
  for (int k = 0; k < 4; ++k) {
    s.coef.push_back(rng.normal() / std::sqrt(2.0 * (k + 1)));
    s.phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  return s;
}

// Renders one word into `out` starting at sample `offset`; returns its length.
size_t RenderWord(const std::vector<int>& phones, const std::vector<Phoneme>& inventory, const Speaker& spk,
                  const SynthConfig& cfg, Rng& rng, std::vector<double>& out, size_t offset) {
  const double sr = cfg.sample_rate;
  const size_t frame = static_cast<size_t>(std::lround(cfg.frame_s * sr));
  const size_t ramp = std::max<size_t>(1, static_cast<size_t>(0.005 * sr));
  const double level = rng.uniform(0.7, 1.0) * 0.08;
  const double pitch = rng.log_uniform(0.97, 1.03);
  size_t pos = offset;
  for (int ph : phones) {
    const size_t len = frame * static_cast<size_t>(rng.integer(cfg.phone_dur_frames_min, cfg.phone_dur_frames_max));
    if (out.size() < pos + len) out.resize(pos + len, 0.0);
    const Phoneme& p = inventory[ph];
    for (const Partial& q : p.partials) {
      double f = (p.tonal ? q.freq * pitch : q.freq) * spk.warp;
      f = std::min(f, 0.95 * sr / 2.0);
      double amp = level * q.amp * spk.gain(f);
      double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double w = 2.0 * std::numbers::pi * f / sr;
      for (size_t n = 0; n < len; ++n) {
        double env = 1.0;
        if (n < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * n / ramp);
        if (len - 1 - n < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (len - 1 - n) / ramp));
        out[pos + n] += amp * env * std::sin(w * n + phase);
      }
    }
    pos += len;
  }
  return pos - offset;
}

Audio Finish(std::vector<double> buf, const SynthConfig& cfg, Rng& rng) {
  Audio a;
  a.sample_rate = cfg.sample_rate;
  a.samples.resize(buf.size());
  for (size_t n = 0; n < buf.size(); ++n) {
    double v = buf[n] + cfg.noise_std * rng.normal();
    a.samples[n] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  QuantizeToPcm16(a.samples);
  return a;
}

std::string Numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  auto at_least_one = [](int v, const char* name) {
    if (v < 1) Fail(ErrorKind::kConfig, std::string(name) + " must be >= 1");
  };
  at_least_one(vocab_size, "vocab_size");
  at_least_one(phonemes_per_term_min, "phonemes_per_term_min");
  at_least_one(phoneme_inventory_size, "phoneme_inventory_size");
  at_least_one(speakers, "speakers");
  at_least_one(utterances_per_term, "utterances_per_term");
  at_least_one(phone_dur_frames_min, "phone_dur_frames_min");
  at_least_one(words_per_track, "words_per_track");
  at_least_one(sample_rate, "sample_rate");
  if (phonemes_per_term_max < phonemes_per_term_min) Fail(ErrorKind::kConfig, "phonemes_per_term range is empty");
  if (phone_dur_frames_max < phone_dur_frames_min) Fail(ErrorKind::kConfig, "phone_dur_frames range is empty");
  if (noise_std < 0.0) Fail(ErrorKind::kConfig, "noise_std must be >= 0");
  if (speaker_transform_scale < 0.0) Fail(ErrorKind::kConfig, "speaker_transform_scale must be >= 0");
  if (speaker_warp < 0.0) Fail(ErrorKind::kConfig, "speaker_warp must be >= 0");
  if (filler_words_per_track < 0) Fail(ErrorKind::kConfig, "filler_words_per_track must be >= 0");
  if (gap_min_s < 0.0 || gap_max_s < gap_min_s) Fail(ErrorKind::kConfig, "gap range is invalid");
  if (edge_silence_s < 0.0 || query_margin_s < 0.0) Fail(ErrorKind::kConfig, "silence margins must be >= 0");
  if (heldout_speakers < 0 || n_queries < 0) Fail(ErrorKind::kConfig, "query settings must be >= 0");
  if (n_queries > 0 && heldout_speakers == 0) Fail(ErrorKind::kConfig, "queries need at least one held-out speaker");
  if (!(frame_s > 0.0)) Fail(ErrorKind::kConfig, "frame_s must be positive");
}

std::vector<TrackRecord> SynthCorpus::archive_records() const {
  std::vector<TrackRecord> out;
  for (const auto& t : archive) out.push_back(t.record);
  return out;
}

std::vector<TrackRecord> SynthCorpus::query_records() const {
  std::vector<TrackRecord> out;
  for (const auto& t : queries) out.push_back(t.record);
  return out;
}

std::string TermName(int v) { return Numbered("w", v); }
std::string SpeakerName(int s) { return Numbered("spk", s); }

SynthCorpus SynthesizeCorpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_max = HzToMel(nyquist);

  std::vector<Phoneme> inventory;
  for (int i = 0; i < cfg.phoneme_inventory_size; ++i) inventory.push_back(MakePhoneme(rng, nyquist));

  auto random_word = [&] {
    int n = rng.integer(cfg.phonemes_per_term_min, cfg.phonemes_per_term_max);
    std::vector<int> phones;
    for (int i = 0; i < n; ++i) {
      int ph;
      do {
        ph = rng.integer(0, cfg.phoneme_inventory_size - 1);
      } while (cfg.phoneme_inventory_size > 1 && !phones.empty() && ph == phones.back());
      phones.push_back(ph);
    }
    return phones;
  };
  std::vector<std::vector<int>> terms;
  for (int v = 0; v < cfg.vocab_size; ++v) terms.push_back(random_word());

  const int total_speakers = cfg.speakers + cfg.heldout_speakers;
  std::vector<Speaker> speakers;
  for (int s = 0; s < total_speakers; ++s) speakers.push_back(MakeSpeaker(rng, cfg.speaker_transform_scale, cfg.speaker_warp, mel_max));

  // Utterance (v, u) belongs to speaker (3v + u) mod S.
  std::vector<std::vector<int>> by_speaker(cfg.speakers);
  for (int v = 0; v < cfg.vocab_size; ++v) {
    for (int u = 0; u < cfg.utterances_per_term; ++u) by_speaker[(3 * v + u) % cfg.speakers].push_back(v);
  }

  SynthCorpus corpus;
  const double sr = cfg.sample_rate;
  int track_no = 0;
  for (int s = 0; s < cfg.speakers; ++s) {
    std::vector<int> words = by_speaker[s];
    std::shuffle(words.begin(), words.end(), rng.engine());
    for (size_t w0 = 0; w0 < words.size(); w0 += cfg.words_per_track) {
      size_t w1 = std::min(words.size(), w0 + cfg.words_per_track);
      SynthTrack t;
      t.record.track_id = Numbered("t", track_no++);
      t.record.path = "archive/" + t.record.track_id + ".wav";
      t.record.speaker_id = SpeakerName(s);
      // Term indices, with -1 marking an unannotated filler word.
      std::vector<int> items(words.begin() + w0, words.begin() + w1);
      if (cfg.filler_words_per_track > 0) {
        items.insert(items.end(), cfg.filler_words_per_track, -1);
        std::shuffle(items.begin(), items.end(), rng.engine());
      }
      std::vector<double> buf;
      size_t pos = static_cast<size_t>(std::lround(cfg.edge_silence_s * sr));
      for (size_t w = 0; w < items.size(); ++w) {
        if (w > 0) pos += static_cast<size_t>(std::lround(rng.uniform(cfg.gap_min_s, cfg.gap_max_s) * sr));
        if (items[w] < 0) {
          pos += RenderWord(random_word(), inventory, speakers[s], cfg, rng, buf, pos);
          continue;
        }
        size_t len = RenderWord(terms[items[w]], inventory, speakers[s], cfg, rng, buf, pos);
        t.record.occurrences.push_back({TermName(items[w]), pos / sr, (pos + len) / sr});
        pos += len;
      }
      buf.resize(pos + static_cast<size_t>(std::lround(cfg.edge_silence_s * sr)), 0.0);
      t.audio = Finish(std::move(buf), cfg, rng);
      corpus.archive.push_back(std::move(t));
    }
  }

  for (int q = 0; q < cfg.n_queries; ++q) {
    int v = q % cfg.vocab_size;
    int s = cfg.speakers + (q / cfg.vocab_size) % cfg.heldout_speakers;
    SynthTrack t;
    t.record.track_id = Numbered("q", q);
    t.record.path = "queries/" + t.record.track_id + ".wav";
    t.record.speaker_id = SpeakerName(s);
    std::vector<double> buf;
    size_t pos = static_cast<size_t>(std::lround(cfg.query_margin_s * sr));
    size_t len = RenderWord(terms[v], inventory, speakers[s], cfg, rng, buf, pos);
    t.record.occurrences.push_back({TermName(v), pos / sr, (pos + len) / sr});
    buf.resize(pos + len + static_cast<size_t>(std::lround(cfg.query_margin_s * sr)), 0.0);
    t.audio = Finish(std::move(buf), cfg, rng);
    corpus.queries.push_back(std::move(t));
  }
  return corpus;
}

void WriteSynthCorpus(const SynthCorpus& corpus, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "archive", ec);
  if (!ec) fs::create_directories(fs::path(out_dir) / "queries", ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create output directory " + out_dir + ": " + ec.message());
  for (const auto& t : corpus.archive) WriteWav((fs::path(out_dir) / t.record.path).string(), t.audio);
  for (const auto& t : corpus.queries) WriteWav((fs::path(out_dir) / t.record.path).string(), t.audio);
  SaveManifest((fs::path(out_dir) / "archive.jsonl").string(), corpus.archive_records());
  SaveManifest((fs::path(out_dir) / "queries.jsonl").string(), corpus.query_records());
}

}  // namespace tokstd
