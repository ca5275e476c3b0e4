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

#include "tokstd/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace tokstd {

int FeatureConfig::win_samples() const { return static_cast<int>(std::lround(sample_rate * win_ms / 1000.0)); }

int FeatureConfig::hop_samples() const { return static_cast<int>(std::lround(sample_rate * hop_ms / 1000.0)); }

double FeatureConfig::silence_value() const { return std::log(log_floor); }

int FeatureConfig::frames_for(size_t n_samples) const {
  size_t win = static_cast<size_t>(win_samples());
  if (n_samples < win) return 0;
  return static_cast<int>((n_samples - win) / static_cast<size_t>(hop_samples())) + 1;
}

void FeatureConfig::validate() const {
  if (!(hop_ms > 0.0 && hop_ms <= win_ms)) Fail(ErrorKind::kConfig, "need 0 < hop_ms <= win_ms");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    Fail(ErrorKind::kConfig, "need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (n_mels < 1) Fail(ErrorKind::kConfig, "n_mels must be >= 1");
  if (!(log_floor > 0.0)) Fail(ErrorKind::kConfig, "log_floor must be positive");
  if (n_fft < win_samples() || (n_fft & (n_fft - 1)) != 0) {
    Fail(ErrorKind::kConfig, "n_fft must be a power of two >= the window length");
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelCenterFrequencies(const FeatureConfig& cfg) {
  double lo = HzToMel(cfg.fmin);
  double hi = HzToMel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) edges[i] = MelToHz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  return edges;
}

Mat BuildMelFilterbank(const FeatureConfig& cfg, int n_fft) {
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) Fail(ErrorKind::kConfig, "n_fft must be a power of two");
  if (cfg.n_mels < 1) Fail(ErrorKind::kConfig, "n_mels must be >= 1");
  if (!(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax && cfg.fmax <= cfg.sample_rate / 2.0)) {
    Fail(ErrorKind::kConfig, "need 0 <= fmin < fmax <= sample_rate / 2");
  }
  // edges[m], edges[m+1], edges[m+2] are the left foot, peak and right foot.
  std::vector<double> edges = MelCenterFrequencies(cfg);
  int bins = n_fft / 2 + 1;
  Mat fb = Mat::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * cfg.sample_rate / n_fft;
      double w = std::min((f - left) / (center - left), (right - f) / (right - center));
      fb(m, k) = std::max(0.0, w);
    }
    if (fb.row(m).maxCoeff() <= 0.0) {
      Fail(ErrorKind::kConfig, "mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise n_fft");
    }
  }
  return fb;
}

Featurizer::Featurizer(const FeatureConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  filterbank_ = BuildMelFilterbank(cfg_, cfg_.n_fft);
  int win = cfg_.win_samples();
  window_.resize(win);
  for (int n = 0; n < win; ++n) window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);
}

FeatureSequence Featurizer::operator()(std::span<const float> samples) const {
  int frames = cfg_.frames_for(samples.size());
  if (frames < 1) {
    Fail(ErrorKind::kLength, "input of " + std::to_string(samples.size()) + " samples is shorter than one window (" +
                                 std::to_string(cfg_.win_samples()) + ")");
  }
  const int win = cfg_.win_samples();
  const int hop = cfg_.hop_samples();
  const int bins = cfg_.n_fft / 2 + 1;
  const double floor_log = std::log(cfg_.log_floor);

  Eigen::FFT<double> fft;
  std::vector<double> frame(cfg_.n_fft, 0.0);
  std::vector<std::complex<double>> spectrum;
  Vec power(bins);

  FeatureSequence out;
  out.hop_ms = cfg_.hop_ms;
  out.data.resize(frames, cfg_.n_mels);
  for (int t = 0; t < frames; ++t) {
    const float* src = samples.data() + static_cast<size_t>(t) * hop;
    for (int n = 0; n < win; ++n) frame[n] = window_[n] * src[n];
    fft.fwd(spectrum, frame);
    for (int k = 0; k < bins; ++k) power[k] = std::norm(spectrum[k]);
    Vec mel = filterbank_ * power;
    for (int m = 0; m < cfg_.n_mels; ++m) {
      out.data(t, m) = mel[m] > cfg_.log_floor ? std::log(mel[m]) : floor_log;
    }
  }
  return out;
}

FeatureSequence Featurize(std::span<const float> samples, const FeatureConfig& cfg) {
  return Featurizer(cfg)(samples);
}

std::pair<int, int> OccurrenceFrames(const TermOccurrence& occ, double hop_ms) {
  int first = static_cast<int>(std::lround(occ.start_s * 1000.0 / hop_ms));
  int last = static_cast<int>(std::lround(occ.end_s * 1000.0 / hop_ms));
  return {first, std::max(last, first + 1)};
}

PaddedUtterance ContextualPad(const FeatureSequence& track, const TermOccurrence& occ, int l_frames,
                              double pad_value, bool keep_context) {
  if (l_frames < 1) Fail(ErrorKind::kConfig, "window length must be >= 1 frame");
  auto [first, last] = OccurrenceFrames(occ, track.hop_ms);
  const int track_frames = track.frames();
  if (occ.start_s < 0.0 || first >= track_frames || last > track_frames + 2) {
    Fail(ErrorKind::kRange, "occurrence \"" + occ.term + "\" [" + std::to_string(occ.start_s) + ", " +
                                std::to_string(occ.end_s) + ") s lies outside the track (" +
                                std::to_string(track_frames) + " frames)");
  }
  // The final window straddles the last hop, so up to two trailing frames
  // may be missing for an occurrence that ends exactly at the track end.
  last = std::min(last, track_frames);

  int span = last - first;
  int window_begin;
  PaddedUtterance out;
  if (span >= l_frames) {
    window_begin = first + (span - l_frames) / 2;
    out.word_start = 0;
    out.word_end = l_frames;
  } else {
    int offset = (l_frames - span) / 2;
    window_begin = first - offset;
    out.word_start = offset;
    out.word_end = offset + span;
  }
  out.features.hop_ms = track.hop_ms;
  out.features.data.setConstant(l_frames, track.dims(), pad_value);
  for (int r = 0; r < l_frames; ++r) {
    int src = window_begin + r;
    if (src < 0 || src >= track_frames) continue;
    if (!keep_context && (r < out.word_start || r >= out.word_end)) continue;
    out.features.data.row(r) = track.data.row(src);
  }
  return out;
}

std::vector<uint8_t> EncodeFeatureDump(const FeatureSequence& seq) {
  ByteWriter w;
  w.bytes("BSTF");
  w.u32(1);
  w.u32(static_cast<uint32_t>(seq.frames()));
  w.u32(static_cast<uint32_t>(seq.dims()));
  for (int t = 0; t < seq.frames(); ++t) {
    for (int d = 0; d < seq.dims(); ++d) w.f32(static_cast<float>(seq.data(t, d)));
  }
  return std::move(w.data());
}

FeatureSequence DecodeFeatureDump(std::span<const uint8_t> bytes, double hop_ms) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "BSTF") Fail(ErrorKind::kFormat, "not a BSTF feature dump");
  uint32_t version = r.u32();
  if (version != 1) Fail(ErrorKind::kFormat, "unsupported BSTF version " + std::to_string(version));
  uint32_t frames = r.u32();
  uint32_t dims = r.u32();
  if (r.remaining() != static_cast<size_t>(frames) * dims * 4) {
    Fail(ErrorKind::kCorruption, "BSTF payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                                     std::to_string(static_cast<size_t>(frames) * dims * 4));
  }
  FeatureSequence seq;
  seq.hop_ms = hop_ms;
  seq.data.resize(frames, dims);
  for (uint32_t t = 0; t < frames; ++t) {
    for (uint32_t d = 0; d < dims; ++d) seq.data(t, d) = r.f32();
  }
  return seq;
}

}  // namespace tokstd
