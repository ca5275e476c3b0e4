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
#include <functional>
#include <string>
#include <vector>

#include "tokstd/align.hpp"
#include "tokstd/corpus.hpp"
#include "tokstd/encoder.hpp"
#include "tokstd/features.hpp"
#include "tokstd/quantizer.hpp"

namespace tokstd {

struct TrainConfig {
  double tau = 0.2;
  double lambda = 0.1;
  int negatives = 64;
  int batch_size = 32;
  int epochs = 600;
  double lr = 5e-4;
  uint64_t seed = 0;
  double segment_len = 1.0;

  int codebook_size = 256;
  double codebook_decay = 0.99;
  bool reseed_dead_codes = true;
  /// Pairs drawn per term each epoch; 0 uses every pair.
  size_t pairs_per_term = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// When false, every non-word frame of a training window is replaced by
  /// silence before encoding.
  bool keep_context = true;
  int checkpoint_every = 0;
  std::string checkpoint_path;

  void validate() const;

  /// Desk-scale schedule paired with EncoderConfig::TestPreset().
  static TrainConfig TestPreset() {
    TrainConfig t;
    t.epochs = 20;
    t.lr = 1e-3;
    t.codebook_size = 64;
    t.batch_size = 16;
    return t;
  }
};

struct BatchItem {
  PaddedUtterance a;
  PaddedUtterance b;
  std::string term;
  std::string key_a;  // utterance identities, used to deduplicate negatives
  std::string key_b;
};

struct TrainBatch {
  std::vector<BatchItem> pairs;
  double pad_value = 0.0;
};

/// A negative frame: pair index in the batch, side (0 = a, 1 = b) and frame
/// row inside that utterance's window.
struct NegativeRef {
  int item;
  int side;
  int frame;
  bool operator==(const NegativeRef&) const = default;
};

/// Frames eligible as negatives for `anchor_term`: word frames of distinct
/// utterances whose term differs, in canonical (utterance key) order.
std::vector<NegativeRef> EligibleNegatives(const TrainBatch& batch, const std::string& anchor_term);

/// N draws with replacement, uniform over EligibleNegatives.
std::vector<NegativeRef> SampleNegatives(const TrainBatch& batch, const std::string& anchor_term, int n,
                                         uint64_t seed);

/// Mean over anchors of -log softmax of the positive against the negatives.
/// Row t of `anchors` pairs with row t of `positives`; every anchor is scored
/// against all rows of `negatives`.
double ContrastiveLoss(const Mat& anchors, const Mat& positives, const Mat& negatives, double tau);

struct ContrastiveGrad {
  double loss = 0.0;
  Mat d_anchors;
  Mat d_positives;
  Mat d_negatives;
};
ContrastiveGrad ContrastiveLossGrad(const Mat& anchors, const Mat& positives, const Mat& negatives, double tau);

struct LossBreakdown {
  double contrast = 0.0;  // batch mean
  double commit = 0.0;    // batch mean
  double total = 0.0;     // mean of contrast + lambda * commit
  double pair_sum = 0.0;  // pre-mean sum of per-pair losses
};

struct LossAndGradsResult {
  LossBreakdown loss;
  EncoderModel grads;
  /// Quantizer assignments of every word frame, for the EMA update.
  std::vector<int> tokens;
  Mat assigned;
};

LossBreakdown TotalLoss(const TrainBatch& batch, const EncoderModel& model, const Codebook& codebook,
                        const TrainConfig& cfg, uint64_t step_seed, Exec exec = Exec::kSerial);

LossAndGradsResult LossAndGrads(const TrainBatch& batch, const EncoderModel& model, const Codebook& codebook,
                                const TrainConfig& cfg, uint64_t step_seed, Exec exec = Exec::kSerial);

struct AdamState {
  EncoderModel m;
  EncoderModel v;
  int64_t step = 0;
};

AdamState InitAdam(const EncoderModel& model);
void AdamStep(EncoderModel& model, const EncoderModel& grads, AdamState& state, const TrainConfig& cfg);

/// Training-window length in frames for a segment of `segment_len` seconds.
int WindowFrames(const FeatureConfig& fcfg, double segment_len);

BatchItem PrepareItem(const UtterancePair& pair, const std::vector<FeatureSequence>& track_features, int l_frames,
                      double pad_value);

struct TrainLogRow {
  int epoch;
  int step;
  double loss_contrast;
  double loss_commit;
  double loss_total;
};

std::string FormatTrainLogCsv(const std::vector<TrainLogRow>& rows);

struct TrainResult {
  EncoderModel model;
  Codebook codebook;
  std::vector<TrainLogRow> log;
};

struct FitOptions {
  Exec exec = Exec::kSerial;
  /// Called after every optimizer step.
  std::function<void(const TrainLogRow&)> on_step;
};

/// Contrastive + commitment training with Adam and EMA codebook updates.
/// `track_features[i]` are the features of `records[i]`.
TrainResult Fit(const std::vector<TrackRecord>& records, const std::vector<FeatureSequence>& track_features,
                const TrainConfig& cfg, const EncoderConfig& enc_cfg, const FeatureConfig& fcfg,
                const FitOptions& options = {});

/// Collects word-frame embeddings of the given pairs and seeds a codebook.
Codebook InitCodebookFromCorpus(const EncoderModel& model, const std::vector<TrackRecord>& records,
                                const std::vector<FeatureSequence>& track_features, int l_frames, double pad_value,
                                int k, uint64_t seed);

}  // namespace tokstd
