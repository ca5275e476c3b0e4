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

#include "tokstd/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tokstd/checkpoint.hpp"

namespace tokstd {
namespace {

uint64_t Fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

const PaddedUtterance& Side(const BatchItem& item, int side) { return side == 0 ? item.a : item.b; }

Mat WordRows(const Mat& full, const PaddedUtterance& u) {
  return full.middleRows(u.word_start, u.word_end - u.word_start);
}

std::string UtteranceKey(const UtteranceRef& ref) {
  std::ostringstream os;
  os.precision(17);
  os << ref.track_id << '@' << ref.occurrence.start_s;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(tau > 0.0)) Fail(ErrorKind::kDomain, "tau must be positive");
  if (!(lambda >= 0.0)) Fail(ErrorKind::kConfig, "lambda must be >= 0");
  if (negatives < 0) Fail(ErrorKind::kConfig, "negatives must be >= 0");
  if (batch_size < 1) Fail(ErrorKind::kConfig, "batch_size must be >= 1");
  if (epochs < 0) Fail(ErrorKind::kConfig, "epochs must be >= 0");
  if (!(lr >= 0.0)) Fail(ErrorKind::kConfig, "lr must be >= 0");
  if (!(segment_len > 0.0)) Fail(ErrorKind::kConfig, "segment_len must be positive");
  if (codebook_size < 2) Fail(ErrorKind::kConfig, "codebook_size must be >= 2");
  if (!(codebook_decay > 0.0 && codebook_decay < 1.0)) Fail(ErrorKind::kConfig, "codebook_decay must be in (0, 1)");
}

std::vector<NegativeRef> EligibleNegatives(const TrainBatch& batch, const std::string& anchor_term) {
  std::map<std::string, std::pair<int, int>> utterances;
  for (int i = 0; i < static_cast<int>(batch.pairs.size()); ++i) {
    const BatchItem& item = batch.pairs[i];
    if (item.term == anchor_term) continue;
    utterances.try_emplace(item.key_a, i, 0);
    utterances.try_emplace(item.key_b, i, 1);
  }
  std::vector<NegativeRef> out;
  for (const auto& [key, where] : utterances) {
    const PaddedUtterance& u = Side(batch.pairs[where.first], where.second);
    for (int f = u.word_start; f < u.word_end; ++f) out.push_back(NegativeRef{where.first, where.second, f});
  }
  return out;
}

std::vector<NegativeRef> SampleNegatives(const TrainBatch& batch, const std::string& anchor_term, int n,
                                         uint64_t seed) {
  if (n <= 0) return {};
  std::vector<NegativeRef> pool = EligibleNegatives(batch, anchor_term);
  if (pool.empty()) {
    Fail(ErrorKind::kSampling, "no negatives for term \"" + anchor_term + "\": every pair in the batch shares it");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  std::vector<NegativeRef> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) out.push_back(pool[pick(rng)]);
  return out;
}

ContrastiveGrad ContrastiveLossGrad(const Mat& anchors, const Mat& positives, const Mat& negatives, double tau) {
  if (!(tau > 0.0)) Fail(ErrorKind::kDomain, "tau must be positive");
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols()) {
    Fail(ErrorKind::kShape, "anchors and positives must have the same shape");
  }
  ContrastiveGrad g;
  const int t_count = static_cast<int>(anchors.rows());
  g.d_anchors = Mat::Zero(anchors.rows(), anchors.cols());
  g.d_positives = Mat::Zero(positives.rows(), positives.cols());
  g.d_negatives = Mat::Zero(negatives.rows(), negatives.cols());
  if (negatives.rows() == 0 || t_count == 0) return g;
  if (negatives.cols() != anchors.cols()) Fail(ErrorKind::kShape, "negative embedding dimension mismatch");

  const double inv_t = 1.0 / t_count;
  Mat neg_logits = (anchors * negatives.transpose()) / tau;  // T x N
  double total = 0.0;
  for (int t = 0; t < t_count; ++t) {
    double pos = anchors.row(t).dot(positives.row(t)) / tau;
    double mx = std::max(pos, neg_logits.row(t).maxCoeff());
    double denom = std::exp(pos - mx) + (neg_logits.row(t).array() - mx).exp().sum();
    double lse = mx + std::log(denom);
    total += lse - pos;
    // d/dlogit of (lse - pos): softmax weights, minus one on the positive.
    double w_pos = std::exp(pos - lse) - 1.0;
    Eigen::RowVectorXd w_neg = (neg_logits.row(t).array() - lse).exp();
    double s = inv_t / tau;
    g.d_anchors.row(t) += s * (w_pos * positives.row(t) + w_neg * negatives);
    g.d_positives.row(t) += s * w_pos * anchors.row(t);
    g.d_negatives.noalias() += s * w_neg.transpose() * anchors.row(t);
  }
  g.loss = total * inv_t;
  return g;
}

double ContrastiveLoss(const Mat& anchors, const Mat& positives, const Mat& negatives, double tau) {
  return ContrastiveLossGrad(anchors, positives, negatives, tau).loss;
}

namespace {

LossAndGradsResult ComputeBatch(const TrainBatch& batch, const EncoderModel& model, const Codebook& codebook,
                                const TrainConfig& cfg, uint64_t step_seed, bool want_grads, Exec exec) {
  if (!(cfg.tau > 0.0)) Fail(ErrorKind::kDomain, "tau must be positive");
  const int pairs = static_cast<int>(batch.pairs.size());
  if (pairs == 0) Fail(ErrorKind::kInput, "empty training batch");
  const int utts = 2 * pairs;

  // Forward every utterance; in strict mode context frames become silence.
  std::vector<EncoderCache> caches(utts);
  std::vector<Mat> full(utts);
  auto encode_one = [&](int u) {
    const PaddedUtterance& pu = Side(batch.pairs[u / 2], u % 2);
    if (cfg.keep_context) {
      full[u] = Encode(model, pu.features.data, Exec::kSerial, &caches[u]).rows;
    } else {
      Mat x = Mat::Constant(pu.features.data.rows(), pu.features.data.cols(), batch.pad_value);
      x.middleRows(pu.word_start, pu.word_end - pu.word_start) =
          pu.features.data.middleRows(pu.word_start, pu.word_end - pu.word_start);
      full[u] = Encode(model, x, Exec::kSerial, &caches[u]).rows;
    }
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic) num_threads(Threads())
    for (int u = 0; u < utts; ++u) encode_one(u);
  } else {
    for (int u = 0; u < utts; ++u) encode_one(u);
  }

  std::vector<Mat> d_full(utts);
  for (int u = 0; u < utts; ++u) d_full[u] = Mat::Zero(full[u].rows(), full[u].cols());

  LossAndGradsResult res;
  const double inv_b = 1.0 / pairs;
  double sum_contrast = 0.0, sum_commit = 0.0, pair_sum = 0.0;
  std::vector<Mat> assigned_parts;
  for (int i = 0; i < pairs; ++i) {
    const BatchItem& item = batch.pairs[i];
    Mat za = WordRows(full[2 * i], item.a);
    Mat zb = WordRows(full[2 * i + 1], item.b);

    Alignment align = DtwAlign(za, zb);
    std::vector<PositivePair> pos = MinePositives(za, zb, align);
    const int anchor_side = align.swapped ? 1 : 0;
    const Mat& anchor = align.swapped ? zb : za;
    const Mat& target = align.swapped ? za : zb;
    Mat positives(pos.size(), anchor.cols());
    for (size_t t = 0; t < pos.size(); ++t) positives.row(t) = target.row(pos[t].positive_index);

    uint64_t pair_seed = MixSeed(step_seed, Fnv1a(item.key_a + "|" + item.key_b));
    std::vector<NegativeRef> negs = SampleNegatives(batch, item.term, cfg.negatives, pair_seed);
    Mat neg(negs.size(), anchor.cols());
    for (size_t n = 0; n < negs.size(); ++n) neg.row(n) = full[2 * negs[n].item + negs[n].side].row(negs[n].frame);

    ContrastiveGrad cg = ContrastiveLossGrad(anchor, positives, neg, cfg.tau);

    TokenSequence ta = TokenizeSequence(codebook, za);
    TokenSequence tb = TokenizeSequence(codebook, zb);
    Mat qa = LookupCentroids(codebook, ta.tokens);
    Mat qb = LookupCentroids(codebook, tb.tokens);
    double commit = CommitmentLoss(za, qa, zb, qb);

    double pair_loss = cg.loss + cfg.lambda * commit;
    if (!std::isfinite(pair_loss)) {
      Fail(ErrorKind::kNumerical, "non-finite loss for pair " + std::to_string(i) + " (term \"" + item.term + "\")");
    }
    sum_contrast += cg.loss;
    sum_commit += commit;
    pair_sum += pair_loss;

    res.tokens.insert(res.tokens.end(), ta.tokens.begin(), ta.tokens.end());
    res.tokens.insert(res.tokens.end(), tb.tokens.begin(), tb.tokens.end());
    assigned_parts.push_back(za);
    assigned_parts.push_back(zb);

    if (!want_grads) continue;
    // Scatter word-frame gradients back into the full-window buffers.
    const PaddedUtterance& anchor_u = Side(item, anchor_side);
    const PaddedUtterance& target_u = Side(item, 1 - anchor_side);
    Mat& d_anchor = d_full[2 * i + anchor_side];
    Mat& d_target = d_full[2 * i + 1 - anchor_side];
    for (size_t t = 0; t < pos.size(); ++t) {
      d_anchor.row(anchor_u.word_start + static_cast<int>(t)) += inv_b * cg.d_anchors.row(t);
      d_target.row(target_u.word_start + pos[t].positive_index) += inv_b * cg.d_positives.row(t);
    }
    for (size_t n = 0; n < negs.size(); ++n) {
      d_full[2 * negs[n].item + negs[n].side].row(negs[n].frame) += inv_b * cg.d_negatives.row(n);
    }
    if (cfg.lambda != 0.0) {
      d_full[2 * i].middleRows(item.a.word_start, za.rows()) += (inv_b * cfg.lambda) * CommitmentGrad(za, qa);
      d_full[2 * i + 1].middleRows(item.b.word_start, zb.rows()) += (inv_b * cfg.lambda) * CommitmentGrad(zb, qb);
    }
  }

  res.loss.contrast = sum_contrast * inv_b;
  res.loss.commit = sum_commit * inv_b;
  res.loss.pair_sum = pair_sum;
  res.loss.total = pair_sum * inv_b;
  if (!std::isfinite(res.loss.total)) Fail(ErrorKind::kNumerical, "non-finite batch loss");

  Eigen::Index rows = 0;
  for (const Mat& m : assigned_parts) rows += m.rows();
  res.assigned.resize(rows, model.config.d_embed);
  rows = 0;
  for (const Mat& m : assigned_parts) {
    res.assigned.middleRows(rows, m.rows()) = m;
    rows += m.rows();
  }

  if (!want_grads) return res;

  // Per-utterance gradient buffers reduced in utterance order, so the
  // parallel and serial schedules agree bit for bit.
  std::vector<EncoderModel> parts(utts);
  auto backward_one = [&](int u) {
    parts[u] = model.ZerosLike();
    EncodeBackward(model, caches[u], d_full[u], parts[u], Exec::kSerial);
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic) num_threads(Threads())
    for (int u = 0; u < utts; ++u) backward_one(u);
  } else {
    for (int u = 0; u < utts; ++u) backward_one(u);
  }
  res.grads = model.ZerosLike();
  std::vector<ParamView> dst = TrainableParams(res.grads);
  for (int u = 0; u < utts; ++u) {
    std::vector<ParamView> src = TrainableParams(parts[u]);
    for (size_t p = 0; p < dst.size(); ++p) {
      for (size_t k = 0; k < dst[p].size; ++k) dst[p].data[k] += src[p].data[k];
    }
  }
  return res;
}

}  // namespace

LossBreakdown TotalLoss(const TrainBatch& batch, const EncoderModel& model, const Codebook& codebook,
                        const TrainConfig& cfg, uint64_t step_seed, Exec exec) {
  return ComputeBatch(batch, model, codebook, cfg, step_seed, false, exec).loss;
}

LossAndGradsResult LossAndGrads(const TrainBatch& batch, const EncoderModel& model, const Codebook& codebook,
                                const TrainConfig& cfg, uint64_t step_seed, Exec exec) {
  return ComputeBatch(batch, model, codebook, cfg, step_seed, true, exec);
}

AdamState InitAdam(const EncoderModel& model) { return AdamState{model.ZerosLike(), model.ZerosLike(), 0}; }

void AdamStep(EncoderModel& model, const EncoderModel& grads, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::vector<ParamView> p = TrainableParams(model);
  std::vector<ParamView> g = TrainableParams(const_cast<EncoderModel&>(grads));
  std::vector<ParamView> m = TrainableParams(state.m);
  std::vector<ParamView> v = TrainableParams(state.v);
  for (size_t i = 0; i < p.size(); ++i) {
    for (size_t k = 0; k < p[i].size; ++k) {
      double gk = g[i].data[k];
      m[i].data[k] = b1 * m[i].data[k] + (1.0 - b1) * gk;
      v[i].data[k] = b2 * v[i].data[k] + (1.0 - b2) * gk * gk;
      double m_hat = m[i].data[k] / c1;
      double v_hat = v[i].data[k] / c2;
      p[i].data[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

int WindowFrames(const FeatureConfig& fcfg, double segment_len) {
  size_t samples = static_cast<size_t>(std::lround(segment_len * fcfg.sample_rate));
  int frames = fcfg.frames_for(samples);
  if (frames < 1) Fail(ErrorKind::kConfig, "segment length shorter than one feature window");
  return frames;
}

BatchItem PrepareItem(const UtterancePair& pair, const std::vector<FeatureSequence>& track_features, int l_frames,
                      double pad_value) {
  BatchItem item;
  item.term = pair.term;
  item.a = ContextualPad(track_features.at(pair.utt_a.track_index), pair.utt_a.occurrence, l_frames, pad_value);
  item.b = ContextualPad(track_features.at(pair.utt_b.track_index), pair.utt_b.occurrence, l_frames, pad_value);
  item.key_a = UtteranceKey(pair.utt_a);
  item.key_b = UtteranceKey(pair.utt_b);
  return item;
}

std::string FormatTrainLogCsv(const std::vector<TrainLogRow>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,step,loss_contrast,loss_commit,loss_total\n";
  for (const TrainLogRow& r : rows) {
    os << r.epoch << ',' << r.step << ',' << r.loss_contrast << ',' << r.loss_commit << ',' << r.loss_total << '\n';
  }
  return os.str();
}

Codebook InitCodebookFromCorpus(const EncoderModel& model, const std::vector<TrackRecord>& records,
                                const std::vector<FeatureSequence>& track_features, int l_frames, double pad_value,
                                int k, uint64_t seed) {
  std::vector<Mat> parts;
  Eigen::Index rows = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    for (const TermOccurrence& occ : records[i].occurrences) {
      PaddedUtterance pu = ContextualPad(track_features[i], occ, l_frames, pad_value);
      Mat z = Encode(model, pu.features.data).rows;
      parts.push_back(z.middleRows(pu.word_start, pu.word_end - pu.word_start));
      rows += parts.back().rows();
    }
  }
  Mat pool(rows, model.config.d_embed);
  rows = 0;
  for (const Mat& p : parts) {
    pool.middleRows(rows, p.rows()) = p;
    rows += p.rows();
  }
  return InitCodebook(pool, k, seed);
}

namespace {

std::vector<std::vector<UtterancePair>> MakeBatches(std::vector<UtterancePair> pairs, int batch_size) {
  std::vector<std::vector<UtterancePair>> batches;
  for (size_t i = 0; i < pairs.size(); i += batch_size) {
    batches.emplace_back(pairs.begin() + i, pairs.begin() + std::min(pairs.size(), i + batch_size));
  }
  auto single_term = [](const std::vector<UtterancePair>& b) {
    return std::all_of(b.begin(), b.end(), [&](const UtterancePair& p) { return p.term == b.front().term; });
  };
  // Fold single-term batches into a neighbour so every batch has negatives.
  for (size_t i = 0; i < batches.size();) {
    if (batches.size() > 1 && single_term(batches[i])) {
      size_t into = i > 0 ? i - 1 : i + 1;
      batches[into].insert(batches[into].end(), batches[i].begin(), batches[i].end());
      batches.erase(batches.begin() + i);
      if (i > 0) --i;
      continue;
    }
    ++i;
  }
  return batches;
}

}  // namespace

TrainResult Fit(const std::vector<TrackRecord>& records, const std::vector<FeatureSequence>& track_features,
                const TrainConfig& cfg, const EncoderConfig& enc_cfg, const FeatureConfig& fcfg,
                const FitOptions& options) {
  cfg.validate();
  enc_cfg.validate();
  if (records.size() != track_features.size()) Fail(ErrorKind::kShape, "one feature sequence per track required");
  std::set<std::string> terms;
  for (const auto& p : EnumeratePairs(records)) terms.insert(p.term);
  if (terms.empty()) Fail(ErrorKind::kEmptyCorpus, "no term has two or more occurrences");
  if (terms.size() < 2 && cfg.negatives > 0) {
    Fail(ErrorKind::kEmptyCorpus, "training needs pairs from at least two distinct terms");
  }

  const int l_frames = WindowFrames(fcfg, cfg.segment_len);
  const double pad_value = fcfg.silence_value();

  TrainResult result;
  result.model = InitEncoder(enc_cfg, MixSeed(cfg.seed, 1));
  std::vector<const Mat*> feats;
  for (const FeatureSequence& f : track_features) feats.push_back(&f.data);
  FitInputStats(result.model, feats);
  result.codebook = InitCodebookFromCorpus(result.model, records, track_features, l_frames, pad_value,
                                           cfg.codebook_size, MixSeed(cfg.seed, 2));
  result.codebook.decay = cfg.codebook_decay;
  result.codebook.reseed_dead = cfg.reseed_dead_codes;

  AdamState adam = InitAdam(result.model);
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<UtterancePair> pairs = ExtractPairs(records, MixSeed(cfg.seed, 1000 + epoch), cfg.pairs_per_term);
    for (const auto& batch_pairs : MakeBatches(std::move(pairs), cfg.batch_size)) {
      TrainBatch batch;
      batch.pad_value = pad_value;
      for (const UtterancePair& p : batch_pairs) batch.pairs.push_back(PrepareItem(p, track_features, l_frames, pad_value));
      ++step;
      LossAndGradsResult r;
      try {
        r = LossAndGrads(batch, result.model, result.codebook, cfg, MixSeed(cfg.seed, 1u << 20 | step), options.exec);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumerical) throw;
        std::string terms_in_batch;
        for (const BatchItem& it : batch.pairs) terms_in_batch += " " + it.key_a + "/" + it.key_b;
        Fail(ErrorKind::kNumerical, "epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " +
                                        e.what() + "; batch:" + terms_in_batch);
      }
      AdamStep(result.model, r.grads, adam, cfg);
      result.codebook = EmaUpdate(result.codebook, r.tokens, r.assigned);
      TrainLogRow row{epoch, step, r.loss.contrast, r.loss.commit, r.loss.total};
      result.log.push_back(row);
      if (options.on_step) options.on_step(row);
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && epoch % cfg.checkpoint_every == 0) {
      SaveCheckpoint(cfg.checkpoint_path, result.model, result.codebook);
    }
  }
  return result;
}

}  // namespace tokstd
