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

#include "tokstd/quantizer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace tokstd {

Codebook InitCodebook(const Mat& samples, int k, uint64_t seed) {
  if (k < 2) Fail(ErrorKind::kConfig, "codebook needs K >= 2");
  if (samples.rows() < k) {
    Fail(ErrorKind::kInput, "codebook init needs at least K=" + std::to_string(k) + " samples, got " +
                                std::to_string(samples.rows()));
  }
  std::vector<int> order(samples.rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Codebook cb;
  cb.seed = seed;
  cb.centroids.resize(k, samples.cols());
  int filled = 0;
  for (int idx : order) {
    if (filled == k) break;
    Eigen::RowVectorXd v = samples.row(idx);
    double n = v.norm();
    if (n <= 0.0) continue;
    v /= n;
    bool duplicate = false;
    for (int c = 0; c < filled && !duplicate; ++c) duplicate = (cb.centroids.row(c) - v).squaredNorm() < 1e-20;
    if (duplicate) continue;
    cb.centroids.row(filled++) = v;
  }
  if (filled < k) {
    Fail(ErrorKind::kInput, "only " + std::to_string(filled) + " distinct samples for K=" + std::to_string(k));
  }
  cb.counts = Vec::Ones(k);
  cb.sums = cb.centroids;
  cb.dead_streak.assign(k, 0);
  return cb;
}

int NearestCode(const Codebook& cb, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  if (z.size() != cb.dim()) Fail(ErrorKind::kShape, "embedding dimension does not match the codebook");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cb.size(); ++i) {
    double d = (cb.centroids.row(i) - z).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Quantized Quantize(const Codebook& cb, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  int token = NearestCode(cb, z);
  return Quantized{token, cb.centroids.row(token).transpose()};
}

TokenSequence TokenizeSequence(const Codebook& cb, const Mat& z, Exec exec) {
  TokenSequence out;
  out.tokens.resize(z.rows());
  const int rows = static_cast<int>(z.rows());
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static) num_threads(Threads())
    for (int t = 0; t < rows; ++t) out.tokens[t] = NearestCode(cb, z.row(t));
  } else {
    for (int t = 0; t < rows; ++t) out.tokens[t] = NearestCode(cb, z.row(t));
  }
  return out;
}

Mat LookupCentroids(const Codebook& cb, const std::vector<int>& tokens) {
  Mat out(tokens.size(), cb.dim());
  for (size_t t = 0; t < tokens.size(); ++t) out.row(t) = cb.centroids.row(tokens[t]);
  return out;
}

Codebook EmaUpdate(const Codebook& cb, std::span<const int> tokens, const Mat& z) {
  if (static_cast<Eigen::Index>(tokens.size()) != z.rows()) {
    Fail(ErrorKind::kShape, "assignment count does not match embedding rows");
  }
  const int k = cb.size();
  Codebook out = cb;
  if (out.dead_streak.size() != static_cast<size_t>(k)) out.dead_streak.assign(k, 0);
  Vec batch_counts = Vec::Zero(k);
  Mat batch_sums = Mat::Zero(k, cb.dim());
  for (size_t r = 0; r < tokens.size(); ++r) {
    int tok = tokens[r];
    if (tok < 0 || tok >= k) Fail(ErrorKind::kRange, "token " + std::to_string(tok) + " out of range");
    batch_counts[tok] += 1.0;
    batch_sums.row(tok) += z.row(r);
  }
  const double g = cb.decay;
  out.counts = g * cb.counts + (1.0 - g) * batch_counts;
  out.sums = g * cb.sums + (1.0 - g) * batch_sums;
  const double total = out.counts.sum();
  const double smoothing = 1.0 + k * cb.epsilon / std::max(total, 1e-300);
  for (int i = 0; i < k; ++i) {
    Eigen::RowVectorXd c = out.sums.row(i) / ((out.counts[i] + cb.epsilon) * smoothing);
    double n = c.norm();
    if (n > 1e-12) out.centroids.row(i) = c / n;
  }
  ++out.updates;

  const double dead_level = cb.dead_fraction * total / k;
  std::mt19937_64 rng(MixSeed(cb.seed, out.updates));
  for (int i = 0; i < k; ++i) {
    out.dead_streak[i] = out.counts[i] < dead_level ? out.dead_streak[i] + 1 : 0;
    if (!out.reseed_dead || out.dead_streak[i] < out.dead_patience || z.rows() == 0) continue;
    std::uniform_int_distribution<Eigen::Index> pick(0, z.rows() - 1);
    Eigen::RowVectorXd v = z.row(pick(rng));
    double n = v.norm();
    if (n <= 0.0) continue;
    out.centroids.row(i) = v / n;
    out.counts[i] = total / k;
    out.sums.row(i) = out.centroids.row(i) * out.counts[i];
    out.dead_streak[i] = 0;
  }
  return out;
}

double CommitmentLoss(const Mat& z, const Mat& z_q, const Mat& z_other, const Mat& z_other_q) {
  if (z.rows() != z_q.rows() || z.cols() != z_q.cols() || z_other.rows() != z_other_q.rows() ||
      z_other.cols() != z_other_q.cols()) {
    Fail(ErrorKind::kShape, "commitment loss needs matching sequence/quantized shapes");
  }
  if (z.rows() == 0 || z_other.rows() == 0) Fail(ErrorKind::kShape, "commitment loss on an empty sequence");
  return (z - z_q).squaredNorm() / static_cast<double>(z.rows()) +
         (z_other - z_other_q).squaredNorm() / static_cast<double>(z_other.rows());
}

Mat CommitmentGrad(const Mat& z, const Mat& z_q) { return 2.0 * (z - z_q) / static_cast<double>(z.rows()); }

}  // namespace tokstd
