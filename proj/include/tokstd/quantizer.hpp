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
#include <span>
#include <vector>

#include "tokstd/common.hpp"
#include "tokstd/parallel.hpp"

namespace tokstd {

struct Codebook {
  Mat centroids;  // K x d, unit-norm rows
  Vec counts;     // EMA assignment counts N_i
  Mat sums;       // EMA embedding sums m_i
  double decay = 0.99;
  double epsilon = 1e-5;

  // Dead-code re-seeding.
  bool reseed_dead = true;
  int dead_patience = 10;
  double dead_fraction = 1e-3;
  std::vector<int> dead_streak;
  uint64_t seed = 0;
  uint64_t updates = 0;

  int size() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
};

struct TokenSequence {
  std::vector<int> tokens;
};

struct Quantized {
  int token;
  Vec centroid;
};

/// Picks K distinct rows of `samples` (seeded shuffle), L2-normalized.
Codebook InitCodebook(const Mat& samples, int k, uint64_t seed);

/// Nearest centroid by squared Euclidean distance, ties to the lowest index.
int NearestCode(const Codebook& cb, const Eigen::Ref<const Eigen::RowVectorXd>& z);
Quantized Quantize(const Codebook& cb, const Eigen::Ref<const Eigen::RowVectorXd>& z);

TokenSequence TokenizeSequence(const Codebook& cb, const Mat& z, Exec exec = Exec::kSerial);

/// Rows of the centroids selected by `tokens`.
Mat LookupCentroids(const Codebook& cb, const std::vector<int>& tokens);

/// One EMA step from a batch of (token, embedding) assignments; embeddings are
/// the rows of `z`. Returns the updated codebook.
Codebook EmaUpdate(const Codebook& cb, std::span<const int> tokens, const Mat& z);

/// Mean squared residual of each sequence against its quantized version,
/// summed over the two sequences.
double CommitmentLoss(const Mat& z, const Mat& z_q, const Mat& z_other, const Mat& z_other_q);

/// Gradient of one sequence's term of CommitmentLoss with respect to z
/// (centroids held constant).
Mat CommitmentGrad(const Mat& z, const Mat& z_q);

}  // namespace tokstd
