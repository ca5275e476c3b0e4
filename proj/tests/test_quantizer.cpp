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

#include <random>
#include <set>

#include "tokstd/quantizer.hpp"
#include "test_util.hpp"

namespace tokstd {
namespace {

using testing::RandomUnitRows;

Codebook TwoAxes() {
  Mat s(2, 2);
  s << 1, 0, 0, 1;
  Codebook cb = InitCodebook(s, 2, 0);
  // Fix the order for hand-checked cases.
  cb.centroids = s;
  cb.sums = s;
  return cb;
}

TEST(InitCodebook, PermutationOfDistinctInputs) {
  std::mt19937_64 rng(1);
  Mat s = RandomUnitRows(4, 3, rng);
  Codebook cb = InitCodebook(s, 4, 7);
  std::set<int> matched;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if ((cb.centroids.row(i) - s.row(j)).norm() < 1e-12) matched.insert(j);
    }
    EXPECT_NEAR(cb.centroids.row(i).norm(), 1.0, 1e-6);
    EXPECT_EQ(cb.counts[i], 1.0);
    EXPECT_EQ(cb.sums.row(i), cb.centroids.row(i));
  }
  EXPECT_EQ(matched.size(), 4u);
}

TEST(InitCodebook, DeterministicAndSkipsDuplicates) {
  std::mt19937_64 rng(2);
  Mat base = RandomUnitRows(5, 3, rng);
  Mat s(10, 3);
  s << base, base;
  Codebook a = InitCodebook(s, 5, 3), b = InitCodebook(s, 5, 3);
  EXPECT_EQ(a.centroids, b.centroids);
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) EXPECT_GT((a.centroids.row(i) - a.centroids.row(j)).norm(), 1e-9);
  }
  EXPECT_THROW(InitCodebook(s, 6, 3), Error);  // only 5 distinct rows
}

TEST(InitCodebook, Errors) {
  std::mt19937_64 rng(3);
  Mat s = RandomUnitRows(3, 2, rng);
  try {
    InitCodebook(s, 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInput);
  }
  try {
    InitCodebook(s, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Quantize, HandCheckedCases) {
  Codebook cb = TwoAxes();
  Eigen::RowVectorXd z(2);
  z << 0.8, 0.6;
  // |z - c0|^2 = 0.04 + 0.36 = 0.4 < |z - c1|^2 = 0.64 + 0.16 = 0.8
  EXPECT_EQ(NearestCode(cb, z), 0);
  z << std::sqrt(0.5), std::sqrt(0.5);
  EXPECT_EQ(NearestCode(cb, z), 0);  // tie -> lowest index
  Quantized q = Quantize(cb, cb.centroids.row(1));
  EXPECT_EQ(q.token, 1);
  EXPECT_EQ(q.centroid.transpose(), cb.centroids.row(1));
}

TEST(Quantize, CentroidsAreFixedPoints) {
  std::mt19937_64 rng(4);
  Codebook cb = InitCodebook(RandomUnitRows(64, 8, rng), 32, 1);
  for (int i = 0; i < 32; ++i) EXPECT_EQ(NearestCode(cb, cb.centroids.row(i)), i);
}

TEST(Tokenize, ElementwiseAndConstant) {
  std::mt19937_64 rng(5);
  Codebook cb = InitCodebook(RandomUnitRows(40, 6, rng), 10, 2);
  Mat z = RandomUnitRows(25, 6, rng);
  SetThreads(3);
  TokenSequence serial = TokenizeSequence(cb, z, Exec::kSerial);
  TokenSequence par = TokenizeSequence(cb, z, Exec::kParallel);
  SetThreads(1);
  ASSERT_EQ(serial.tokens.size(), 25u);
  EXPECT_EQ(serial.tokens, par.tokens);
  for (int t = 0; t < 25; ++t) {
    int best = 0;
    for (int i = 1; i < 10; ++i) {
      if ((z.row(t) - cb.centroids.row(i)).squaredNorm() < (z.row(t) - cb.centroids.row(best)).squaredNorm()) best = i;
    }
    EXPECT_EQ(serial.tokens[t], best);
  }
  Mat same = cb.centroids.row(3).replicate(7, 1);
  EXPECT_EQ(TokenizeSequence(cb, same).tokens, std::vector<int>(7, 3));
  Mat looked = LookupCentroids(cb, serial.tokens);
  EXPECT_EQ(looked.row(4), cb.centroids.row(serial.tokens[4]));
}

TEST(Ema, ScalarOracle) {
  Codebook cb;
  cb.centroids = Mat(1, 2);
  cb.centroids << 1, 0;
  cb.sums = cb.centroids;
  cb.counts = Vec::Ones(1);
  cb.decay = 0.9;
  cb.reseed_dead = false;
  Mat z(1, 2);
  z << 0, 1;
  std::vector<int> tok{0};
  Codebook out = EmaUpdate(cb, tok, z);
  EXPECT_NEAR(out.counts[0], 1.0, 1e-12);
  EXPECT_NEAR(out.sums(0, 0), 0.9, 1e-12);
  EXPECT_NEAR(out.sums(0, 1), 0.1, 1e-12);
  EXPECT_NEAR(out.centroids(0, 0), 0.99388373467361679, 1e-9);
  EXPECT_NEAR(out.centroids(0, 1), 0.11043152607484631, 1e-9);
}

TEST(Ema, NoAssignmentsKeepDirections) {
  std::mt19937_64 rng(6);
  Codebook cb = InitCodebook(RandomUnitRows(10, 4, rng), 5, 0);
  cb.reseed_dead = false;
  Codebook out = EmaUpdate(cb, {}, Mat(0, 4));
  EXPECT_LE((out.centroids - cb.centroids).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(out.counts[0], 0.99, 1e-12);
}

TEST(Ema, CentroidsStayUnitNorm) {
  std::mt19937_64 rng(7);
  Codebook cb = InitCodebook(RandomUnitRows(50, 5, rng), 8, 0);
  for (int step = 0; step < 20; ++step) {
    Mat z = RandomUnitRows(30, 5, rng);
    cb = EmaUpdate(cb, TokenizeSequence(cb, z).tokens, z);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(cb.centroids.row(i).norm(), 1.0, 1e-5);
    EXPECT_GE(cb.counts.minCoeff(), 0.0);
  }
}

TEST(Ema, OutOfRangeTokenRejected) {
  Codebook cb = TwoAxes();
  std::vector<int> tok{2};
  EXPECT_THROW(EmaUpdate(cb, tok, Mat::Ones(1, 2)), Error);
  std::vector<int> two{0, 1};
  EXPECT_THROW(EmaUpdate(cb, two, Mat::Ones(1, 2)), Error);
}

Mat Clusters(int k, int per, int dim, double spread, std::mt19937_64& rng, Mat* centers) {
  *centers = RandomUnitRows(k, dim, rng);
  std::normal_distribution<double> n(0.0, spread);
  Mat pts(k * per, dim);
  for (int c = 0; c < k; ++c) {
    for (int p = 0; p < per; ++p) {
      for (int d = 0; d < dim; ++d) pts(c * per + p, d) = (*centers)(c, d) + n(rng);
      pts.row(c * per + p).normalize();
    }
  }
  return pts;
}

TEST(Ema, ConvergesToNormalizedAssignedMean) {
  // A stationary stream: each code sees the same 50 points every update.
  std::mt19937_64 rng(8);
  Mat centers;
  const int per = 50;
  Mat pts = Clusters(4, per, 6, 0.05, rng, &centers);
  Mat seeds(4, 6);
  for (int c = 0; c < 4; ++c) seeds.row(c) = pts.row(c * per);
  Codebook cb = InitCodebook(seeds, 4, 5);
  cb.reseed_dead = false;
  std::vector<int> tok = TokenizeSequence(cb, pts).tokens;
  for (int it = 0; it < 200; ++it) cb = EmaUpdate(cb, tok, pts);
  EXPECT_EQ(cb.decay, 0.99);
  for (int i = 0; i < 4; ++i) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(6);
    int n = 0;
    for (size_t r = 0; r < tok.size(); ++r) {
      if (tok[r] == i) mean += pts.row(r), ++n;
    }
    ASSERT_EQ(n, per);
    EXPECT_LE((cb.centroids.row(i) - mean.normalized()).norm(), 1e-3) << "code " << i;
  }
}

TEST(Ema, UtilizationOnClusteredData) {
  std::mt19937_64 rng(9);
  Mat centers;
  const int k = 16;
  Mat pts = Clusters(k, 40, 8, 0.08, rng, &centers);
  Codebook cb = InitCodebook(pts, k, 11);
  std::vector<int> tok;
  for (int it = 0; it < 100; ++it) {
    Mat batch(128, 8);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(pts.rows()) - 1);
    for (int r = 0; r < 128; ++r) batch.row(r) = pts.row(pick(rng));
    cb = EmaUpdate(cb, TokenizeSequence(cb, batch).tokens, batch);
  }
  tok = TokenizeSequence(cb, pts).tokens;
  std::set<int> used(tok.begin(), tok.end());
  EXPECT_GE(used.size(), static_cast<size_t>(0.9 * k));
}

TEST(Ema, DeadCodesAreReseeded) {
  Mat s(3, 2);
  s << 1, 0, 0, 1, -1, 0;
  Codebook cb = InitCodebook(s, 3, 1);
  cb.decay = 0.5;
  cb.dead_patience = 3;
  cb.dead_fraction = 0.5;
  // Every embedding goes to code 0; codes 1 and 2 starve.
  Mat z = cb.centroids.row(0).replicate(20, 1);
  std::vector<int> tok(20, 0);
  Codebook out = cb;
  for (int i = 0; i < 2; ++i) out = EmaUpdate(out, tok, z);
  EXPECT_EQ(out.dead_streak[1], 2);
  out = EmaUpdate(out, tok, z);
  EXPECT_EQ(out.dead_streak[1], 0);
  EXPECT_LE((out.centroids.row(1) - cb.centroids.row(0)).norm(), 1e-12);
  // Disabled re-seeding leaves the starving directions untouched.
  Codebook frozen = cb;
  frozen.reseed_dead = false;
  frozen.dead_patience = 3;
  frozen.dead_fraction = 0.5;
  for (int i = 0; i < 5; ++i) frozen = EmaUpdate(frozen, tok, z);
  EXPECT_LE((frozen.centroids.row(1) - cb.centroids.row(1)).norm(), 1e-12);
}

TEST(Commitment, ValuesAndGradient) {
  Mat z(1, 2), q(1, 2);
  z << 0.6, 0.8;
  q << 0, 0;
  EXPECT_DOUBLE_EQ(CommitmentLoss(z, q, z, q), 2.0);
  EXPECT_EQ(CommitmentLoss(z, z, q, q), 0.0);
  std::mt19937_64 rng(10);
  Mat a = RandomUnitRows(4, 3, rng), aq = RandomUnitRows(4, 3, rng);
  Mat b = RandomUnitRows(6, 3, rng), bq = RandomUnitRows(6, 3, rng);
  EXPECT_DOUBLE_EQ(CommitmentLoss(a, aq, b, bq), CommitmentLoss(b, bq, a, aq));
  Mat g = CommitmentGrad(a, aq);
  for (int i = 0; i < a.size(); ++i) {
    Mat ap = a, am = a;
    ap.data()[i] += 1e-6;
    am.data()[i] -= 1e-6;
    double fd = (CommitmentLoss(ap, aq, b, bq) - CommitmentLoss(am, aq, b, bq)) / 2e-6;
    EXPECT_NEAR(g.data()[i], fd, 1e-8);
  }
  EXPECT_THROW(CommitmentLoss(a, bq, b, bq), Error);
}

}  // namespace
}  // namespace tokstd
