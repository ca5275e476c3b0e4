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

#include "tokstd/align.hpp"

#include <algorithm>
#include <limits>

namespace tokstd {

Mat CosineCostMatrix(const Mat& a, const Mat& b) {
  Vec na = a.rowwise().norm();
  Vec nb = b.rowwise().norm();
  Mat cost(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.rows(); ++j) {
      cost(i, j) = 1.0 - a.row(i).dot(b.row(j)) / std::max(na[i] * nb[j], 1e-300);
    }
  }
  return cost;
}

Alignment DtwAlign(const Mat& z, const Mat& z_other) {
  if (z.rows() == 0 || z_other.rows() == 0) Fail(ErrorKind::kInput, "DTW needs two nonempty sequences");
  if (z.cols() != z_other.cols()) Fail(ErrorKind::kShape, "DTW sequences differ in embedding dimension");
  const bool swapped = z_other.rows() < z.rows();
  const Mat& anchor = swapped ? z_other : z;
  const Mat& target = swapped ? z : z_other;
  const int n = static_cast<int>(anchor.rows()), m = static_cast<int>(target.rows());

  Mat cost = CosineCostMatrix(anchor, target);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Mat acc = Mat::Constant(n, m, kInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0 && j > 0) best = acc(i - 1, j - 1);
        if (i > 0) best = std::min(best, acc(i - 1, j));
        if (j > 0) best = std::min(best, acc(i, j - 1));
      }
      acc(i, j) = i == 0 && j == 0 ? cost(0, 0) : best + cost(i, j);
    }
  }

  Alignment out;
  out.swapped = swapped;
  out.total_cost = acc(n - 1, m - 1);
  int i = n - 1, j = m - 1;
  out.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    double diag = i > 0 && j > 0 ? acc(i - 1, j - 1) : kInf;
    double up = i > 0 ? acc(i - 1, j) : kInf;
    double left = j > 0 ? acc(i, j - 1) : kInf;
    if (i > 0 && j > 0 && diag <= up && diag <= left) {
      --i;
      --j;
    } else if (i > 0 && up <= left) {
      --i;
    } else {
      --j;
    }
    out.path.emplace_back(i, j);
  }
  std::reverse(out.path.begin(), out.path.end());
  out.entries.resize(n);
  for (int t = 0; t < n; ++t) out.entries[t].t = t;
  for (auto [a, b] : out.path) out.entries[a].s.push_back(b);
  return out;
}

std::vector<PositivePair> MinePositives(const Mat& z, const Mat& z_other, const Alignment& alignment) {
  const Mat& anchor = alignment.swapped ? z_other : z;
  const Mat& target = alignment.swapped ? z : z_other;
  std::vector<PositivePair> out;
  out.reserve(alignment.entries.size());
  for (const Alignment::Entry& e : alignment.entries) {
    double na = anchor.row(e.t).norm();
    int best = -1;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (int j : e.s) {
      double sim = anchor.row(e.t).dot(target.row(j)) / std::max(na * target.row(j).norm(), 1e-300);
      if (sim > best_sim) {
        best_sim = sim;
        best = j;
      }
    }
    out.push_back(PositivePair{e.t, best, best_sim});
  }
  return out;
}

}  // namespace tokstd
