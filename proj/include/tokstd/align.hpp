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

#include <vector>

#include "tokstd/common.hpp"

namespace tokstd {

/// DTW correspondence between an anchor sequence and a target sequence.
/// Indices are zero-based. When `swapped` is set the anchor is the second
/// argument of DtwAlign (it was the shorter one).
struct Alignment {
  struct Entry {
    int t;               // anchor frame
    std::vector<int> s;  // ascending target frames aligned to t
  };
  std::vector<Entry> entries;
  std::vector<std::pair<int, int>> path;  // (anchor, target) cells from start to end
  double total_cost = 0.0;
  bool swapped = false;
};

struct PositivePair {
  int anchor_index;
  int positive_index;
  double similarity;
};

/// Local cost 1 - cos(a_i, b_j).
Mat CosineCostMatrix(const Mat& a, const Mat& b);

/// Full-path DTW with steps (1,0), (0,1), (1,1). The anchor is the shorter
/// sequence (the first one on ties). Backtracking prefers the diagonal, then
/// the anchor step, then the target step.
Alignment DtwAlign(const Mat& z, const Mat& z_other);

/// One pair per anchor frame: the aligned target frame of highest cosine
/// similarity, ties resolved to the smallest index.
std::vector<PositivePair> MinePositives(const Mat& z, const Mat& z_other, const Alignment& alignment);

}  // namespace tokstd
