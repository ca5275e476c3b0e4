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
#include "tokstd/parallel.hpp"

namespace tokstd {

struct ZohResult {
  double a_bar;
  double b_bar;
};

/// Zero-order-hold discretization of a diagonal continuous system entry.
/// Uses the series limit when |delta * a| < 1e-4.
ZohResult DiscretizeZoh(double a, double b, double delta);

/// Discretized input gain per unit B: b_bar = ZohFactor(a, delta) * b.
double ZohFactor(double a, double delta);

/// Partial derivatives of ZohFactor with respect to delta and a.
void ZohFactorGrad(double a, double delta, double* d_delta, double* d_a);

/// Explicit per-step tensors for a diagonal selective scan.
/// a_bar and b_bar are indexed [(t * channels + c) * state + n], c by
/// [t * state + n].
struct ScanTensors {
  int steps = 0;
  int channels = 0;
  int state = 0;
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  std::vector<double> c;
};

/// y_t = <C_t, h_t> + d_skip * x_t with h_t = a_bar_t * h_{t-1} + b_bar_t * x_t
/// and h_0 = 0. x is steps x channels.
Mat SelectiveScan(const ScanTensors& params, const Mat& x, const Vec& d_skip);

/// Fused scan of a selective SSM block: discretizes on the fly from the
/// per-step timescales and keeps every hidden state for the backward pass.
struct ScanForwardState {
  Mat y;                        // T x Di
  std::vector<double> states;   // T * Di * N, h_t for t = 0..T-1
};

struct ScanGrads {
  Mat d_delta;  // T x Di
  Mat d_a;      // Di x N (w.r.t. A itself)
  Mat d_b;      // T x N
  Mat d_c;      // T x N
  Mat d_u;      // T x Di
  Vec d_skip;   // Di
};

/// delta: T x Di, a: Di x N, b, c: T x N, u: T x Di.
ScanForwardState SelectiveScanFused(const Mat& delta, const Mat& a, const Mat& b, const Mat& c, const Mat& u,
                                    const Vec& d_skip, Exec exec);

ScanGrads SelectiveScanFusedBackward(const Mat& delta, const Mat& a, const Mat& b, const Mat& c, const Mat& u,
                                     const Vec& d_skip, const ScanForwardState& fwd, const Mat& d_y, Exec exec);

}  // namespace tokstd
