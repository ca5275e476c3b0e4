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

#include "tokstd/ssm.hpp"

#include <cmath>

#include <omp.h>

namespace tokstd {
namespace {

constexpr double kSeriesThreshold = 1e-4;

int g_threads = 1;

}  // namespace

void SetThreads(int threads) { g_threads = threads < 1 ? 1 : threads; }

int Threads() { return g_threads; }

double ZohFactor(double a, double delta) {
  double x = delta * a;
  // Third order keeps the truncation below 1e-13 relative at the threshold.
  if (std::abs(x) < kSeriesThreshold) return delta * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)));
  return std::expm1(x) / a;
}

void ZohFactorGrad(double a, double delta, double* d_delta, double* d_a) {
  double x = delta * a;
  if (std::abs(x) < kSeriesThreshold) {
    *d_delta = 1.0 + x * (1.0 + x * (0.5 + x / 6.0));
    *d_a = delta * delta * (0.5 + x * (1.0 / 3.0 + x / 8.0));
    return;
  }
  double e = std::exp(x);
  *d_delta = e;
  *d_a = (x * e - std::expm1(x)) / (a * a);
}

ZohResult DiscretizeZoh(double a, double b, double delta) {
  if (!(delta > 0.0)) Fail(ErrorKind::kDomain, "ZOH timescale must be positive");
  return ZohResult{std::exp(delta * a), ZohFactor(a, delta) * b};
}

Mat SelectiveScan(const ScanTensors& p, const Mat& x, const Vec& d_skip) {
  const size_t tcn = static_cast<size_t>(p.steps) * p.channels * p.state;
  if (x.rows() != p.steps || x.cols() != p.channels || p.a_bar.size() != tcn || p.b_bar.size() != tcn ||
      p.c.size() != static_cast<size_t>(p.steps) * p.state || d_skip.size() != p.channels) {
    Fail(ErrorKind::kShape, "selective scan inputs disagree on steps/channels/state");
  }
  Mat y = Mat::Zero(p.steps, p.channels);
  std::vector<double> h(static_cast<size_t>(p.channels) * p.state, 0.0);
  for (int t = 0; t < p.steps; ++t) {
    for (int c = 0; c < p.channels; ++c) {
      double acc = 0.0;
      for (int n = 0; n < p.state; ++n) {
        size_t k = (static_cast<size_t>(t) * p.channels + c) * p.state + n;
        double& hs = h[static_cast<size_t>(c) * p.state + n];
        hs = p.a_bar[k] * hs + p.b_bar[k] * x(t, c);
        acc += p.c[static_cast<size_t>(t) * p.state + n] * hs;
      }
      y(t, c) = acc + d_skip[c] * x(t, c);
    }
  }
  return y;
}

namespace {

void CheckFusedShapes(const Mat& delta, const Mat& a, const Mat& b, const Mat& c, const Mat& u, const Vec& d_skip) {
  const auto steps = u.rows(), channels = u.cols(), state = a.cols();
  if (delta.rows() != steps || delta.cols() != channels || a.rows() != channels || b.rows() != steps ||
      b.cols() != state || c.rows() != steps || c.cols() != state || d_skip.size() != channels) {
    Fail(ErrorKind::kShape, "fused scan inputs disagree on steps/channels/state");
  }
}

// One channel of the fused forward recurrence; shared by both schedules so
// their arithmetic is identical.
inline void ForwardChannel(int t, int ch, int state, const Mat& delta, const Mat& a, const Mat& b, const Mat& c,
                           const Mat& u, const Vec& d_skip, const double* h_prev, double* h_out, Mat& y) {
  const double dt = delta(t, ch);
  const double x = u(t, ch);
  double acc = 0.0;
  for (int n = 0; n < state; ++n) {
    const double an = a(ch, n);
    const double a_bar = std::exp(dt * an);
    const double b_bar = ZohFactor(an, dt) * b(t, n);
    const double hp = h_prev ? h_prev[n] : 0.0;
    const double h = a_bar * hp + b_bar * x;
    h_out[n] = h;
    acc += c(t, n) * h;
  }
  y(t, ch) = acc + d_skip[ch] * x;
}

// Backward through one (t, channel) of the recurrence. `carry` holds dL/dh_t
// flowing back from step t+1 and is replaced with dL/dh_{t-1}. Per-state
// contributions to d_b and d_c are written to the given rows.
inline void BackwardChannel(int t, int ch, int state, const Mat& delta, const Mat& a, const Mat& b, const Mat& c,
                            const Mat& u, const Vec& d_skip, const double* h_t, const double* h_prev,
                            const Mat& d_y, double* carry, double* contrib_b, double* contrib_c, ScanGrads& g) {
  const double dt = delta(t, ch);
  const double x = u(t, ch);
  const double gy = d_y(t, ch);
  double du = 0.0;
  double ddt = 0.0;
  for (int n = 0; n < state; ++n) {
    const double an = a(ch, n);
    const double a_bar = std::exp(dt * an);
    const double f = ZohFactor(an, dt);
    const double b_bar = f * b(t, n);
    const double gh = carry[n] + gy * c(t, n);
    contrib_c[n] = gy * h_t[n];
    const double hp = h_prev ? h_prev[n] : 0.0;
    const double d_abar = gh * hp;
    const double d_bbar = gh * x;
    du += gh * b_bar;
    double f_dt, f_a;
    ZohFactorGrad(an, dt, &f_dt, &f_a);
    const double df = d_bbar * b(t, n);
    contrib_b[n] = d_bbar * f;
    ddt += d_abar * a_bar * an + df * f_dt;
    g.d_a(ch, n) += d_abar * a_bar * dt + df * f_a;
    carry[n] = gh * a_bar;
  }
  g.d_u(t, ch) = du + gy * d_skip[ch];
  g.d_delta(t, ch) = ddt;
  g.d_skip[ch] += gy * x;
}

}  // namespace

ScanForwardState SelectiveScanFused(const Mat& delta, const Mat& a, const Mat& b, const Mat& c, const Mat& u,
                                    const Vec& d_skip, Exec exec) {
  CheckFusedShapes(delta, a, b, c, u, d_skip);
  const int steps = static_cast<int>(u.rows()), channels = static_cast<int>(u.cols()),
            state = static_cast<int>(a.cols());
  ScanForwardState out;
  out.y.resize(steps, channels);
  out.states.assign(static_cast<size_t>(steps) * channels * state, 0.0);
  auto at = [&](int t, int ch) { return out.states.data() + (static_cast<size_t>(t) * channels + ch) * state; };

  if (exec == Exec::kSerial) {
    for (int t = 0; t < steps; ++t) {
      for (int ch = 0; ch < channels; ++ch) {
        ForwardChannel(t, ch, state, delta, a, b, c, u, d_skip, t > 0 ? at(t - 1, ch) : nullptr, at(t, ch), out.y);
      }
    }
  } else {
#pragma omp parallel for schedule(static) num_threads(Threads())
    for (int ch = 0; ch < channels; ++ch) {
      for (int t = 0; t < steps; ++t) {
        ForwardChannel(t, ch, state, delta, a, b, c, u, d_skip, t > 0 ? at(t - 1, ch) : nullptr, at(t, ch), out.y);
      }
    }
  }
  return out;
}

ScanGrads SelectiveScanFusedBackward(const Mat& delta, const Mat& a, const Mat& b, const Mat& c, const Mat& u,
                                     const Vec& d_skip, const ScanForwardState& fwd, const Mat& d_y, Exec exec) {
  CheckFusedShapes(delta, a, b, c, u, d_skip);
  const int steps = static_cast<int>(u.rows()), channels = static_cast<int>(u.cols()),
            state = static_cast<int>(a.cols());
  ScanGrads g;
  g.d_delta = Mat::Zero(steps, channels);
  g.d_a = Mat::Zero(channels, state);
  g.d_b = Mat::Zero(steps, state);
  g.d_c = Mat::Zero(steps, state);
  g.d_u = Mat::Zero(steps, channels);
  g.d_skip = Vec::Zero(channels);
  auto h_at = [&](int t, int ch) {
    return fwd.states.data() + (static_cast<size_t>(t) * channels + ch) * state;
  };

  if (exec == Exec::kSerial) {
    std::vector<double> carry(static_cast<size_t>(channels) * state, 0.0);
    std::vector<double> cb(state), cc(state);
    for (int t = steps - 1; t >= 0; --t) {
      for (int ch = 0; ch < channels; ++ch) {
        BackwardChannel(t, ch, state, delta, a, b, c, u, d_skip, h_at(t, ch), t > 0 ? h_at(t - 1, ch) : nullptr, d_y,
                        carry.data() + static_cast<size_t>(ch) * state, cb.data(), cc.data(), g);
        for (int n = 0; n < state; ++n) {
          g.d_b(t, n) += cb[n];
          g.d_c(t, n) += cc[n];
        }
      }
    }
    return g;
  }

  // Channels are independent; per-channel d_b/d_c contributions are reduced
  // afterwards in ascending channel order to match the serial sum.
  std::vector<double> contrib_b(static_cast<size_t>(steps) * channels * state);
  std::vector<double> contrib_c(contrib_b.size());
#pragma omp parallel for schedule(static) num_threads(Threads())
  for (int ch = 0; ch < channels; ++ch) {
    std::vector<double> carry(state, 0.0);
    for (int t = steps - 1; t >= 0; --t) {
      size_t off = (static_cast<size_t>(t) * channels + ch) * state;
      BackwardChannel(t, ch, state, delta, a, b, c, u, d_skip, h_at(t, ch), t > 0 ? h_at(t - 1, ch) : nullptr, d_y,
                      carry.data(), contrib_b.data() + off, contrib_c.data() + off, g);
    }
  }
#pragma omp parallel for schedule(static) num_threads(Threads())
  for (int t = 0; t < steps; ++t) {
    for (int ch = 0; ch < channels; ++ch) {
      size_t off = (static_cast<size_t>(t) * channels + ch) * state;
      for (int n = 0; n < state; ++n) {
        g.d_b(t, n) += contrib_b[off + n];
        g.d_c(t, n) += contrib_c[off + n];
      }
    }
  }
  return g;
}

}  // namespace tokstd
