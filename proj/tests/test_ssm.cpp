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

#include <cmath>
#include <random>

#include "tokstd/ssm.hpp"
#include "test_util.hpp"

namespace tokstd {
namespace {

using testing::RandomMat;

TEST(Zoh, LimitCase) {
  ZohResult r = DiscretizeZoh(0.0, 2.0, 0.5);
  EXPECT_EQ(r.a_bar, 1.0);
  EXPECT_EQ(r.b_bar, 1.0);
}

TEST(Zoh, ClosedFormScalar) {
  ZohResult r = DiscretizeZoh(std::log(2.0), 1.0, 1.0);
  EXPECT_NEAR(r.a_bar, 2.0, 2.0 * 1e-12);
  EXPECT_NEAR(r.b_bar, 1.4426950408889634, 1.4426950408889634 * 1e-12);
}

TEST(Zoh, VanishingStep) {
  for (double a : {-16.0, -1.0, 0.0, 3.0}) {
    ZohResult r = DiscretizeZoh(a, 5.0, 1e-12);
    EXPECT_NEAR(r.a_bar, 1.0, 1e-9);
    EXPECT_NEAR(r.b_bar, 0.0, 1e-9);
  }
}

TEST(Zoh, NonPositiveDeltaIsDomainError) {
  for (double d : {0.0, -1.0}) {
    try {
      DiscretizeZoh(-1.0, 1.0, d);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kDomain);
    }
  }
}

TEST(Zoh, DoubleStepComposes) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ua(-16.0, -1.0), ud(1e-3, 0.5);
  for (int i = 0; i < 200; ++i) {
    double a = ua(rng), d = ud(rng);
    double one = DiscretizeZoh(a, 1.0, d).a_bar;
    double two = DiscretizeZoh(a, 1.0, 2 * d).a_bar;
    EXPECT_NEAR(two, one * one, 1e-12 * std::max(1.0, two));
  }
}

TEST(Zoh, SeriesBranchIsContinuousAtThreshold) {
  double delta = 1.0;
  double below = ZohFactor(-0.99999e-4, delta);
  double above = ZohFactor(-1.00001e-4, delta);
  EXPECT_NEAR(below, above, 1e-8);
  double exact = std::expm1(-1e-4) / -1e-4;
  EXPECT_NEAR(below, exact, 1e-8);
}

TEST(Zoh, FactorGradientMatchesFiniteDifferences) {
  for (double a : {-5.0, -1.0, -1e-6, 0.0, 2.0}) {
    for (double d : {1e-3, 0.1, 1.0}) {
      double gd, ga;
      ZohFactorGrad(a, d, &gd, &ga);
      const double h = 1e-6;
      double fd_d = (ZohFactor(a, d + h) - ZohFactor(a, d - h)) / (2 * h);
      double fd_a = (ZohFactor(a + h, d) - ZohFactor(a - h, d)) / (2 * h);
      EXPECT_NEAR(gd, fd_d, 1e-6 * std::max(1.0, std::abs(fd_d))) << a << " " << d;
      EXPECT_NEAR(ga, fd_a, 1e-6 * std::max(1.0, std::abs(fd_a))) << a << " " << d;
    }
  }
}

ScanTensors Tensors(int T, int D, int N) {
  ScanTensors p;
  p.steps = T;
  p.channels = D;
  p.state = N;
  p.a_bar.assign(static_cast<size_t>(T) * D * N, 0.0);
  p.b_bar.assign(static_cast<size_t>(T) * D * N, 0.0);
  p.c.assign(static_cast<size_t>(T) * N, 0.0);
  return p;
}

TEST(Scan, ZeroRecurrenceIsMemoryless) {
  std::mt19937_64 rng(1);
  ScanTensors p = Tensors(6, 2, 3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : p.b_bar) v = u(rng);
  for (double& v : p.c) v = u(rng);
  Mat x = RandomMat(6, 2, rng);
  Vec d = Vec::Constant(2, 0.5);
  Mat y = SelectiveScan(p, x, d);
  for (int t = 0; t < 6; ++t) {
    for (int ch = 0; ch < 2; ++ch) {
      double g = 0;
      for (int n = 0; n < 3; ++n) g += p.c[t * 3 + n] * p.b_bar[(t * 2 + ch) * 3 + n];
      EXPECT_NEAR(y(t, ch), (g + 0.5) * x(t, ch), 1e-14);
    }
  }
}

TEST(Scan, Accumulator) {
  ScanTensors p = Tensors(7, 1, 1);
  std::fill(p.a_bar.begin(), p.a_bar.end(), 1.0);
  std::fill(p.b_bar.begin(), p.b_bar.end(), 1.0);
  std::fill(p.c.begin(), p.c.end(), 1.0);
  Mat y = SelectiveScan(p, Mat::Ones(7, 1), Vec::Zero(1));
  for (int t = 0; t < 7; ++t) EXPECT_EQ(y(t, 0), t + 1);
}

// Sequential oracle written independently of the library loops: keeps the
// state as an explicit matrix and steps it forward.
Mat OracleScan(const ScanTensors& p, const Mat& x, const Vec& d) {
  Mat h = Mat::Zero(p.channels, p.state);
  Mat y(p.steps, p.channels);
  for (int t = 0; t < p.steps; ++t) {
    Mat a(p.channels, p.state), b(p.channels, p.state);
    for (int ch = 0; ch < p.channels; ++ch) {
      for (int n = 0; n < p.state; ++n) {
        a(ch, n) = p.a_bar[(t * p.channels + ch) * p.state + n];
        b(ch, n) = p.b_bar[(t * p.channels + ch) * p.state + n];
      }
    }
    h = a.cwiseProduct(h) + (b.array().colwise() * x.row(t).transpose().array()).matrix();
    Vec c = Eigen::Map<const Vec>(p.c.data() + t * p.state, p.state);
    y.row(t) = (h * c).transpose() + d.cwiseProduct(x.row(t).transpose()).transpose();
  }
  return y;
}

TEST(Scan, MatchesSequentialOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1), pos(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    ScanTensors p = Tensors(5, 3, 2);
    for (double& v : p.a_bar) v = pos(rng);
    for (double& v : p.b_bar) v = u(rng);
    for (double& v : p.c) v = u(rng);
    Mat x = RandomMat(5, 3, rng);
    Vec d = RandomMat(3, 1, rng);
    Mat got = SelectiveScan(p, x, d);
    Mat want = OracleScan(p, x, d);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST(Scan, ShapeMismatchIsShapeError) {
  ScanTensors p = Tensors(5, 3, 2);
  try {
    SelectiveScan(p, Mat::Zero(4, 3), Vec::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  EXPECT_THROW(SelectiveScan(p, Mat::Zero(5, 3), Vec::Zero(2)), Error);
  p.c.pop_back();
  EXPECT_THROW(SelectiveScan(p, Mat::Zero(5, 3), Vec::Zero(3)), Error);
}

struct FusedInputs {
  Mat delta, a, b, c, u;
  Vec d;
};

FusedInputs RandomFused(int T, int D, int N, std::mt19937_64& rng) {
  FusedInputs in;
  std::uniform_real_distribution<double> ud(1e-3, 0.3), ua(-16.0, -1.0);
  in.delta = Mat(T, D);
  for (int i = 0; i < in.delta.size(); ++i) in.delta.data()[i] = ud(rng);
  in.a = Mat(D, N);
  for (int i = 0; i < in.a.size(); ++i) in.a.data()[i] = ua(rng);
  in.b = RandomMat(T, N, rng);
  in.c = RandomMat(T, N, rng);
  in.u = RandomMat(T, D, rng);
  in.d = RandomMat(D, 1, rng);
  return in;
}

TEST(FusedScan, MatchesExplicitDiscretization) {
  std::mt19937_64 rng(2);
  FusedInputs in = RandomFused(12, 5, 3, rng);
  ScanTensors p = Tensors(12, 5, 3);
  for (int t = 0; t < 12; ++t) {
    for (int ch = 0; ch < 5; ++ch) {
      for (int n = 0; n < 3; ++n) {
        ZohResult z = DiscretizeZoh(in.a(ch, n), in.b(t, n), in.delta(t, ch));
        p.a_bar[(t * 5 + ch) * 3 + n] = z.a_bar;
        p.b_bar[(t * 5 + ch) * 3 + n] = z.b_bar;
      }
    }
    for (int n = 0; n < 3; ++n) p.c[t * 3 + n] = in.c(t, n);
  }
  Mat want = OracleScan(p, in.u, in.d);
  Mat got = SelectiveScanFused(in.delta, in.a, in.b, in.c, in.u, in.d, Exec::kSerial).y;
  EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, want.cwiseAbs().maxCoeff()));
}

TEST(FusedScan, ParallelIsBitIdentical) {
  std::mt19937_64 rng(3);
  FusedInputs in = RandomFused(40, 16, 4, rng);
  SetThreads(4);
  ScanForwardState s = SelectiveScanFused(in.delta, in.a, in.b, in.c, in.u, in.d, Exec::kSerial);
  ScanForwardState p = SelectiveScanFused(in.delta, in.a, in.b, in.c, in.u, in.d, Exec::kParallel);
  EXPECT_EQ(s.y, p.y);
  EXPECT_EQ(s.states, p.states);
  Mat dy = RandomMat(40, 16, rng);
  ScanGrads gs = SelectiveScanFusedBackward(in.delta, in.a, in.b, in.c, in.u, in.d, s, dy, Exec::kSerial);
  ScanGrads gp = SelectiveScanFusedBackward(in.delta, in.a, in.b, in.c, in.u, in.d, p, dy, Exec::kParallel);
  SetThreads(1);
  EXPECT_EQ(gs.d_delta, gp.d_delta);
  EXPECT_EQ(gs.d_a, gp.d_a);
  EXPECT_EQ(gs.d_b, gp.d_b);
  EXPECT_EQ(gs.d_c, gp.d_c);
  EXPECT_EQ(gs.d_u, gp.d_u);
  EXPECT_EQ(gs.d_skip, gp.d_skip);
}

TEST(FusedScan, StatesStayBounded) {
  std::mt19937_64 rng(5);
  FusedInputs in = RandomFused(200, 4, 3, rng);
  in.u = in.u.cwiseMax(-1.0).cwiseMin(1.0);
  in.b = in.b.cwiseMax(-1.0).cwiseMin(1.0);
  ScanForwardState s = SelectiveScanFused(in.delta, in.a, in.b, in.c, in.u, in.d, Exec::kSerial);
  // |h| <= sum_k |b_bar| <= max|B| * max|u| * delta / (1 - a_bar) <= 1 / |A|.
  for (double h : s.states) EXPECT_LE(std::abs(h), 1.0 + 1e-12);
}

TEST(FusedScan, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const int T = 6, D = 3, N = 2;
  FusedInputs in = RandomFused(T, D, N, rng);
  Mat w = RandomMat(T, D, rng);  // loss = sum(w .* y)
  auto loss = [&](const FusedInputs& x) {
    return SelectiveScanFused(x.delta, x.a, x.b, x.c, x.u, x.d, Exec::kSerial).y.cwiseProduct(w).sum();
  };
  ScanForwardState f = SelectiveScanFused(in.delta, in.a, in.b, in.c, in.u, in.d, Exec::kSerial);
  ScanGrads g = SelectiveScanFusedBackward(in.delta, in.a, in.b, in.c, in.u, in.d, f, w, Exec::kSerial);
  auto check = [&](auto member, const Mat& grad, const char* name) {
    FusedInputs x = in;
    Mat& m = x.*member;
    for (int i = 0; i < m.size(); ++i) {
      double orig = m.data()[i];
      double h = 1e-6 * std::max(1.0, std::abs(orig));
      m.data()[i] = orig + h;
      double lp = loss(x);
      m.data()[i] = orig - h;
      double lm = loss(x);
      m.data()[i] = orig;
      double fd = (lp - lm) / (2 * h);
      EXPECT_NEAR(grad.data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << name << "[" << i << "]";
    }
  };
  check(&FusedInputs::delta, g.d_delta, "delta");
  check(&FusedInputs::a, g.d_a, "a");
  check(&FusedInputs::b, g.d_b, "b");
  check(&FusedInputs::c, g.d_c, "c");
  check(&FusedInputs::u, g.d_u, "u");
  FusedInputs x = in;
  for (int i = 0; i < D; ++i) {
    x.d[i] += 1e-6;
    double lp = loss(x);
    x.d[i] -= 2e-6;
    double lm = loss(x);
    x.d[i] = in.d[i];
    EXPECT_NEAR(g.d_skip[i], (lp - lm) / 2e-6, 1e-6);
  }
}

}  // namespace
}  // namespace tokstd
