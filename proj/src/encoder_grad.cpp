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

#include <cmath>

#include "tokstd/encoder.hpp"

namespace tokstd {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat Silu(const Mat& x) {
  return x.unaryExpr([](double v) { return v * Sigmoid(v); });
}

Mat SiluGrad(const Mat& x) {
  return x.unaryExpr([](double v) {
    double s = Sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace

Mat MambaBlockBackward(const MambaBlockParams& p, const MambaBlockCache& c, const Mat& d_out,
                       MambaBlockParams& g, Exec exec) {
  g.w_out.noalias() += d_out.transpose() * c.y_gated;
  Mat d_yg = d_out * p.w_out;
  Mat d_y = d_yg.cwiseProduct(Silu(c.gate));
  Mat d_gate = d_yg.cwiseProduct(c.scan.y).cwiseProduct(SiluGrad(c.gate));

  ScanGrads s = SelectiveScanFusedBackward(c.delta, c.a, c.b, c.c, c.u, p.d_skip, c.scan, d_y, exec);
  g.d_skip += s.d_skip;
  g.a_log += s.d_a.cwiseProduct(c.a);

  Mat d_dlin = s.d_delta.cwiseProduct(c.delta_lin.unaryExpr([](double v) { return Sigmoid(v); }));
  g.w_delta.noalias() += d_dlin.transpose() * c.u;
  g.b_delta += d_dlin.colwise().sum().transpose();
  g.w_b.noalias() += s.d_b.transpose() * c.u;
  g.w_c.noalias() += s.d_c.transpose() * c.u;

  Mat d_u = s.d_u;
  d_u.noalias() += d_dlin * p.w_delta;
  d_u.noalias() += s.d_b * p.w_b;
  d_u.noalias() += s.d_c * p.w_c;

  Mat d_pre_act = d_u.cwiseProduct(SiluGrad(c.pre_act));
  Mat d_pre;
  if (p.conv_w.size() > 0) {
    const int k = static_cast<int>(p.conv_w.cols());
    d_pre = Mat::Zero(d_pre_act.rows(), d_pre_act.cols());
    for (int t = 0; t < d_pre_act.rows(); ++t) {
      for (int ch = 0; ch < d_pre_act.cols(); ++ch) {
        const double gv = d_pre_act(t, ch);
        g.conv_b[ch] += gv;
        for (int j = 0; j < k; ++j) {
          int src = t - (k - 1) + j;
          if (src < 0) continue;
          g.conv_w(ch, j) += gv * c.pre(src, ch);
          d_pre(src, ch) += gv * p.conv_w(ch, j);
        }
      }
    }
  } else {
    d_pre = std::move(d_pre_act);
  }

  g.w_in.noalias() += d_pre.transpose() * c.x;
  g.w_gate.noalias() += d_gate.transpose() * c.x;
  Mat d_x = d_pre * p.w_in;
  d_x.noalias() += d_gate * p.w_gate;
  return d_x;
}

Mat BiMambaLayerBackward(const BiMambaLayer& layer, const LayerCache& c, const Mat& d_out, BiMambaLayer& g,
                         Exec exec) {
  g.out_proj.noalias() += d_out.transpose() * c.combined;
  Mat d_comb = d_out * layer.out_proj;
  Mat d_normed = MambaBlockBackward(layer.fwd, c.fwd, d_comb, g.fwd, exec);
  d_normed += ReverseRows(MambaBlockBackward(layer.bwd, c.bwd, ReverseRows(d_comb), g.bwd, exec));

  g.norm_gain += d_normed.cwiseProduct(c.x_hat).colwise().sum().transpose();
  g.norm_bias += d_normed.colwise().sum().transpose();
  Mat d_xhat = d_normed.array().rowwise() * layer.norm_gain.transpose().array();

  Mat d_in = d_out;
  for (int t = 0; t < d_xhat.rows(); ++t) {
    double mean_d = d_xhat.row(t).mean();
    double mean_dx = d_xhat.row(t).dot(c.x_hat.row(t)) / static_cast<double>(d_xhat.cols());
    d_in.row(t).array() +=
        c.inv_std[t] * (d_xhat.row(t).array() - mean_d - c.x_hat.row(t).array() * mean_dx);
  }
  return d_in;
}

void EncodeBackward(const EncoderModel& model, const EncoderCache& c, const Mat& d_z, EncoderModel& g, Exec exec) {
  const int steps = static_cast<int>(c.head_out.rows());
  if (d_z.rows() != steps || d_z.cols() != c.head_out.cols()) {
    Fail(ErrorKind::kShape, "embedding gradient shape does not match the cached forward pass");
  }
  Mat d_head(steps, c.head_out.cols());
  for (int t = 0; t < steps; ++t) {
    double n = std::max(c.norms[t], 1e-12);
    auto z = c.head_out.row(t) / n;
    double proj = z.dot(d_z.row(t));
    d_head.row(t) = (d_z.row(t) - proj * z) / n;
  }
  g.head_w.noalias() += d_head.transpose() * c.head_in;
  g.head_b += d_head.colwise().sum().transpose();
  Mat d_h = d_head * model.head_w;
  for (size_t l = model.layers.size(); l-- > 0;) {
    d_h = BiMambaLayerBackward(model.layers[l], c.layers[l], d_h, g.layers[l], exec);
  }
  g.input_w.noalias() += d_h.transpose() * c.x_std;
  g.input_b += d_h.colwise().sum().transpose();
}

}  // namespace tokstd
