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

#include "tokstd/encoder.hpp"

#include <cmath>
#include <random>

namespace tokstd {
namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

Mat Silu(const Mat& x) {
  return x.unaryExpr([](double v) { return v * Sigmoid(v); });
}

constexpr double kNormEps = 1e-5;

void CheckFinite(const Mat& m, const std::string& name) {
  if (!m.allFinite()) Fail(ErrorKind::kNumerical, "non-finite activations in " + name);
}

Mat Uniform(std::mt19937_64& rng, int rows, int cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Vec UniformVec(std::mt19937_64& rng, int n, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

MambaBlockParams InitBlock(const EncoderConfig& cfg, std::mt19937_64& rng) {
  const int dm = cfg.d_model, di = cfg.d_inner(), n = cfg.d_state;
  MambaBlockParams b;
  b.w_in = Uniform(rng, di, dm, 1.0 / std::sqrt(dm));
  b.w_gate = Uniform(rng, di, dm, 1.0 / std::sqrt(dm));
  if (cfg.conv_kernel > 0) {
    b.conv_w = Uniform(rng, di, cfg.conv_kernel, 1.0 / std::sqrt(cfg.conv_kernel));
    b.conv_b = UniformVec(rng, di, 1.0 / std::sqrt(cfg.conv_kernel));
  }
  b.w_b = Uniform(rng, n, di, 1.0 / std::sqrt(di));
  b.w_c = Uniform(rng, n, di, 1.0 / std::sqrt(di));
  b.w_delta = Uniform(rng, di, di, 1.0 / std::sqrt(di));
  b.b_delta.resize(di);
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  for (int c = 0; c < di; ++c) {
    double dt = std::exp(log_dt(rng));
    b.b_delta[c] = dt + std::log(-std::expm1(-dt));
  }
  b.a_log.resize(di, n);
  std::uniform_real_distribution<double> log_a(0.0, std::log(16.0));
  for (int c = 0; c < di; ++c) {
    for (int s = 0; s < n; ++s) b.a_log(c, s) = log_a(rng);
  }
  b.d_skip = Vec::Ones(di);
  b.w_out = Uniform(rng, dm, di, 1.0 / std::sqrt(di));
  return b;
}

template <typename Fn>
void VisitBlock(MambaBlockParams& b, const std::string& prefix, Fn&& fn) {
  fn(prefix + ".in_proj", b.w_in);
  fn(prefix + ".gate_proj", b.w_gate);
  if (b.conv_w.size() > 0) {
    fn(prefix + ".conv.weight", b.conv_w);
    fn(prefix + ".conv.bias", b.conv_b);
  }
  fn(prefix + ".b_proj", b.w_b);
  fn(prefix + ".c_proj", b.w_c);
  fn(prefix + ".delta_proj.weight", b.w_delta);
  fn(prefix + ".delta_proj.bias", b.b_delta);
  fn(prefix + ".a_log", b.a_log);
  fn(prefix + ".d_skip", b.d_skip);
  fn(prefix + ".out_proj", b.w_out);
}

template <typename Fn>
void VisitModel(EncoderModel& m, Fn&& fn) {
  fn(std::string("input_proj.weight"), m.input_w);
  fn(std::string("input_proj.bias"), m.input_b);
  for (size_t l = 0; l < m.layers.size(); ++l) {
    std::string p = "layers." + std::to_string(l);
    fn(p + ".norm.gain", m.layers[l].norm_gain);
    fn(p + ".norm.bias", m.layers[l].norm_bias);
    VisitBlock(m.layers[l].fwd, p + ".fwd", fn);
    VisitBlock(m.layers[l].bwd, p + ".bwd", fn);
    fn(p + ".out_proj", m.layers[l].out_proj);
  }
  fn(std::string("head.weight"), m.head_w);
  fn(std::string("head.bias"), m.head_b);
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim < 1 || d_model < 1 || d_state < 1 || expand < 1 || d_embed < 1) {
    Fail(ErrorKind::kConfig, "encoder dimensions must be >= 1");
  }
  if (layers < 1) Fail(ErrorKind::kConfig, "encoder needs at least one layer");
  if (conv_kernel < 0) Fail(ErrorKind::kConfig, "conv_kernel must be >= 0");
}

EncoderModel EncoderModel::ZerosLike() const {
  EncoderModel z = *this;
  VisitModel(z, [](const std::string&, auto& t) { t.setZero(); });
  z.feat_mean.setZero();
  z.feat_std.setZero();
  return z;
}

size_t EncoderModel::ParameterCount() const {
  size_t n = 0;
  VisitModel(const_cast<EncoderModel&>(*this), [&](const std::string&, auto& t) { n += t.size(); });
  return n;
}

std::vector<ParamView> TrainableParams(EncoderModel& model) {
  std::vector<ParamView> out;
  VisitModel(model, [&](const std::string& name, auto& t) {
    std::vector<uint64_t> shape;
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Vec>) {
      shape = {static_cast<uint64_t>(t.size())};
    } else {
      shape = {static_cast<uint64_t>(t.rows()), static_cast<uint64_t>(t.cols())};
    }
    out.push_back(ParamView{name, t.data(), static_cast<size_t>(t.size()), std::move(shape)});
  });
  return out;
}

EncoderModel InitEncoder(const EncoderConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  EncoderModel m;
  m.config = cfg;
  m.feat_mean = Vec::Zero(cfg.input_dim);
  m.feat_std = Vec::Ones(cfg.input_dim);
  m.input_w = Uniform(rng, cfg.d_model, cfg.input_dim, 1.0 / std::sqrt(cfg.input_dim));
  m.input_b = UniformVec(rng, cfg.d_model, 1.0 / std::sqrt(cfg.input_dim));
  for (int l = 0; l < cfg.layers; ++l) {
    BiMambaLayer layer;
    layer.norm_gain = Vec::Ones(cfg.d_model);
    layer.norm_bias = Vec::Zero(cfg.d_model);
    layer.fwd = InitBlock(cfg, rng);
    layer.bwd = InitBlock(cfg, rng);
    layer.out_proj = Uniform(rng, cfg.d_model, cfg.d_model, 1.0 / std::sqrt(cfg.d_model));
    m.layers.push_back(std::move(layer));
  }
  m.head_w = Uniform(rng, cfg.d_embed, cfg.d_model, 1.0 / std::sqrt(cfg.d_model));
  m.head_b = UniformVec(rng, cfg.d_embed, 1.0 / std::sqrt(cfg.d_model));
  return m;
}

void TieDirections(EncoderModel& model) {
  for (BiMambaLayer& l : model.layers) l.bwd = l.fwd;
}

void FitInputStats(EncoderModel& model, const std::vector<const Mat*>& feature_sets) {
  const int d = model.config.input_dim;
  Vec sum = Vec::Zero(d), sq = Vec::Zero(d);
  double count = 0;
  for (const Mat* m : feature_sets) {
    if (m->cols() != d) Fail(ErrorKind::kShape, "feature dimension does not match the encoder input");
    sum += m->colwise().sum().transpose();
    sq += m->array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(m->rows());
  }
  if (count < 1) return;
  model.feat_mean = sum / count;
  Vec var = sq / count - model.feat_mean.array().square().matrix();
  model.feat_std = var.array().max(1e-8).sqrt().max(1e-3).matrix();
}

Mat ReverseRows(const Mat& m) { return m.colwise().reverse(); }

Mat MambaBlockForward(const MambaBlockParams& p, const Mat& x, Exec exec, MambaBlockCache* cache,
                      const std::string& name) {
  MambaBlockCache local;
  MambaBlockCache& c = cache ? *cache : local;
  c.x = x;
  c.pre = x * p.w_in.transpose();
  if (p.conv_w.size() > 0) {
    const int k = static_cast<int>(p.conv_w.cols());
    c.pre_act.resize(c.pre.rows(), c.pre.cols());
    for (int t = 0; t < c.pre.rows(); ++t) {
      for (int ch = 0; ch < c.pre.cols(); ++ch) {
        double acc = p.conv_b[ch];
        for (int j = 0; j < k; ++j) {
          int s = t - (k - 1) + j;
          if (s >= 0) acc += p.conv_w(ch, j) * c.pre(s, ch);
        }
        c.pre_act(t, ch) = acc;
      }
    }
  } else {
    c.pre_act = c.pre;
  }
  c.u = Silu(c.pre_act);
  c.gate = x * p.w_gate.transpose();
  c.b = c.u * p.w_b.transpose();
  c.c = c.u * p.w_c.transpose();
  c.delta_lin = (c.u * p.w_delta.transpose()).rowwise() + p.b_delta.transpose();
  c.delta = c.delta_lin.unaryExpr([](double v) { return Softplus(v); });
  c.a = p.A();
  c.scan = SelectiveScanFused(c.delta, c.a, c.b, c.c, c.u, p.d_skip, exec);
  c.y_gated = c.scan.y.cwiseProduct(Silu(c.gate));
  Mat out = c.y_gated * p.w_out.transpose();
  CheckFinite(out, name);
  return out;
}

Mat BiMambaLayerForward(const BiMambaLayer& layer, const Mat& x, Exec exec, LayerCache* cache,
                        const std::string& name) {
  LayerCache local;
  LayerCache& c = cache ? *cache : local;
  const int steps = static_cast<int>(x.rows());
  c.input = x;
  c.x_hat.resize(x.rows(), x.cols());
  c.inv_std.resize(steps);
  for (int t = 0; t < steps; ++t) {
    double mean = x.row(t).mean();
    double var = (x.row(t).array() - mean).square().mean();
    c.inv_std[t] = 1.0 / std::sqrt(var + kNormEps);
    c.x_hat.row(t) = (x.row(t).array() - mean) * c.inv_std[t];
  }
  c.normed = (c.x_hat.array().rowwise() * layer.norm_gain.transpose().array()).rowwise() +
             layer.norm_bias.transpose().array();
  Mat f = MambaBlockForward(layer.fwd, c.normed, exec, &c.fwd, name + ".fwd");
  Mat b = ReverseRows(MambaBlockForward(layer.bwd, ReverseRows(c.normed), exec, &c.bwd, name + ".bwd"));
  c.combined = f + b;
  Mat out = c.combined * layer.out_proj.transpose() + x;
  CheckFinite(out, name);
  return out;
}

EmbeddingSequence Encode(const EncoderModel& model, const Mat& features, Exec exec, EncoderCache* cache) {
  if (features.cols() != model.config.input_dim) {
    Fail(ErrorKind::kShape, "features have " + std::to_string(features.cols()) + " dims, encoder expects " +
                                std::to_string(model.config.input_dim));
  }
  if (features.rows() < 1) Fail(ErrorKind::kShape, "empty feature sequence");
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.x_std = (features.rowwise() - model.feat_mean.transpose()).array().rowwise() /
            model.feat_std.transpose().array();
  Mat h = (c.x_std * model.input_w.transpose()).rowwise() + model.input_b.transpose();
  c.layers.resize(model.layers.size());
  for (size_t l = 0; l < model.layers.size(); ++l) {
    h = BiMambaLayerForward(model.layers[l], h, exec, &c.layers[l], "layers." + std::to_string(l));
  }
  c.head_in = std::move(h);
  c.head_out = (c.head_in * model.head_w.transpose()).rowwise() + model.head_b.transpose();
  c.norms = c.head_out.rowwise().norm();
  EmbeddingSequence z;
  z.rows = c.head_out.array().colwise() / c.norms.array().max(1e-12);
  return z;
}

EmbeddingSequence Encode(const EncoderModel& model, const FeatureSequence& features, Exec exec) {
  return Encode(model, features.data, exec, nullptr);
}

}  // namespace tokstd
