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
#include <functional>
#include <string>
#include <vector>

#include "tokstd/common.hpp"
#include "tokstd/features.hpp"
#include "tokstd/parallel.hpp"
#include "tokstd/ssm.hpp"

namespace tokstd {

struct EncoderConfig {
  int input_dim = 96;
  int d_model = 256;
  int d_state = 16;
  int expand = 2;
  int d_embed = 512;
  int layers = 4;
  /// Depthwise causal convolution ahead of the SSM input; 0 disables it.
  int conv_kernel = 0;

  int d_inner() const { return expand * d_model; }
  void validate() const;

  /// Full-size configuration (4 layers, d_model 256, d 512).
  static EncoderConfig Defaults() { return {}; }
  /// Small configuration used by tests and the desk-scale pipeline.
  static EncoderConfig TestPreset() { return {96, 32, 4, 2, 64, 2, 0}; }
};

/// Parameters of one selective-SSM block with its gated expansion.
struct MambaBlockParams {
  Mat w_in;     // Di x Dm
  Mat w_gate;   // Di x Dm
  Mat conv_w;   // Di x K (empty when the convolution is disabled)
  Vec conv_b;   // Di
  Mat w_b;      // N x Di
  Mat w_c;      // N x Di
  Mat w_delta;  // Di x Di
  Vec b_delta;  // Di
  Mat a_log;    // Di x N, A = -exp(a_log)
  Vec d_skip;   // Di
  Mat w_out;    // Dm x Di

  Mat A() const { return -a_log.array().exp().matrix(); }
};

struct BiMambaLayer {
  Vec norm_gain;  // Dm
  Vec norm_bias;  // Dm
  MambaBlockParams fwd;
  MambaBlockParams bwd;
  Mat out_proj;  // Dm x Dm
};

struct EncoderModel {
  EncoderConfig config;
  // Fixed input standardization; not trained.
  Vec feat_mean;  // D
  Vec feat_std;   // D
  Mat input_w;    // Dm x D
  Vec input_b;    // Dm
  std::vector<BiMambaLayer> layers;
  Mat head_w;  // d x Dm
  Vec head_b;  // d

  /// Zero-valued model with the same shapes; used as a gradient buffer.
  EncoderModel ZerosLike() const;
  size_t ParameterCount() const;
};

/// Mutable view of one trainable tensor.
struct ParamView {
  std::string name;
  double* data;
  size_t size;
  std::vector<uint64_t> shape;
};

std::vector<ParamView> TrainableParams(EncoderModel& model);

/// Random initialization: uniform(+-1/sqrt(fan_in)) projections, A log-uniform
/// in [-16, -1], softplus^-1 timescale bias for delta in [1e-3, 1e-1].
EncoderModel InitEncoder(const EncoderConfig& cfg, uint64_t seed);

/// Copies each layer's forward block into its backward block.
void TieDirections(EncoderModel& model);

/// Sets the fixed input standardization from a set of feature frames.
void FitInputStats(EncoderModel& model, const std::vector<const Mat*>& feature_sets);

struct EmbeddingSequence {
  Mat rows;  // T x d, unit-norm rows
  int frames() const { return static_cast<int>(rows.rows()); }
};

// Forward caches kept for exact reverse-mode gradients.
struct MambaBlockCache {
  Mat x;        // block input, T x Dm
  Mat pre;      // W_in x (before the optional conv)
  Mat pre_act;  // SiLU input
  Mat u;        // SiLU(pre_act)
  Mat gate;     // W_gate x
  Mat b;        // T x N
  Mat c;        // T x N
  Mat delta_lin;
  Mat delta;
  Mat a;  // Di x N
  ScanForwardState scan;
  Mat y_gated;  // scan output * SiLU(gate)
};

struct LayerCache {
  Mat input;
  Mat normed;
  Mat x_hat;
  Vec inv_std;
  MambaBlockCache fwd;
  MambaBlockCache bwd;
  Mat combined;
};

struct EncoderCache {
  Mat x_std;  // standardized features
  std::vector<LayerCache> layers;
  Mat head_in;
  Mat head_out;  // pre-normalization
  Vec norms;
};

Mat MambaBlockForward(const MambaBlockParams& block, const Mat& x, Exec exec = Exec::kSerial,
                      MambaBlockCache* cache = nullptr, const std::string& name = "block");

/// One bidirectional layer: out_proj(fwd(norm x) + rev(bwd(rev(norm x)))) + x.
Mat BiMambaLayerForward(const BiMambaLayer& layer, const Mat& x, Exec exec = Exec::kSerial,
                        LayerCache* cache = nullptr, const std::string& name = "layer");

EmbeddingSequence Encode(const EncoderModel& model, const Mat& features, Exec exec = Exec::kSerial,
                         EncoderCache* cache = nullptr);
EmbeddingSequence Encode(const EncoderModel& model, const FeatureSequence& features, Exec exec = Exec::kSerial);

/// Accumulates dL/dparams into `grads` given dL/dZ for one encoded sequence.
void EncodeBackward(const EncoderModel& model, const EncoderCache& cache, const Mat& d_embeddings,
                    EncoderModel& grads, Exec exec = Exec::kSerial);

Mat MambaBlockBackward(const MambaBlockParams& block, const MambaBlockCache& cache, const Mat& d_out,
                       MambaBlockParams& grads, Exec exec);
Mat BiMambaLayerBackward(const BiMambaLayer& layer, const LayerCache& cache, const Mat& d_out, BiMambaLayer& grads,
                         Exec exec);

Mat ReverseRows(const Mat& m);

}  // namespace tokstd
