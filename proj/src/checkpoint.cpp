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

#include "tokstd/checkpoint.hpp"

#include <map>

namespace tokstd {
namespace {

constexpr uint32_t kVersion = 1;

NamedTensor FromMat(const std::string& name, const Mat& m) {
  NamedTensor t{name, {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())}, {}};
  t.data.resize(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) t.data[i] = static_cast<float>(m.data()[i]);
  return t;
}

NamedTensor FromVec(const std::string& name, const Vec& v) {
  NamedTensor t{name, {static_cast<uint64_t>(v.size())}, {}};
  t.data.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[i] = static_cast<float>(v[i]);
  return t;
}

const NamedTensor& Find(const std::map<std::string, const NamedTensor*>& by_name, const std::string& name) {
  auto it = by_name.find(name);
  if (it == by_name.end()) Fail(ErrorKind::kFormat, "checkpoint lacks tensor \"" + name + "\"");
  return *it->second;
}

Mat ToMat(const NamedTensor& t) {
  if (t.dims.size() != 2) Fail(ErrorKind::kFormat, "tensor \"" + t.name + "\" must be rank 2");
  Mat m(t.dims[0], t.dims[1]);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t.data[i];
  return m;
}

Vec ToVec(const NamedTensor& t) {
  if (t.dims.size() != 1) Fail(ErrorKind::kFormat, "tensor \"" + t.name + "\" must be rank 1");
  Vec v(t.dims[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[i];
  return v;
}

}  // namespace

std::vector<uint8_t> EncodeTensors(const std::vector<NamedTensor>& tensors) {
  ByteWriter w;
  w.bytes("BSTM");
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (t.name.size() > 0xFFFF) Fail(ErrorKind::kFormat, "tensor name too long");
    w.u16(static_cast<uint16_t>(t.name.size()));
    w.bytes(t.name);
    w.u8(static_cast<uint8_t>(t.dims.size()));
    uint64_t count = 1;
    for (uint64_t d : t.dims) {
      w.u64(d);
      count *= d;
    }
    if (count != t.data.size()) Fail(ErrorKind::kShape, "tensor \"" + t.name + "\" data does not match dims");
    for (float f : t.data) w.f32(f);
  }
  return std::move(w.data());
}

std::vector<NamedTensor> DecodeTensors(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != "BSTM") Fail(ErrorKind::kFormat, "not a BSTM checkpoint");
  uint32_t version = r.u32();
  if (version != kVersion) Fail(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(version));
  uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.u16());
    uint8_t rank = r.u8();
    uint64_t n = 1;
    for (uint8_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u64());
      n *= t.dims.back();
    }
    if (n > r.remaining() / 4) {
      Fail(ErrorKind::kCorruption, "tensor \"" + t.name + "\" overruns the file at offset " +
                                       std::to_string(r.offset()));
    }
    t.data.resize(n);
    for (uint64_t k = 0; k < n; ++k) t.data[k] = r.f32();
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<NamedTensor> ModelToTensors(const EncoderModel& model, const Codebook& codebook) {
  std::vector<NamedTensor> out;
  out.push_back(FromVec("input.mean", model.feat_mean));
  out.push_back(FromVec("input.std", model.feat_std));
  for (const ParamView& p : TrainableParams(const_cast<EncoderModel&>(model))) {
    NamedTensor t{p.name, p.shape, std::vector<float>(p.size)};
    for (size_t k = 0; k < p.size; ++k) t.data[k] = static_cast<float>(p.data[k]);
    out.push_back(std::move(t));
  }
  out.push_back(FromMat("codebook.centroids", codebook.centroids));
  out.push_back(FromVec("codebook.counts", codebook.counts));
  out.push_back(FromMat("codebook.sums", codebook.sums));
  return out;
}

void TensorsToModel(const std::vector<NamedTensor>& tensors, EncoderModel* model, Codebook* codebook) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t;

  // Shapes determine the architecture.
  EncoderConfig cfg;
  const NamedTensor& in_w = Find(by_name, "input_proj.weight");
  if (in_w.dims.size() != 2) Fail(ErrorKind::kFormat, "input_proj.weight must be rank 2");
  cfg.d_model = static_cast<int>(in_w.dims[0]);
  cfg.input_dim = static_cast<int>(in_w.dims[1]);
  cfg.layers = 0;
  while (by_name.count("layers." + std::to_string(cfg.layers) + ".out_proj")) ++cfg.layers;
  if (cfg.layers == 0) Fail(ErrorKind::kFormat, "checkpoint has no encoder layers");
  const NamedTensor& a_log = Find(by_name, "layers.0.fwd.a_log");
  if (a_log.dims.size() != 2 || a_log.dims[0] % cfg.d_model != 0) Fail(ErrorKind::kFormat, "bad a_log shape");
  cfg.expand = static_cast<int>(a_log.dims[0] / cfg.d_model);
  cfg.d_state = static_cast<int>(a_log.dims[1]);
  auto conv = by_name.find("layers.0.fwd.conv.weight");
  cfg.conv_kernel = conv == by_name.end() ? 0 : static_cast<int>(conv->second->dims.at(1));
  cfg.d_embed = static_cast<int>(Find(by_name, "head.weight").dims.at(0));

  EncoderModel m = InitEncoder(cfg, 0);
  m.feat_mean = ToVec(Find(by_name, "input.mean"));
  m.feat_std = ToVec(Find(by_name, "input.std"));
  for (const ParamView& p : TrainableParams(m)) {
    const NamedTensor& t = Find(by_name, p.name);
    if (t.dims != p.shape) Fail(ErrorKind::kFormat, "tensor \"" + p.name + "\" has unexpected shape");
    for (size_t k = 0; k < p.size; ++k) p.data[k] = t.data[k];
  }
  if (model) *model = std::move(m);

  if (codebook) {
    Codebook cb;
    cb.centroids = ToMat(Find(by_name, "codebook.centroids"));
    cb.counts = ToVec(Find(by_name, "codebook.counts"));
    cb.sums = ToMat(Find(by_name, "codebook.sums"));
    if (cb.counts.size() != cb.centroids.rows() || cb.sums.rows() != cb.centroids.rows() ||
        cb.sums.cols() != cb.centroids.cols()) {
      Fail(ErrorKind::kFormat, "codebook tensors disagree in shape");
    }
    cb.dead_streak.assign(cb.size(), 0);
    *codebook = std::move(cb);
  }
}

void SaveCheckpoint(const std::string& path, const EncoderModel& model, const Codebook& codebook) {
  WriteFileBytes(path, EncodeTensors(ModelToTensors(model, codebook)));
}

void LoadCheckpoint(const std::string& path, EncoderModel* model, Codebook* codebook) {
  TensorsToModel(DecodeTensors(ReadFileBytes(path)), model, codebook);
}

void RoundToStoredPrecision(EncoderModel& model, Codebook& codebook) {
  TensorsToModel(ModelToTensors(model, codebook), &model, &codebook);
}

}  // namespace tokstd
