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
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tokstd {

/// Row-major dense matrix; rows are time steps for sequence data.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class ErrorKind {
  kParse,
  kSchema,
  kValidation,
  kConfig,
  kIo,
  kFormat,
  kCorruption,
  kShape,
  kDomain,
  kLength,
  kRange,
  kNumerical,
  kInput,
  kQuery,
  kSampling,
  kEmptyCorpus,
};

std::string_view ErrorKindName(ErrorKind kind);

/// Single exception type for the library; `kind()` lets callers (the CLI in
/// particular) map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

  /// True for errors caused by bad user input or configuration rather than
  /// a failure while doing work.
  bool is_validation() const;

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& what);

// Little-endian byte writer/reader used by the binary file formats.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void varint(uint64_t v);
  void bytes(std::string_view s);

  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t>& data() { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  float f32();
  uint64_t varint();
  std::string bytes(size_t n);

  size_t offset() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) const;

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

/// CRC-32C (Castagnoli polynomial, reflected), as used by iSCSI/ext4.
uint32_t Crc32c(std::span<const uint8_t> data, uint32_t crc = 0);

std::vector<uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::span<const uint8_t> data);

/// Derives an independent 64-bit stream seed from a base seed and a tag.
uint64_t MixSeed(uint64_t seed, uint64_t tag);

}  // namespace tokstd
