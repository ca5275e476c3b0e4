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
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tokstd/common.hpp"

namespace tokstd {

/// Scalar from a config file or a command-line override.
using ConfigScalar = std::variant<bool, int64_t, double, std::string>;

/// Flat key -> value map; table headers are folded into dotted keys.
using ConfigTable = std::map<std::string, ConfigScalar>;

/// Parses the TOML subset used by config files: comments, [table] headers,
/// and `key = value` lines with string, integer, float or boolean values.
ConfigTable ParseToml(const std::string& text, const std::string& source = "<config>");
ConfigTable LoadToml(const std::string& path);

/// Parses one "key=value" override. Unquoted values that are not numbers or
/// booleans are taken as strings.
std::pair<std::string, ConfigScalar> ParseOverride(const std::string& assignment);

/// Binds config keys to struct fields and applies tables to them, rejecting
/// unknown keys and mistyped values.
class ConfigBinder {
 public:
  void bind(const std::string& key, double* field);
  void bind(const std::string& key, int* field);
  void bind(const std::string& key, uint64_t* field);  // also size_t
  void bind(const std::string& key, bool* field);
  void bind(const std::string& key, std::string* field);

  /// Applies every entry; `origin` is recorded for the resolved-config log.
  void apply(const ConfigTable& table, const std::string& origin);
  void apply(const std::string& key, const ConfigScalar& value, const std::string& origin);

  bool has(const std::string& key) const { return fields_.count(key) > 0; }

  /// Every bound key with its current value and where it came from.
  std::string describe() const;

 private:
  using Target = std::variant<double*, int*, uint64_t*, bool*, std::string*>;
  struct Field {
    Target target;
    std::string origin = "default";
  };
  std::map<std::string, Field> fields_;
};

std::string FormatScalar(const ConfigScalar& v);

}  // namespace tokstd
