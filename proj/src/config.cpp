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

#include "tokstd/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace tokstd {
namespace {

std::string Trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool IsBareKey(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
              c == '.';
    if (!ok) return false;
  }
  return k.front() != '.' && k.back() != '.';
}

// Strips a trailing comment that is not inside a string.
std::string StripComment(const std::string& line) {
  char quote = 0;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool ParseNumber(std::string text, ConfigScalar& out) {
  if (text.empty()) return false;
  std::string cleaned;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '_') {
      if (i == 0 || i + 1 == text.size()) return false;
      continue;
    }
    cleaned += text[i];
  }
  text = cleaned;
  if (text == "inf" || text == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (text == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  bool is_float = text.find_first_of(".eE") != std::string::npos;
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  if (is_float) {
    double v = std::strtod(begin, &end);
    if (end != begin + text.size() || errno == ERANGE) return false;
    out = v;
  } else {
    long long v = std::strtoll(begin, &end, 10);
    if (end != begin + text.size() || errno == ERANGE) return false;
    out = static_cast<int64_t>(v);
  }
  return true;
}

ConfigScalar ParseValue(const std::string& raw, const std::string& where) {
  std::string v = Trim(raw);
  if (v.empty()) Fail(ErrorKind::kParse, where + ": missing value");
  if (v.front() == '"') {
    std::string s;
    size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] == '\\' && i + 1 < v.size()) {
        char e = v[++i];
        switch (e) {
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          case '\\': s += '\\'; break;
          case '"': s += '"'; break;
          default: Fail(ErrorKind::kParse, where + ": unsupported escape \\" + std::string(1, e));
        }
      } else {
        s += v[i];
      }
    }
    if (i + 1 != v.size()) Fail(ErrorKind::kParse, where + ": malformed string value");
    return s;
  }
  if (v.front() == '\'') {
    if (v.size() < 2 || v.back() != '\'' || v.find('\'', 1) != v.size() - 1) {
      Fail(ErrorKind::kParse, where + ": malformed literal string");
    }
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  ConfigScalar num;
  if (ParseNumber(v, num)) return num;
  Fail(ErrorKind::kParse, where + ": unsupported value '" + v + "'");
}

std::string TypeName(const ConfigScalar& v) {
  switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    default: return "string";
  }
}

}  // namespace

ConfigTable ParseToml(const std::string& text, const std::string& source) {
  ConfigTable out;
  std::string prefix;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = source + ":" + std::to_string(lineno);
    std::string s = Trim(StripComment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3 || s[1] == '[') Fail(ErrorKind::kParse, where + ": malformed table header");
      std::string name = Trim(s.substr(1, s.size() - 2));
      if (!IsBareKey(name)) Fail(ErrorKind::kParse, where + ": invalid table name '" + name + "'");
      prefix = name + ".";
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) Fail(ErrorKind::kParse, where + ": expected key = value");
    std::string key = Trim(s.substr(0, eq));
    if (!IsBareKey(key)) Fail(ErrorKind::kParse, where + ": invalid key '" + key + "'");
    std::string full = prefix + key;
    if (out.count(full)) Fail(ErrorKind::kParse, where + ": duplicate key '" + full + "'");
    out[full] = ParseValue(s.substr(eq + 1), where);
  }
  return out;
}

ConfigTable LoadToml(const std::string& path) {
  auto bytes = ReadFileBytes(path);
  return ParseToml(std::string(bytes.begin(), bytes.end()), path);
}

std::pair<std::string, ConfigScalar> ParseOverride(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) Fail(ErrorKind::kParse, "override '" + assignment + "' must be key=value");
  std::string key = Trim(assignment.substr(0, eq));
  std::string value = Trim(assignment.substr(eq + 1));
  if (!IsBareKey(key)) Fail(ErrorKind::kParse, "override has invalid key '" + key + "'");
  if (value.empty()) Fail(ErrorKind::kParse, "override '" + key + "' has no value");
  if (value.front() == '"' || value.front() == '\'' || value == "true" || value == "false") {
    return {key, ParseValue(value, "override " + key)};
  }
  ConfigScalar num;
  if (ParseNumber(value, num)) return {key, num};
  return {key, value};
}

void ConfigBinder::bind(const std::string& key, double* field) { fields_[key] = Field{Target(field), "default"}; }
void ConfigBinder::bind(const std::string& key, int* field) { fields_[key] = Field{Target(field), "default"}; }
void ConfigBinder::bind(const std::string& key, uint64_t* field) { fields_[key] = Field{Target(field), "default"}; }
void ConfigBinder::bind(const std::string& key, bool* field) { fields_[key] = Field{Target(field), "default"}; }
void ConfigBinder::bind(const std::string& key, std::string* field) { fields_[key] = Field{Target(field), "default"}; }

void ConfigBinder::apply(const ConfigTable& table, const std::string& origin) {
  for (const auto& [k, v] : table) apply(k, v, origin);
}

void ConfigBinder::apply(const std::string& key, const ConfigScalar& value, const std::string& origin) {
  auto it = fields_.find(key);
  if (it == fields_.end()) Fail(ErrorKind::kConfig, "unknown config key '" + key + "' (" + origin + ")");
  auto mismatch = [&](const char* want) {
    Fail(ErrorKind::kConfig, "config key '" + key + "' expects " + want + ", got " + TypeName(value) + " (" + origin + ")");
  };
  std::visit(
      [&](auto* f) {
        using T = std::remove_pointer_t<decltype(f)>;
        if constexpr (std::is_same_v<T, double>) {
          if (auto* d = std::get_if<double>(&value)) {
            *f = *d;
          } else if (auto* i = std::get_if<int64_t>(&value)) {
            *f = static_cast<double>(*i);
          } else {
            mismatch("a number");
          }
        } else if constexpr (std::is_same_v<T, bool>) {
          if (auto* b = std::get_if<bool>(&value)) {
            *f = *b;
          } else {
            mismatch("a boolean");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (auto* s = std::get_if<std::string>(&value)) {
            *f = *s;
          } else {
            mismatch("a string");
          }
        } else {
          auto* i = std::get_if<int64_t>(&value);
          if (!i) mismatch("an integer");
          if (*i < 0 && !std::is_same_v<T, int>) {
            Fail(ErrorKind::kConfig, "config key '" + key + "' must be non-negative (" + origin + ")");
          }
          if constexpr (std::is_same_v<T, int>) {
            if (*i < std::numeric_limits<int>::min() || *i > std::numeric_limits<int>::max()) {
              Fail(ErrorKind::kConfig, "config key '" + key + "' is out of range (" + origin + ")");
            }
          }
          *f = static_cast<T>(*i);
        }
      },
      it->second.target);
  it->second.origin = origin;
}

std::string FormatScalar(const ConfigScalar& v) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          os << (x ? "true" : "false");
        } else if constexpr (std::is_same_v<T, std::string>) {
          os << '"' << x << '"';
        } else {
          os << x;
        }
      },
      v);
  return os.str();
}

std::string ConfigBinder::describe() const {
  std::ostringstream os;
  for (const auto& [k, f] : fields_) {
    ConfigScalar v = std::visit(
        [](auto* p) -> ConfigScalar {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, double> || std::is_same_v<T, bool> || std::is_same_v<T, std::string>) {
            return *p;
          } else {
            return static_cast<int64_t>(*p);
          }
        },
        f.target);
    os << k << " = " << FormatScalar(v) << "  # " << f.origin << '\n';
  }
  return os.str();
}

}  // namespace tokstd
