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

#include "tokstd/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tokstd/common.hpp"

namespace tokstd {
namespace {

using nlohmann::json;

const json& Field(const json& obj, const char* name, size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    Fail(ErrorKind::kSchema, "line " + std::to_string(line) + ": missing field \"" + name + "\"");
  }
  return *it;
}

std::string StringField(const json& obj, const char* name, size_t line) {
  const json& v = Field(obj, name, line);
  if (!v.is_string()) {
    Fail(ErrorKind::kSchema, "line " + std::to_string(line) + ": field \"" + name + "\" must be a string");
  }
  return v.get<std::string>();
}

double NumberField(const json& obj, const char* name, size_t line) {
  const json& v = Field(obj, name, line);
  if (!v.is_number()) {
    Fail(ErrorKind::kSchema, "line " + std::to_string(line) + ": field \"" + name + "\" must be a number");
  }
  return v.get<double>();
}

TrackRecord ParseRecord(const json& obj, size_t line) {
  if (!obj.is_object()) Fail(ErrorKind::kSchema, "line " + std::to_string(line) + ": expected an object");
  TrackRecord rec;
  rec.track_id = StringField(obj, "track_id", line);
  rec.path = StringField(obj, "path", line);
  rec.speaker_id = StringField(obj, "speaker_id", line);
  const json& occs = Field(obj, "occurrences", line);
  if (!occs.is_array()) {
    Fail(ErrorKind::kSchema, "line " + std::to_string(line) + ": field \"occurrences\" must be an array");
  }
  for (const json& o : occs) {
    if (!o.is_object()) Fail(ErrorKind::kSchema, "line " + std::to_string(line) + ": occurrence must be an object");
    TermOccurrence occ{StringField(o, "term", line), NumberField(o, "start_s", line), NumberField(o, "end_s", line)};
    if (!(occ.start_s >= 0.0 && occ.start_s < occ.end_s)) {
      Fail(ErrorKind::kValidation, "line " + std::to_string(line) + ": occurrence \"" + occ.term +
                                       "\" needs 0 <= start_s < end_s");
    }
    if (!rec.occurrences.empty() && occ.start_s < rec.occurrences.back().start_s) {
      Fail(ErrorKind::kValidation, "line " + std::to_string(line) + ": occurrences not sorted by start_s");
    }
    rec.occurrences.push_back(std::move(occ));
  }
  return rec;
}

}  // namespace

std::vector<TrackRecord> ParseManifest(const std::string& text) {
  std::vector<TrackRecord> records;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      Fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    TrackRecord rec = ParseRecord(obj, line_no);
    if (!ids.insert(rec.track_id).second) {
      Fail(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": duplicate track_id \"" + rec.track_id + "\"");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string FormatManifest(const std::vector<TrackRecord>& records) {
  std::string out;
  for (const TrackRecord& r : records) {
    json occs = json::array();
    for (const TermOccurrence& o : r.occurrences) {
      occs.push_back({{"term", o.term}, {"start_s", o.start_s}, {"end_s", o.end_s}});
    }
    json obj = {{"track_id", r.track_id}, {"path", r.path}, {"speaker_id", r.speaker_id}, {"occurrences", occs}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<TrackRecord> LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open manifest " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str());
}

void SaveManifest(const std::string& path, const std::vector<TrackRecord>& records) {
  std::string text = FormatManifest(records);
  WriteFileBytes(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::string ResolveTrackPath(const std::string& manifest_path, const std::string& track_path) {
  std::filesystem::path p(track_path);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

std::vector<UtterancePair> EnumeratePairs(const std::vector<TrackRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<UtteranceRef>> by_term;
  for (size_t i = 0; i < records.size(); ++i) {
    for (const TermOccurrence& o : records[i].occurrences) {
      auto [it, inserted] = by_term.try_emplace(o.term);
      if (inserted) order.push_back(o.term);
      it->second.push_back(UtteranceRef{i, records[i].track_id, o});
    }
  }
  std::vector<UtterancePair> pairs;
  for (const std::string& term : order) {
    const auto& refs = by_term[term];
    for (size_t a = 0; a < refs.size(); ++a) {
      for (size_t b = a + 1; b < refs.size(); ++b) pairs.push_back(UtterancePair{term, refs[a], refs[b]});
    }
  }
  return pairs;
}

std::vector<UtterancePair> ExtractPairs(const std::vector<TrackRecord>& records, uint64_t seed,
                                        size_t max_pairs_per_term) {
  std::vector<UtterancePair> all = EnumeratePairs(records);
  if (all.empty()) Fail(ErrorKind::kEmptyCorpus, "no term has two or more occurrences");
  std::mt19937_64 rng(seed);
  std::vector<UtterancePair> out;
  size_t begin = 0;
  while (begin < all.size()) {
    size_t end = begin;
    while (end < all.size() && all[end].term == all[begin].term) ++end;
    std::vector<UtterancePair> group(all.begin() + begin, all.begin() + end);
    std::shuffle(group.begin(), group.end(), rng);
    size_t keep = max_pairs_per_term == 0 ? group.size() : std::min(group.size(), max_pairs_per_term);
    out.insert(out.end(), group.begin(), group.begin() + keep);
    begin = end;
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace tokstd
