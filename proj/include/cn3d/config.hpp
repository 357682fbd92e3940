// Copyright 2026 The cn3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Flat key-value configuration text.
//
//   # comment
//   grid.vx = 0.05
//   scene.classes = Car,Pedestrian
//
// `key = value` and `key value` are both accepted. Later assignments win, so
// files can be merged with command-line overrides by parsing in order.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cn3d {

class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(const std::string& text, const std::string& source = "<text>");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Later values override existing ones.
  void merge(const KeyValues& other);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Typed lookups with defaults. Each lookup marks the key as known.
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Whitespace- or comma-separated reals.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    std::vector<std::string> fallback) const;

  /// Marks a key as known without reading it.
  void touch(const std::string& key) const { known_.insert(key); }
  /// Keys present but never looked up.
  std::vector<std::string> unknown_keys() const;
  /// Throws InvalidArgument listing unknown keys, if any.
  void reject_unknown(const std::string& context) const;

  /// Restricts to keys starting with `prefix`, with the prefix stripped.
  KeyValues with_prefix(const std::string& prefix) const;

  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> known_;
};

}  // namespace cn3d
