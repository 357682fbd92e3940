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

#include "cn3d/config.hpp"

#include <charconv>
#include <sstream>

#include "cn3d/error.hpp"
#include "cn3d/grid_io.hpp"

namespace cn3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    std::string key;
    std::string value;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      key = trim(line.substr(0, eq));
      value = trim(line.substr(eq + 1));
    } else {
      const auto sp = line.find_first_of(" \t");
      if (sp == std::string::npos) {
        throw ParseError(source + ":" + std::to_string(lineno) + ": missing value for '" +
                         line + "'");
      }
      key = line.substr(0, sp);
      value = trim(line.substr(sp + 1));
    }
    if (key.empty()) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
    }
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  return parse(read_file_text(path), path.string());
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) {
    values_[k] = v;
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  long long v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("config key '" + key + "': expected an integer, got '" + s + "'");
  }
  return v;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  const auto& s = it->second;
  if (s == "1" || s == "true" || s == "on" || s == "yes") {
    return true;
  }
  if (s == "0" || s == "false" || s == "off" || s == "no") {
    return false;
  }
  throw InvalidArgument("config key '" + key + "': expected a boolean, got '" + s + "'");
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::vector<std::string> KeyValues::get_list(const std::string& key,
                                             std::vector<std::string> fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  std::string s = it->second;
  for (char& c : s) {
    if (c == ',') {
      c = ' ';
    }
  }
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) {
    out.push_back(tok);
  }
  return out;
}

std::vector<double> KeyValues::get_doubles(const std::string& key,
                                           std::vector<double> fallback) const {
  if (!has(key)) {
    known_.insert(key);
    return fallback;
  }
  std::vector<double> out;
  for (const auto& tok : get_list(key, {})) {
    out.push_back(parse_double(key, tok));
  }
  return out;
}

std::vector<std::string> KeyValues::unknown_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (known_.count(k) == 0) {
      out.push_back(k);
    }
  }
  return out;
}

void KeyValues::reject_unknown(const std::string& context) const {
  const auto unknown = unknown_keys();
  if (unknown.empty()) {
    return;
  }
  std::string msg = context + ": unknown key(s):";
  for (const auto& k : unknown) {
    msg += " " + k;
  }
  throw InvalidArgument(msg);
}

KeyValues KeyValues::with_prefix(const std::string& prefix) const {
  KeyValues out;
  for (const auto& [k, v] : values_) {
    if (k.rfind(prefix, 0) == 0) {
      out.values_[k.substr(prefix.size())] = v;
    }
  }
  return out;
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + " = " + v + "\n";
  }
  return out;
}

}  // namespace cn3d
