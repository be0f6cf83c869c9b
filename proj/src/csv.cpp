// Copyright 2026 the pmkt authors
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

#include "pmkt/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmkt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

bool ConfigSection::has(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return true;
  }
  return false;
}

const std::string& ConfigSection::get(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  throw std::invalid_argument("config: missing key '" + key + "' in section [" +
                              name + "]");
}

std::string ConfigSection::get_or(const std::string& key,
                                  const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

std::vector<ConfigSection> parse_config_text(const std::string& text) {
  std::vector<ConfigSection> sections;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header");
      }
      sections.push_back(ConfigSection{trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    if (sections.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": key outside any [section]");
    }
    sections.back().entries.emplace_back(trim(line.substr(0, eq)),
                                         trim(line.substr(eq + 1)));
  }
  return sections;
}

std::vector<ConfigSection> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

double to_double(const std::string& value, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (trim(value.substr(pos)).empty()) return v;
  } catch (...) {
  }
  throw std::invalid_argument("config: '" + value + "' is not a number for " + what);
}

std::int64_t to_int(const std::string& value, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (trim(value.substr(pos)).empty()) return v;
  } catch (...) {
  }
  throw std::invalid_argument("config: '" + value + "' is not an integer for " + what);
}

bool to_bool(const std::string& value, const std::string& what) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: '" + value + "' is not a boolean for " + what);
}

std::vector<double> to_double_list(const std::string& value, const std::string& what) {
  std::vector<double> out;
  std::string token;
  std::istringstream is(value);
  while (std::getline(is, token, ',')) {
    std::istringstream ts(token);
    std::string word;
    while (ts >> word) out.push_back(to_double(word, what));
  }
  return out;
}

Mat to_matrix(const std::string& value, const std::string& what) {
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream is(value);
  while (std::getline(is, row, ';')) {
    rows.push_back(to_double_list(row, what));
    if (rows.back().empty()) throw std::invalid_argument("config: empty matrix row in " + what);
    if (rows.back().size() != rows.front().size()) {
      throw std::invalid_argument("config: ragged matrix in " + what);
    }
  }
  if (rows.empty()) throw std::invalid_argument("config: empty matrix in " + what);
  Mat m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Vec to_vector(const std::string& value, const std::string& what) {
  const auto vals = to_double_list(value, what);
  if (vals.empty()) throw std::invalid_argument("config: empty vector in " + what);
  Vec v(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
  return v;
}

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace pmkt
