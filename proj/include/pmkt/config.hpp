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

#ifndef PMKT_CONFIG_HPP
#define PMKT_CONFIG_HPP

#include <string>
#include <utility>
#include <vector>

#include "pmkt/linalg.hpp"

namespace pmkt {

// Flat structured text: [section] headers (repeatable), key = value lines,
// '#' comments. Consumers check their own schemas and reject unknown keys.
struct ConfigSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
};

std::vector<ConfigSection> parse_config_text(const std::string& text);
std::vector<ConfigSection> parse_config_file(const std::string& path);

double to_double(const std::string& value, const std::string& what);
std::int64_t to_int(const std::string& value, const std::string& what);
bool to_bool(const std::string& value, const std::string& what);
// Comma- or space-separated scalars.
std::vector<double> to_double_list(const std::string& value, const std::string& what);
// Rows separated by ';', entries by spaces/commas.
Mat to_matrix(const std::string& value, const std::string& what);
Vec to_vector(const std::string& value, const std::string& what);

// Shortest-faithful decimal formatting used by every CSV/manifest writer.
std::string fmt_g17(double v);

}  // namespace pmkt

#endif  // PMKT_CONFIG_HPP
