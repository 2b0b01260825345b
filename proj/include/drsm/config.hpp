// Copyright 2026 The DRSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DRSM_CONFIG_HPP
#define DRSM_CONFIG_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace drsm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Line-oriented `key = value` text; '#' starts a comment. Later keys
// override earlier ones.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> read_key_value_file(const std::string& path);

// "key=value" override as given on a command line.
std::pair<std::string, std::string> parse_override(const std::string& text);

double parse_double(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);

std::string format_double(double v);

}  // namespace drsm

#endif  // DRSM_CONFIG_HPP
