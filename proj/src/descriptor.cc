/*
 * Copyright 2026 The qvscan Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "qvscan/descriptor.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qvscan {

using nlohmann::json;

std::vector<CryptoLibDescriptor> parse_descriptors(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DescriptorError(std::string("malformed descriptor JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DescriptorError("descriptor file must hold a top-level array");

  std::vector<CryptoLibDescriptor> out;
  std::set<std::string> seen;
  for (size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    const std::string where = "descriptor #" + std::to_string(i);
    if (!obj.is_object()) throw DescriptorError(where + ": expected an object");
    if (!obj.contains("name") || !obj["name"].is_string()) throw DescriptorError(where + ": missing string 'name'");
    if (!obj.contains("qv_apis") || !obj["qv_apis"].is_array()) {
      throw DescriptorError(where + ": missing array 'qv_apis'");
    }
    CryptoLibDescriptor d;
    d.name = obj["name"].get<std::string>();
    if (d.name.empty()) throw DescriptorError(where + ": empty name");
    for (const auto& api : obj["qv_apis"]) {
      if (!api.is_string() || api.get<std::string>().empty()) {
        throw DescriptorError(where + " (" + d.name + "): qv_apis entries must be non-empty strings");
      }
      d.qv_apis.insert(api.get<std::string>());
    }
    if (d.qv_apis.empty()) throw DescriptorError(where + " (" + d.name + "): qv_apis is empty");
    if (obj.contains("min_match_ratio")) {
      if (!obj["min_match_ratio"].is_number()) {
        throw DescriptorError(where + " (" + d.name + "): min_match_ratio must be a number");
      }
      d.min_match_ratio = obj["min_match_ratio"].get<double>();
      if (!(d.min_match_ratio > 0.0 && d.min_match_ratio <= 1.0)) {
        throw DescriptorError(where + " (" + d.name + "): min_match_ratio must lie in (0, 1]");
      }
    }
    if (!seen.insert(d.name).second) throw DescriptorError("duplicate descriptor name '" + d.name + "'");
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<CryptoLibDescriptor> load_descriptors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DescriptorError("cannot open descriptor file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_descriptors(buf.str());
  } catch (const DescriptorError& e) {
    throw DescriptorError(path.string() + ": " + e.what());
  }
}

bool matches(const CryptoLibDescriptor& d, const std::set<std::string>& exported) {
  if (d.qv_apis.empty() || exported.empty()) return false;
  size_t hits = 0;
  for (const auto& api : d.qv_apis) hits += exported.count(api);
  // Integer threshold avoids 0.999.. rounding: need ceil(ratio * n) hits.
  const auto needed = static_cast<size_t>(std::ceil(d.min_match_ratio * static_cast<double>(d.qv_apis.size()) - 1e-9));
  return hits >= std::max<size_t>(needed, 1);
}

}  // namespace qvscan
