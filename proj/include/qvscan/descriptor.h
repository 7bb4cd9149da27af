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

#pragma once

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qvscan {

class DescriptorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Identifies one crypto library by the quantum-vulnerable API names it exports.
struct CryptoLibDescriptor {
  std::string name;
  std::set<std::string> qv_apis;
  double min_match_ratio = 1.0;
};

// Reads a JSON array of {name, qv_apis, min_match_ratio?} objects, preserving
// file order. Throws DescriptorError on malformed JSON or invariant violations.
std::vector<CryptoLibDescriptor> load_descriptors(const std::filesystem::path& path);
std::vector<CryptoLibDescriptor> parse_descriptors(std::string_view json_text);

// |qv_apis ∩ exported| >= min_match_ratio * |qv_apis|.
bool matches(const CryptoLibDescriptor& d, const std::set<std::string>& exported);

}  // namespace qvscan
