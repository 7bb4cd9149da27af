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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qvscan/depgraph.h"

namespace qvscan {

// File graph whose edges carry the API names linking the two files.
struct ApiDepGraph {
  FileDepGraph files;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> edge_apis;

  const std::set<std::string>& apis(const std::string& src, const std::string& dst) const;
};

struct Ev2Entry {
  std::vector<std::string> path;
  // QV APIs imported by the crypto lib's predecessor on this path, sorted.
  std::vector<std::string> qv_apis;
  // The same set split by matched descriptor.
  std::map<std::string, std::vector<std::string>> qv_apis_by_descriptor;

  friend bool operator==(const Ev2Entry&, const Ev2Entry&) = default;
  friend auto operator<=>(const Ev2Entry&, const Ev2Entry&) = default;
};

// Imported-by-src ∩ exported-by-dst.
std::set<std::string> edge_apis(const BinaryFile& src, const BinaryFile& dst);

// Builds the EV2 record for a dependency path ending at a crypto lib, or
// nullopt if the lib's predecessor imports none of its QV APIs.
std::optional<Ev2Entry> make_ev2_entry(const FileDepGraph& g, const std::vector<std::string>& path);

struct Phase2Result {
  ApiDepGraph graph;
  std::vector<Ev2Entry> ev2;
};

// Drops crypto-lib edges whose source imports no QV API, re-prunes, then
// annotates every surviving edge with its API set.
Phase2Result phase2(const FileDepGraph& g1, const std::vector<std::string>& execs,
                    const std::vector<std::string>& crypto_libs, const EvidenceMode& mode = {});

}  // namespace qvscan
