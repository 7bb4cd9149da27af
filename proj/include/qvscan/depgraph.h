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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qvscan/binary_cache.h"
#include "qvscan/descriptor.h"
#include "qvscan/elf_reader.h"

namespace qvscan {

// Node ids are canonical absolute paths; unresolved dependencies get
// "unresolved:<soname>".
inline constexpr std::string_view kUnresolvedPrefix = "unresolved:";

struct FileNode {
  std::string id;
  std::shared_ptr<const BinaryFile> binary;  // null for unresolved or unparseable files
  bool unresolved = false;
  bool is_crypto_lib = false;
  // Matched descriptor name -> that descriptor's QV API set.
  std::map<std::string, std::set<std::string>> matched;

  std::set<std::string> qv_apis() const;
};

// Directed file-level dependency graph; edge (a, b) means a needs b.
class FileDepGraph {
 public:
  bool add_node(FileNode node);
  void add_edge(const std::string& src, const std::string& dst);
  void remove_node(const std::string& id);
  void remove_edge(const std::string& src, const std::string& dst);

  bool has_node(const std::string& id) const { return nodes_.count(id) != 0; }
  bool has_edge(const std::string& src, const std::string& dst) const;
  const FileNode& node(const std::string& id) const { return nodes_.at(id); }
  FileNode& node(const std::string& id) { return nodes_.at(id); }
  const std::map<std::string, FileNode>& nodes() const { return nodes_; }
  const std::set<std::string>& successors(const std::string& id) const;
  const std::set<std::string>& predecessors(const std::string& id) const;
  std::vector<std::pair<std::string, std::string>> edges() const;
  size_t edge_count() const;

  // Every node with a directed path to some member of `targets` (targets included).
  std::set<std::string> nodes_reaching(const std::set<std::string>& targets) const;
  // Shortest path by BFS, neighbors visited in lexicographic order.
  std::optional<std::vector<std::string>> shortest_path(const std::string& from, const std::string& to) const;
  // Simple paths in lexicographic DFS order, at most `cutoff` of them.
  std::vector<std::vector<std::string>> simple_paths(const std::string& from, const std::string& to,
                                                     size_t cutoff) const;

 private:
  std::map<std::string, FileNode> nodes_;
  std::map<std::string, std::set<std::string>> out_;
  std::map<std::string, std::set<std::string>> in_;
};

struct EvidenceMode {
  bool all_paths = false;
  size_t cutoff = 100;  // per (executable, crypto lib) pair

  friend bool operator==(const EvidenceMode&, const EvidenceMode&) = default;
};

struct Ev1Entry {
  std::vector<std::string> path;

  friend bool operator==(const Ev1Entry&, const Ev1Entry&) = default;
  friend auto operator<=>(const Ev1Entry&, const Ev1Entry&) = default;
};

// Depth-first discovery of every transitive dependency of `execs`.
// Unresolved sonames become leaf nodes and produce warnings.
FileDepGraph gen_sw_dep_graph(const std::vector<std::filesystem::path>& execs, const ResolutionConfig& cfg,
                              BinaryCache& cache, std::vector<Warning>& warnings, int jobs = 1);

// Flags nodes whose exports satisfy at least one descriptor, recording all
// matches. Returns the flagged ids in sorted order.
std::vector<std::string> find_crypto_libs(FileDepGraph& g, const std::vector<CryptoLibDescriptor>& descs);

// Paths from `exec` to each crypto lib in `crypto_libs`, per `mode`.
std::vector<std::vector<std::string>> dependency_paths(const FileDepGraph& g, const std::string& exec,
                                                       const std::vector<std::string>& crypto_libs,
                                                       const EvidenceMode& mode);

struct Phase1Result {
  FileDepGraph graph;  // pruned
  std::vector<Ev1Entry> ev1;
  std::vector<std::string> crypto_libs;
  std::vector<std::string> executables;  // canonical ids of the parsed inputs
  std::vector<Warning> warnings;
};

Phase1Result phase1(const std::vector<std::filesystem::path>& execs, const std::vector<CryptoLibDescriptor>& descs,
                    const ResolutionConfig& cfg, BinaryCache& cache, const EvidenceMode& mode = {}, int jobs = 1);

std::string canonical_id(const std::filesystem::path& path);

}  // namespace qvscan
