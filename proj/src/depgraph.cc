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

#include "qvscan/depgraph.h"

#include <algorithm>
#include <deque>
#include <functional>

namespace qvscan {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kNoNeighbors;

}  // namespace

std::string canonical_id(const fs::path& path) {
  std::error_code ec;
  auto canonical = fs::canonical(path, ec);
  if (ec) canonical = fs::absolute(path, ec).lexically_normal();
  return canonical.string();
}

std::set<std::string> FileNode::qv_apis() const {
  std::set<std::string> all;
  for (const auto& [name, apis] : matched) all.insert(apis.begin(), apis.end());
  return all;
}

bool FileDepGraph::add_node(FileNode node) {
  const std::string id = node.id;
  return nodes_.emplace(id, std::move(node)).second;
}

void FileDepGraph::add_edge(const std::string& src, const std::string& dst) {
  out_[src].insert(dst);
  in_[dst].insert(src);
}

void FileDepGraph::remove_edge(const std::string& src, const std::string& dst) {
  if (auto it = out_.find(src); it != out_.end()) it->second.erase(dst);
  if (auto it = in_.find(dst); it != in_.end()) it->second.erase(src);
}

void FileDepGraph::remove_node(const std::string& id) {
  for (const auto& dst : successors(id)) in_[dst].erase(id);
  for (const auto& src : predecessors(id)) out_[src].erase(id);
  out_.erase(id);
  in_.erase(id);
  nodes_.erase(id);
}

bool FileDepGraph::has_edge(const std::string& src, const std::string& dst) const {
  auto it = out_.find(src);
  return it != out_.end() && it->second.count(dst) != 0;
}

const std::set<std::string>& FileDepGraph::successors(const std::string& id) const {
  auto it = out_.find(id);
  return it == out_.end() ? kNoNeighbors : it->second;
}

const std::set<std::string>& FileDepGraph::predecessors(const std::string& id) const {
  auto it = in_.find(id);
  return it == in_.end() ? kNoNeighbors : it->second;
}

std::vector<std::pair<std::string, std::string>> FileDepGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> all;
  for (const auto& [src, dsts] : out_) {
    for (const auto& dst : dsts) all.emplace_back(src, dst);
  }
  return all;
}

size_t FileDepGraph::edge_count() const {
  size_t n = 0;
  for (const auto& [src, dsts] : out_) n += dsts.size();
  return n;
}

std::set<std::string> FileDepGraph::nodes_reaching(const std::set<std::string>& targets) const {
  std::set<std::string> seen;
  std::deque<std::string> queue;
  for (const auto& t : targets) {
    if (has_node(t) && seen.insert(t).second) queue.push_back(t);
  }
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (const auto& pred : predecessors(cur)) {
      if (seen.insert(pred).second) queue.push_back(pred);
    }
  }
  return seen;
}

std::optional<std::vector<std::string>> FileDepGraph::shortest_path(const std::string& from,
                                                                   const std::string& to) const {
  if (!has_node(from) || !has_node(to)) return std::nullopt;
  std::map<std::string, std::string> parent;
  std::deque<std::string> queue{from};
  parent[from] = from;
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    if (cur == to) {
      std::vector<std::string> path{to};
      for (std::string at = to; at != from;) {
        at = parent[at];
        path.push_back(at);
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (const auto& next : successors(cur)) {
      if (parent.emplace(next, cur).second) queue.push_back(next);
    }
  }
  return std::nullopt;
}

std::vector<std::vector<std::string>> FileDepGraph::simple_paths(const std::string& from, const std::string& to,
                                                                 size_t cutoff) const {
  std::vector<std::vector<std::string>> paths;
  if (!has_node(from) || !has_node(to) || cutoff == 0) return paths;
  std::vector<std::string> stack{from};
  std::set<std::string> on_stack{from};
  std::function<void(const std::string&)> dfs = [&](const std::string& cur) {
    if (paths.size() >= cutoff) return;
    if (cur == to) {
      paths.push_back(stack);
      return;
    }
    for (const auto& next : successors(cur)) {
      if (on_stack.count(next)) continue;
      stack.push_back(next);
      on_stack.insert(next);
      dfs(next);
      on_stack.erase(next);
      stack.pop_back();
      if (paths.size() >= cutoff) return;
    }
  };
  dfs(from);
  return paths;
}

FileDepGraph gen_sw_dep_graph(const std::vector<fs::path>& execs, const ResolutionConfig& cfg, BinaryCache& cache,
                              std::vector<Warning>& warnings, int jobs) {
  std::vector<std::string> ids;
  ids.reserve(execs.size());
  for (const auto& e : execs) ids.push_back(canonical_id(e));
  parallel_for(ids.size(), jobs, [&](size_t i) { cache.get(ids[i]); });

  FileDepGraph g;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    if (g.has_node(id)) return;
    FileNode node;
    node.id = id;
    auto entry = cache.get(id);
    node.binary = entry.binary;
    if (!entry.binary) warnings.push_back({"parse-error", id, entry.error});
    g.add_node(std::move(node));
    if (!entry.binary) return;

    for (const auto& soname : entry.binary->needed) {
      auto resolved = resolve_dependency(soname, cfg, *entry.binary);
      std::string dep;
      if (resolved) {
        dep = resolved->string();
        visit(dep);
      } else {
        dep = std::string(kUnresolvedPrefix) + soname;
        warnings.push_back({"unresolved-dependency", id, "cannot resolve " + soname});
        if (!g.has_node(dep)) {
          FileNode leaf;
          leaf.id = dep;
          leaf.unresolved = true;
          g.add_node(std::move(leaf));
        }
      }
      g.add_edge(id, dep);
    }
  };
  for (const auto& id : ids) visit(id);
  return g;
}

std::vector<std::string> find_crypto_libs(FileDepGraph& g, const std::vector<CryptoLibDescriptor>& descs) {
  std::vector<std::string> libs;
  for (const auto& [id, const_node] : g.nodes()) {
    auto& node = g.node(id);
    node.is_crypto_lib = false;
    node.matched.clear();
    if (!node.binary) continue;
    for (const auto& d : descs) {
      if (matches(d, node.binary->exported_syms)) node.matched.emplace(d.name, d.qv_apis);
    }
    if (!node.matched.empty()) {
      node.is_crypto_lib = true;
      libs.push_back(id);
    }
  }
  return libs;
}

std::vector<std::vector<std::string>> dependency_paths(const FileDepGraph& g, const std::string& exec,
                                                       const std::vector<std::string>& crypto_libs,
                                                       const EvidenceMode& mode) {
  std::vector<std::vector<std::string>> out;
  for (const auto& lib : crypto_libs) {
    if (lib == exec) continue;
    if (mode.all_paths) {
      for (auto& p : g.simple_paths(exec, lib, mode.cutoff)) out.push_back(std::move(p));
    } else if (auto p = g.shortest_path(exec, lib)) {
      out.push_back(std::move(*p));
    }
  }
  return out;
}

Phase1Result phase1(const std::vector<fs::path>& execs, const std::vector<CryptoLibDescriptor>& descs,
                    const ResolutionConfig& cfg, BinaryCache& cache, const EvidenceMode& mode, int jobs) {
  Phase1Result result;
  result.graph = gen_sw_dep_graph(execs, cfg, cache, result.warnings, jobs);
  result.crypto_libs = find_crypto_libs(result.graph, descs);

  const std::set<std::string> libs(result.crypto_libs.begin(), result.crypto_libs.end());
  const auto keep = result.graph.nodes_reaching(libs);
  std::vector<std::string> doomed;
  for (const auto& [id, node] : result.graph.nodes()) {
    if (!keep.count(id)) doomed.push_back(id);
  }
  for (const auto& id : doomed) result.graph.remove_node(id);

  std::set<std::string> exec_ids;
  for (const auto& e : execs) exec_ids.insert(canonical_id(e));
  for (const auto& id : exec_ids) {
    auto entry = cache.get(id);
    if (entry.binary) result.executables.push_back(id);
    for (auto& p : dependency_paths(result.graph, id, result.crypto_libs, mode)) {
      result.ev1.push_back({std::move(p)});
    }
  }
  std::sort(result.ev1.begin(), result.ev1.end());
  sort_unique(result.warnings);
  return result;
}

}  // namespace qvscan
