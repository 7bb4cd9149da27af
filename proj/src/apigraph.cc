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

#include "qvscan/apigraph.h"

#include <algorithm>
#include <iterator>

namespace qvscan {

namespace {

const std::set<std::string> kNoApis;

std::vector<std::string> intersect(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::vector<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

const std::set<std::string>& ApiDepGraph::apis(const std::string& src, const std::string& dst) const {
  auto it = edge_apis.find({src, dst});
  return it == edge_apis.end() ? kNoApis : it->second;
}

std::set<std::string> edge_apis(const BinaryFile& src, const BinaryFile& dst) {
  auto common = intersect(src.imported_syms, dst.exported_syms);
  return {common.begin(), common.end()};
}

std::optional<Ev2Entry> make_ev2_entry(const FileDepGraph& g, const std::vector<std::string>& path) {
  if (path.size() < 2) return std::nullopt;
  const auto& lib = g.node(path.back());
  const auto& pred = g.node(path[path.size() - 2]);
  if (!lib.is_crypto_lib || !pred.binary) return std::nullopt;
  Ev2Entry entry;
  entry.path = path;
  entry.qv_apis = intersect(pred.binary->imported_syms, lib.qv_apis());
  if (entry.qv_apis.empty()) return std::nullopt;
  for (const auto& [name, apis] : lib.matched) {
    auto hits = intersect(pred.binary->imported_syms, apis);
    if (!hits.empty()) entry.qv_apis_by_descriptor.emplace(name, std::move(hits));
  }
  return entry;
}

Phase2Result phase2(const FileDepGraph& g1, const std::vector<std::string>& execs,
                    const std::vector<std::string>& crypto_libs, const EvidenceMode& mode) {
  Phase2Result result;
  auto& g2 = result.graph.files;
  g2 = g1;

  std::vector<std::string> libs;
  for (const auto& c : crypto_libs) {
    if (g2.has_node(c)) libs.push_back(c);
  }

  for (const auto& c : libs) {
    const auto qv = g2.node(c).qv_apis();
    const auto preds = g2.predecessors(c);  // copy: edges are removed below
    for (const auto& p : preds) {
      const auto& binary = g2.node(p).binary;
      if (!binary || intersect(binary->imported_syms, qv).empty()) g2.remove_edge(p, c);
    }
  }

  const auto keep = g2.nodes_reaching({libs.begin(), libs.end()});
  std::vector<std::string> doomed;
  for (const auto& [id, node] : g2.nodes()) {
    if (!keep.count(id)) doomed.push_back(id);
  }
  for (const auto& id : doomed) g2.remove_node(id);

  for (const auto& [src, dst] : g2.edges()) {
    const auto& a = g2.node(src).binary;
    const auto& b = g2.node(dst).binary;
    result.graph.edge_apis[{src, dst}] = (a && b) ? edge_apis(*a, *b) : std::set<std::string>{};
  }

  std::vector<std::string> live_libs;
  for (const auto& c : libs) {
    if (g2.has_node(c)) live_libs.push_back(c);
  }
  std::set<std::string> exec_ids(execs.begin(), execs.end());
  for (const auto& e : exec_ids) {
    if (!g2.has_node(e)) continue;
    for (const auto& p : dependency_paths(g2, e, live_libs, mode)) {
      if (auto entry = make_ev2_entry(g2, p)) result.ev2.push_back(std::move(*entry));
    }
  }
  std::sort(result.ev2.begin(), result.ev2.end());
  return result;
}

}  // namespace qvscan
