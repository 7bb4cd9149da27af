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

#include "qvscan/trace.h"

#include <algorithm>

namespace qvscan {

std::string to_string(Phase3Status s) {
  switch (s) {
    case Phase3Status::kQvProven: return "qv-proven";
    case Phase3Status::kNonQv: return "non-qv";
    case Phase3Status::kNeedsReview: return "needs-review";
  }
  return "unknown";
}

CallgraphCache::Entry CallgraphCache::get(const FileNode& node) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mu_);
    auto& s = slots_[node.id];
    if (!s) s = std::make_shared<Slot>();
    slot = s;
  }
  std::call_once(slot->once, [&] {
    if (!node.binary) {
      slot->entry.error = node.id + ": file was not parsed";
      return;
    }
    ++constructions_;
    slot->builds++;
    try {
      slot->entry.graph = std::make_shared<const Callgraph>(gen_callgraph(*node.binary, decoder_));
    } catch (const std::exception& e) {
      slot->entry.error = e.what();
    }
  });
  return slot->entry;
}

std::map<std::string, size_t> CallgraphCache::construction_counts() const {
  std::lock_guard lock(mu_);
  std::map<std::string, size_t> out;
  for (const auto& [id, slot] : slots_) out[id] = slot->builds;
  return out;
}

std::map<std::string, std::shared_ptr<const Callgraph>> CallgraphCache::graphs() const {
  std::lock_guard lock(mu_);
  std::map<std::string, std::shared_ptr<const Callgraph>> out;
  for (const auto& [id, slot] : slots_) {
    if (slot->entry.graph) out[id] = slot->entry.graph;
  }
  return out;
}

namespace {

const Callgraph& callgraph_for(const ApiDepGraph& g2, const std::string& id, CallgraphCache& cache) {
  auto entry = cache.get(g2.files.node(id));
  if (!entry.graph) throw CallgraphUnsupported(entry.error);
  // The cache owns the graph for its whole lifetime.
  return *entry.graph;
}

}  // namespace

std::optional<StaticTrace> get_static_trace(const ApiDepGraph& g2, const std::vector<std::string>& path, size_t i,
                                            const std::string& from_func, CallgraphCache& cache) {
  if (i + 1 >= path.size()) return StaticTrace{{{path.back(), from_func}}};

  const Callgraph& cg = callgraph_for(g2, path[i], cache);
  std::set<std::string> candidates = g2.apis(path[i], path[i + 1]);
  if (i + 2 == path.size()) {
    const auto qv = g2.files.node(path.back()).qv_apis();
    std::erase_if(candidates, [&](const std::string& api) { return !qv.count(api); });
  }
  for (const auto& to_func : candidates) {
    auto local = reachable_path(cg, from_func, to_func);
    if (!local) continue;
    auto rest = get_static_trace(g2, path, i + 1, to_func, cache);
    if (!rest) continue;
    StaticTrace trace;
    for (auto& f : *local) trace.steps.push_back({path[i], std::move(f)});
    trace.steps.insert(trace.steps.end(), rest->steps.begin(), rest->steps.end());
    return trace;
  }
  return std::nullopt;
}

Phase3Result phase3(const ApiDepGraph& g2, const std::vector<Ev2Entry>& ev2, bool conservative,
                    CallgraphCache& cache, int jobs) {
  std::map<std::string, std::vector<const Ev2Entry*>> by_exec;
  for (const auto& e : ev2) {
    if (!e.path.empty()) by_exec[e.path.front()].push_back(&e);
  }
  std::vector<std::string> execs;
  for (const auto& [exec, entries] : by_exec) execs.push_back(exec);

  Phase3Result result;
  result.verdicts.resize(execs.size());
  std::vector<std::vector<Warning>> warnings(execs.size());

  parallel_for(execs.size(), jobs, [&](size_t k) {
    const auto& exec = execs[k];
    auto& verdict = result.verdicts[k];
    verdict.executable = exec;
    std::optional<std::string> main_id;
    try {
      const Callgraph& cg = callgraph_for(g2, exec, cache);
      main_id = cg.main_id;
      const auto& binary = g2.files.node(exec).binary;
      if (binary && get_main_address(*binary).method == MainMethod::kEntryPoint) {
        warnings[k].push_back({"main-fallback", exec, "main not found; tracing from the entry point"});
      }
    } catch (const std::exception& e) {
      warnings[k].push_back({"callgraph-unsupported", exec, e.what()});
    }
    if (main_id) {
      for (const Ev2Entry* entry : by_exec.at(exec)) {
        try {
          if (auto trace = get_static_trace(g2, entry->path, 0, *main_id, cache)) {
            verdict.status = Phase3Status::kQvProven;
            verdict.trace = std::move(trace);
            return;
          }
        } catch (const CallgraphUnsupported& e) {
          warnings[k].push_back({"callgraph-unsupported", exec, e.what()});
        }
      }
    }
    if (conservative) {
      verdict.status = Phase3Status::kNeedsReview;
      verdict.ev2 = *by_exec.at(exec).front();
    }
  });

  for (auto& w : warnings) result.warnings.insert(result.warnings.end(), w.begin(), w.end());
  sort_unique(result.warnings);
  return result;
}

}  // namespace qvscan
