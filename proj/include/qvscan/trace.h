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

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qvscan/apigraph.h"
#include "qvscan/binary_cache.h"
#include "qvscan/callgraph.h"

namespace qvscan {

struct TraceStep {
  std::string file;
  std::string function;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
  friend auto operator<=>(const TraceStep&, const TraceStep&) = default;
};

struct StaticTrace {
  std::vector<TraceStep> steps;

  friend bool operator==(const StaticTrace&, const StaticTrace&) = default;
  friend auto operator<=>(const StaticTrace&, const StaticTrace&) = default;
};

enum class Phase3Status { kQvProven, kNonQv, kNeedsReview };

std::string to_string(Phase3Status s);

struct Phase3Verdict {
  std::string executable;
  Phase3Status status = Phase3Status::kNonQv;
  std::optional<StaticTrace> trace;  // set iff qv-proven
  std::optional<Ev2Entry> ev2;       // set iff needs-review

  friend bool operator==(const Phase3Verdict&, const Phase3Verdict&) = default;
};

// Builds each file's callgraph at most once. Thread-safe.
class CallgraphCache {
 public:
  struct Entry {
    std::shared_ptr<const Callgraph> graph;
    std::string error;  // set when construction failed
  };

  explicit CallgraphCache(const InstructionDecoder* decoder = nullptr) : decoder_(decoder) {}

  CallgraphCache(const CallgraphCache&) = delete;
  CallgraphCache& operator=(const CallgraphCache&) = delete;

  Entry get(const FileNode& node);

  size_t constructions() const { return constructions_.load(); }
  // File id -> number of constructions (always 1 for cached files).
  std::map<std::string, size_t> construction_counts() const;
  // Successfully built graphs by file id.
  std::map<std::string, std::shared_ptr<const Callgraph>> graphs() const;

 private:
  struct Slot {
    std::once_flag once;
    Entry entry;
    size_t builds = 0;
  };

  const InstructionDecoder* decoder_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::atomic<size_t> constructions_{0};
};

// Trace from `from_func` in path[i] to a QV API exported by path.back().
// Candidate APIs on each hop are tried in sorted order; on the last hop
// only the crypto lib's QV APIs are candidates. Throws CallgraphUnsupported
// if a file on the path has no usable callgraph.
std::optional<StaticTrace> get_static_trace(const ApiDepGraph& g2, const std::vector<std::string>& path, size_t i,
                                            const std::string& from_func, CallgraphCache& cache);

struct Phase3Result {
  std::vector<Phase3Verdict> verdicts;  // one per EV2 executable, sorted by path
  std::vector<Warning> warnings;
};

Phase3Result phase3(const ApiDepGraph& g2, const std::vector<Ev2Entry>& ev2, bool conservative,
                    CallgraphCache& cache, int jobs = 1);

}  // namespace qvscan
