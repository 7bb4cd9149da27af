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
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "qvscan/elf_reader.h"

namespace qvscan {

// Non-fatal problems surfaced in report metadata.
struct Warning {
  std::string kind;  // non-elf, parse-error, unresolved-dependency, callgraph-unsupported, ...
  std::string path;
  std::string message;

  friend bool operator==(const Warning&, const Warning&) = default;
  friend auto operator<=>(const Warning&, const Warning&) = default;
};

void sort_unique(std::vector<Warning>& warnings);

// Runs body(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(size_t count, int jobs, const std::function<void(size_t)>& body);

// Parses each file at most once, however many threads ask for it.
class BinaryCache {
 public:
  struct Entry {
    std::shared_ptr<const BinaryFile> binary;
    std::string error;  // set when parsing failed
  };

  explicit BinaryCache(bool strip_symbol_versions = true) : strip_versions_(strip_symbol_versions) {}

  BinaryCache(const BinaryCache&) = delete;
  BinaryCache& operator=(const BinaryCache&) = delete;

  // `path` should already be canonical; it is the cache key.
  Entry get(const std::filesystem::path& path);

  size_t parse_count() const { return parses_.load(); }

 private:
  struct Slot {
    std::once_flag once;
    Entry entry;
  };

  bool strip_versions_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::atomic<size_t> parses_{0};
};

}  // namespace qvscan
