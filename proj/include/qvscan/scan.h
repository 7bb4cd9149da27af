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
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qvscan/report.h"

namespace qvscan {

enum class OutputFormat { kJson, kText };

struct CliConfig {
  std::vector<std::string> input_paths;
  std::string desc_path;
  int max_phase = 3;
  bool conservative = false;
  std::vector<std::string> search_paths;
  // Append the standard loader directories after `search_paths`.
  bool system_search_paths = true;
  EvidenceMode evidence_mode;
  std::string output;  // empty means stdout
  OutputFormat format = OutputFormat::kJson;
  int jobs = 1;
  std::string dump_callgraph;  // DOT output path, empty to skip
};

// Bad flags, unreadable descriptors, missing inputs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScanStats {
  size_t parses = 0;
  size_t callgraph_constructions = 0;
  std::map<std::string, size_t> callgraph_constructions_by_file;
};

// Recursively lists ELF executables under `inputs`, canonical and sorted.
// Symlinked files are followed, symlinked directories are not. Skipped
// files become warnings.
std::vector<std::filesystem::path> enumerate_inputs(const std::vector<std::string>& inputs, BinaryCache& cache,
                                                    std::vector<Warning>& warnings);

// Runs phases 1..cfg.max_phase. Throws ConfigError.
ScanReport scan(const CliConfig& cfg, ScanStats* stats = nullptr);

// 0: nothing flagged; 1: some executable is QV-proven, QV-suspected or
// needs-review.
int exit_code_for(const ScanReport& r);

// Full CLI behavior: scan, write the report, return 0/1/2.
int run_scan(const CliConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace qvscan
