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
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qvscan/report.h"

namespace qvscan {

enum class DependencyKind { kDirect, kIndirect, kNone };

struct ManifestEntry {
  bool qv = false;
  DependencyKind dependency_kind = DependencyKind::kNone;
  std::string behavior_class;  // optional
  std::string notes;
};

struct GroundTruthManifest {
  // Canonical executable path -> ground truth.
  std::map<std::string, ManifestEntry> entries;

  std::set<std::string> paths_with_class(std::string_view behavior_class) const;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Keys that are relative paths resolve against `base_dir`.
GroundTruthManifest parse_manifest(std::string_view json, const std::filesystem::path& base_dir);
GroundTruthManifest load_manifest(const std::filesystem::path& path);

class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::vector<std::string> missing = {})
      : std::runtime_error(what), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

struct Metrics {
  size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double tpr = 1.0, tnr = 1.0;
  size_t flagged = 0;
  size_t total = 0;
  double workload_reduction = 1.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Executables the report calls QV after `phase`. Conservative phase 3
// adds needs-review to qv-proven.
std::set<std::string> positives(const ScanReport& r, int phase, bool conservative);

// Executables still requiring manual review after `phase`: the phase's
// positives for phases 1 and 2, needs-review for phase 3.
std::set<std::string> flagged(const ScanReport& r, int phase, bool conservative);

// Scores every executable of `r`. Throws EvaluationError when one is absent
// from the manifest or when `r` did not reach `phase`.
Metrics evaluate(const ScanReport& r, const GroundTruthManifest& m, int phase, bool conservative);

// Copy of `r` narrowed to the given executables.
ScanReport restrict_report(const ScanReport& r, const std::set<std::string>& executables);

std::string metrics_json(const std::vector<std::pair<std::string, Metrics>>& rows);
std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows);

}  // namespace qvscan
