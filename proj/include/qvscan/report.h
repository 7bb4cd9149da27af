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

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qvscan/apigraph.h"
#include "qvscan/trace.h"

namespace qvscan {

inline constexpr std::string_view kSchemaVersion = "1.0";

struct ScanReport {
  std::string schema_version{kSchemaVersion};
  std::string tool_version;
  std::vector<std::string> input_paths;
  std::string descriptor_path;
  int phase_completed = 1;
  bool conservative = false;
  EvidenceMode evidence_mode;
  std::vector<Warning> warnings;
  std::vector<std::string> executables;  // every scanned executable, sorted
  std::vector<Ev1Entry> ev1;
  std::vector<Ev2Entry> ev2;             // empty unless phase_completed >= 2
  std::vector<Phase3Verdict> ev3;        // empty unless phase_completed == 3

  friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

enum class Classification { kQvProven, kQvSuspected, kNeedsReview, kNotQv };

std::string to_string(Classification c);

struct ExecutableSummary {
  std::string path;
  Classification classification = Classification::kNotQv;
  int eliminated_at = 0;  // phase that cleared a not-QV executable, else 0
  size_t trace_length = 0;

  friend bool operator==(const ExecutableSummary&, const ExecutableSummary&) = default;
};

struct ReportSummary {
  std::vector<ExecutableSummary> executables;
  size_t qv_proven = 0;
  size_t qv_suspected = 0;
  size_t needs_review = 0;
  size_t not_qv = 0;
  // Executables an analyst still has to inspect by hand.
  size_t flagged = 0;
  double workload_reduction = 1.0;
};

ReportSummary summarize(const ScanReport& r);

// Sets of executables appearing in each evidence tier.
std::set<std::string> ev1_executables(const ScanReport& r);
std::set<std::string> ev2_executables(const ScanReport& r);
std::set<std::string> ev3_executables(const ScanReport& r, Phase3Status status);

std::string render_json(const ScanReport& r);
std::string render_text(const ScanReport& r);

class ReportParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inverse of render_json.
ScanReport parse_report(std::string_view json);

}  // namespace qvscan
