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

#include "qvscan/eval.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qvscan {

namespace fs = std::filesystem;

std::set<std::string> GroundTruthManifest::paths_with_class(std::string_view behavior_class) const {
  std::set<std::string> out;
  for (const auto& [path, e] : entries) {
    if (e.behavior_class == behavior_class) out.insert(path);
  }
  return out;
}

GroundTruthManifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ManifestError("manifest must be a JSON object keyed by executable path");

  GroundTruthManifest m;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_object()) throw ManifestError(key + ": entry must be an object");
    ManifestEntry e;
    if (!value.contains("qv") || !value["qv"].is_boolean()) throw ManifestError(key + ": missing boolean \"qv\"");
    e.qv = value["qv"].get<bool>();
    const std::string kind = value.value("dependency_kind", "");
    if (kind == "direct") e.dependency_kind = DependencyKind::kDirect;
    else if (kind == "indirect") e.dependency_kind = DependencyKind::kIndirect;
    else if (kind == "none") e.dependency_kind = DependencyKind::kNone;
    else throw ManifestError(key + ": dependency_kind must be direct, indirect or none");
    e.behavior_class = value.value("behavior_class", "");
    e.notes = value.value("notes", "");

    fs::path p(key);
    if (p.is_relative()) p = base_dir / p;
    const std::string id = canonical_id(p);
    if (!m.entries.emplace(id, std::move(e)).second) throw ManifestError(key + ": duplicate path " + id);
  }
  return m;
}

GroundTruthManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::set<std::string> positives(const ScanReport& r, int phase, bool conservative) {
  switch (phase) {
    case 1: return ev1_executables(r);
    case 2: return ev2_executables(r);
    case 3: {
      auto out = ev3_executables(r, Phase3Status::kQvProven);
      if (conservative) {
        auto review = ev3_executables(r, Phase3Status::kNeedsReview);
        out.insert(review.begin(), review.end());
      }
      return out;
    }
    default: throw EvaluationError("phase must be 1, 2 or 3");
  }
}

std::set<std::string> flagged(const ScanReport& r, int phase, bool conservative) {
  if (phase < 3) return positives(r, phase, conservative);
  if (phase == 3) return conservative ? ev3_executables(r, Phase3Status::kNeedsReview) : std::set<std::string>{};
  throw EvaluationError("phase must be 1, 2 or 3");
}

Metrics evaluate(const ScanReport& r, const GroundTruthManifest& m, int phase, bool conservative) {
  if (phase < 1 || phase > 3) throw EvaluationError("phase must be 1, 2 or 3");
  if (r.phase_completed < phase) {
    throw EvaluationError("report completed phase " + std::to_string(r.phase_completed) + ", cannot score phase " +
                          std::to_string(phase));
  }
  if (phase == 3 && conservative && !r.conservative) {
    throw EvaluationError("conservative scoring needs a report produced in conservative mode");
  }
  std::vector<std::string> missing;
  for (const auto& exec : r.executables) {
    if (!m.entries.count(exec)) missing.push_back(exec);
  }
  if (!missing.empty()) {
    throw EvaluationError(std::to_string(missing.size()) + " scanned executable(s) missing from manifest",
                          std::move(missing));
  }

  const auto pos = positives(r, phase, conservative);
  const auto flag = flagged(r, phase, conservative);
  Metrics mt;
  for (const auto& exec : r.executables) {
    const bool truth = m.entries.at(exec).qv;
    const bool predicted = pos.count(exec) != 0;
    if (truth && predicted) ++mt.tp;
    else if (truth) ++mt.fn;
    else if (predicted) ++mt.fp;
    else ++mt.tn;
    if (flag.count(exec)) ++mt.flagged;
  }
  mt.total = r.executables.size();
  mt.tpr = mt.tp + mt.fn ? static_cast<double>(mt.tp) / static_cast<double>(mt.tp + mt.fn) : 1.0;
  mt.tnr = mt.tn + mt.fp ? static_cast<double>(mt.tn) / static_cast<double>(mt.tn + mt.fp) : 1.0;
  mt.workload_reduction = mt.total ? 1.0 - static_cast<double>(mt.flagged) / static_cast<double>(mt.total) : 1.0;
  return mt;
}

ScanReport restrict_report(const ScanReport& r, const std::set<std::string>& executables) {
  ScanReport out = r;
  std::erase_if(out.executables, [&](const std::string& e) { return !executables.count(e); });
  std::erase_if(out.ev1, [&](const Ev1Entry& e) { return !executables.count(e.path.front()); });
  std::erase_if(out.ev2, [&](const Ev2Entry& e) { return !executables.count(e.path.front()); });
  std::erase_if(out.ev3, [&](const Phase3Verdict& v) { return !executables.count(v.executable); });
  return out;
}

std::string metrics_json(const std::vector<std::pair<std::string, Metrics>>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [label, m] : rows) {
    j.push_back({{"label", label},
                 {"tp", m.tp},
                 {"fp", m.fp},
                 {"tn", m.tn},
                 {"fn", m.fn},
                 {"tpr", m.tpr},
                 {"tnr", m.tnr},
                 {"flagged", m.flagged},
                 {"total", m.total},
                 {"workload_reduction", m.workload_reduction}});
  }
  return j.dump(2) + "\n";
}

std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  size_t width = 5;
  for (const auto& [label, m] : rows) width = std::max(width, label.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %5s %5s %5s %5s %8s %8s %8s %10s\n", static_cast<int>(width), "phase", "TP",
                "FP", "TN", "FN", "TPR", "TNR", "flagged", "reduction");
  os << buf;
  for (const auto& [label, m] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %5zu %5zu %5zu %5zu %7.2f%% %7.2f%% %8zu %9.2f%%\n", static_cast<int>(width),
                  label.c_str(), m.tp, m.fp, m.tn, m.fn, m.tpr * 100, m.tnr * 100, m.flagged,
                  m.workload_reduction * 100);
    os << buf;
  }
  return os.str();
}

}  // namespace qvscan
