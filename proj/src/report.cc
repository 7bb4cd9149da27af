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

#include "qvscan/report.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"

namespace qvscan {

using ojson = nlohmann::ordered_json;

std::string to_string(Classification c) {
  switch (c) {
    case Classification::kQvProven: return "QV-proven";
    case Classification::kQvSuspected: return "QV-suspected";
    case Classification::kNeedsReview: return "needs-review";
    case Classification::kNotQv: return "not-QV";
  }
  return "unknown";
}

std::set<std::string> ev1_executables(const ScanReport& r) {
  std::set<std::string> out;
  for (const auto& e : r.ev1) {
    if (!e.path.empty()) out.insert(e.path.front());
  }
  return out;
}

std::set<std::string> ev2_executables(const ScanReport& r) {
  std::set<std::string> out;
  for (const auto& e : r.ev2) {
    if (!e.path.empty()) out.insert(e.path.front());
  }
  return out;
}

std::set<std::string> ev3_executables(const ScanReport& r, Phase3Status status) {
  std::set<std::string> out;
  for (const auto& v : r.ev3) {
    if (v.status == status) out.insert(v.executable);
  }
  return out;
}

ReportSummary summarize(const ScanReport& r) {
  const auto in1 = ev1_executables(r);
  const auto in2 = ev2_executables(r);
  std::map<std::string, const Phase3Verdict*> verdicts;
  for (const auto& v : r.ev3) verdicts[v.executable] = &v;

  ReportSummary s;
  for (const auto& exec : r.executables) {
    ExecutableSummary e{exec};
    if (!in1.count(exec)) {
      e.eliminated_at = 1;
    } else if (r.phase_completed >= 2 && !in2.count(exec)) {
      e.eliminated_at = 2;
    } else if (r.phase_completed >= 3) {
      auto it = verdicts.find(exec);
      const Phase3Verdict* v = it == verdicts.end() ? nullptr : it->second;
      if (v && v->status == Phase3Status::kQvProven) {
        e.classification = Classification::kQvProven;
        e.trace_length = v->trace ? v->trace->steps.size() : 0;
      } else if (v && v->status == Phase3Status::kNeedsReview) {
        e.classification = Classification::kNeedsReview;
      } else {
        e.eliminated_at = 3;
      }
    } else {
      e.classification = Classification::kQvSuspected;
    }
    switch (e.classification) {
      case Classification::kQvProven: ++s.qv_proven; break;
      case Classification::kQvSuspected: ++s.qv_suspected; break;
      case Classification::kNeedsReview: ++s.needs_review; break;
      case Classification::kNotQv: ++s.not_qv; break;
    }
    s.executables.push_back(std::move(e));
  }
  s.flagged = s.qv_suspected + s.needs_review;
  if (!s.executables.empty()) {
    s.workload_reduction = 1.0 - static_cast<double>(s.flagged) / static_cast<double>(s.executables.size());
  }
  return s;
}

namespace {

ojson ev2_json(const Ev2Entry& e) {
  ojson j;
  j["path"] = e.path;
  j["QV_apis"] = e.qv_apis;
  ojson by = ojson::object();
  for (const auto& [name, apis] : e.qv_apis_by_descriptor) by[name] = apis;
  j["QV_apis_by_descriptor"] = by;
  return j;
}

Ev2Entry ev2_from(const ojson& j) {
  Ev2Entry e;
  e.path = j.at("path").get<std::vector<std::string>>();
  e.qv_apis = j.at("QV_apis").get<std::vector<std::string>>();
  for (const auto& [name, apis] : j.at("QV_apis_by_descriptor").items()) {
    e.qv_apis_by_descriptor[name] = apis.get<std::vector<std::string>>();
  }
  return e;
}

Phase3Status status_from(const std::string& s) {
  if (s == "qv-proven") return Phase3Status::kQvProven;
  if (s == "needs-review") return Phase3Status::kNeedsReview;
  if (s == "non-qv") return Phase3Status::kNonQv;
  throw ReportParseError("unknown EV_3 status: " + s);
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", x * 100.0);
  return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string render_json(const ScanReport& r) {
  const auto summary = summarize(r);
  ojson j;
  j["schema_version"] = r.schema_version;
  j["tool_version"] = r.tool_version;
  j["inputs"] = {{"paths", r.input_paths}, {"descriptors", r.descriptor_path}};
  j["phase_completed"] = r.phase_completed;
  j["conservative"] = r.conservative;
  j["evidence_mode"] = {{"all_paths", r.evidence_mode.all_paths}, {"cutoff", r.evidence_mode.cutoff}};
  ojson warnings = ojson::array();
  for (const auto& w : r.warnings) warnings.push_back({{"kind", w.kind}, {"path", w.path}, {"message", w.message}});
  j["warnings"] = warnings;
  j["executables"] = r.executables;

  ojson ev1 = ojson::array();
  for (const auto& e : r.ev1) ev1.push_back({{"path", e.path}});
  j["EV_1"] = ev1;
  if (r.phase_completed >= 2) {
    ojson ev2 = ojson::array();
    for (const auto& e : r.ev2) ev2.push_back(ev2_json(e));
    j["EV_2"] = ev2;
  }
  if (r.phase_completed >= 3) {
    ojson ev3 = ojson::array();
    for (const auto& v : r.ev3) {
      ojson entry;
      entry["executable"] = v.executable;
      entry["status"] = to_string(v.status);
      if (v.trace) {
        ojson steps = ojson::array();
        for (const auto& s : v.trace->steps) steps.push_back({s.file, s.function});
        entry["static-trace"] = steps;
      }
      if (v.ev2) entry["EV_2"] = ev2_json(*v.ev2);
      ev3.push_back(entry);
    }
    j["EV_3"] = ev3;
  }

  ojson per_exec = ojson::array();
  for (const auto& e : summary.executables) {
    ojson item{{"path", e.path}, {"classification", to_string(e.classification)}};
    if (e.eliminated_at) item["eliminated_at_phase"] = e.eliminated_at;
    if (e.trace_length) item["trace_length"] = e.trace_length;
    per_exec.push_back(item);
  }
  ojson counts;
  counts["scanned"] = r.executables.size();
  counts["EV_1"] = r.ev1.size();
  if (r.phase_completed >= 2) counts["EV_2"] = r.ev2.size();
  if (r.phase_completed >= 3) counts["EV_3"] = r.ev3.size();
  counts["qv_proven"] = summary.qv_proven;
  counts["qv_suspected"] = summary.qv_suspected;
  counts["needs_review"] = summary.needs_review;
  counts["not_qv"] = summary.not_qv;
  counts["flagged"] = summary.flagged;
  j["summary"] = {{"executables", per_exec}, {"counts", counts}, {"workload_reduction", summary.workload_reduction}};
  return j.dump(2) + "\n";
}

ScanReport parse_report(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    ScanReport r;
    r.schema_version = j.at("schema_version").get<std::string>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.input_paths = j.at("inputs").at("paths").get<std::vector<std::string>>();
    r.descriptor_path = j.at("inputs").at("descriptors").get<std::string>();
    r.phase_completed = j.at("phase_completed").get<int>();
    r.conservative = j.at("conservative").get<bool>();
    r.evidence_mode.all_paths = j.at("evidence_mode").at("all_paths").get<bool>();
    r.evidence_mode.cutoff = j.at("evidence_mode").at("cutoff").get<size_t>();
    for (const auto& w : j.at("warnings")) {
      r.warnings.push_back({w.at("kind").get<std::string>(), w.at("path").get<std::string>(),
                            w.at("message").get<std::string>()});
    }
    r.executables = j.at("executables").get<std::vector<std::string>>();
    for (const auto& e : j.at("EV_1")) r.ev1.push_back({e.at("path").get<std::vector<std::string>>()});
    if (j.contains("EV_2")) {
      for (const auto& e : j.at("EV_2")) r.ev2.push_back(ev2_from(e));
    }
    if (j.contains("EV_3")) {
      for (const auto& e : j.at("EV_3")) {
        Phase3Verdict v;
        v.executable = e.at("executable").get<std::string>();
        v.status = status_from(e.at("status").get<std::string>());
        if (e.contains("static-trace")) {
          StaticTrace t;
          for (const auto& s : e.at("static-trace")) t.steps.push_back({s.at(0).get<std::string>(), s.at(1).get<std::string>()});
          v.trace = std::move(t);
        }
        if (e.contains("EV_2")) v.ev2 = ev2_from(e.at("EV_2"));
        r.ev3.push_back(std::move(v));
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ReportParseError(e.what());
  }
}

std::string render_text(const ScanReport& r) {
  const auto summary = summarize(r);
  std::map<std::string, const Phase3Verdict*> verdicts;
  for (const auto& v : r.ev3) verdicts[v.executable] = &v;
  std::map<std::string, const Ev2Entry*> first_ev2;
  for (const auto& e : r.ev2) first_ev2.emplace(e.path.front(), &e);
  std::map<std::string, const Ev1Entry*> first_ev1;
  for (const auto& e : r.ev1) first_ev1.emplace(e.path.front(), &e);

  std::ostringstream os;
  os << "qvscan " << r.tool_version << ": phase " << r.phase_completed << (r.conservative ? " (conservative)" : "")
     << ", " << r.executables.size() << " executable(s)\n\n";
  for (const auto& e : summary.executables) {
    os << e.path << "  ";
    switch (e.classification) {
      case Classification::kQvProven: {
        const auto& steps = verdicts.at(e.path)->trace->steps;
        std::vector<std::string> fns;
        for (const auto& s : steps) fns.push_back(s.function);
        os << "QV-proven  trace length " << steps.size() << ": " << join(fns, " -> ");
        break;
      }
      case Classification::kNeedsReview: {
        const auto& ev2 = *verdicts.at(e.path)->ev2;
        os << "needs-review  EV_2 " << join(ev2.path, " -> ") << " [" << join(ev2.qv_apis, ", ") << "]";
        break;
      }
      case Classification::kQvSuspected:
        if (auto it = first_ev2.find(e.path); it != first_ev2.end()) {
          os << "QV-suspected  EV_2 " << join(it->second->path, " -> ") << " [" << join(it->second->qv_apis, ", ")
             << "]";
        } else {
          os << "QV-suspected  EV_1 " << join(first_ev1.at(e.path)->path, " -> ");
        }
        break;
      case Classification::kNotQv:
        os << "not-QV (phase " << e.eliminated_at << ")";
        break;
    }
    os << "\n";
  }

  os << "\nwarnings (" << r.warnings.size() << ")\n";
  for (const auto& w : r.warnings) os << "  " << w.kind << "  " << w.path << "  " << w.message << "\n";

  os << "\nQV-proven " << summary.qv_proven << ", QV-suspected " << summary.qv_suspected << ", needs-review "
     << summary.needs_review << ", not-QV " << summary.not_qv << "; flagged " << summary.flagged
     << ", workload reduction " << percent(summary.workload_reduction) << "\n";
  return os.str();
}

}  // namespace qvscan
