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

#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "qvscan/report.h"
#include "qvscan/scan.h"
#include "test_support.h"

using namespace qvscan;
using namespace qvscan::testing;
using json = nlohmann::ordered_json;

namespace {

const ScanReport& corpus_report(int phase, bool conservative) {
  static std::map<std::pair<int, bool>, ScanReport> reports;
  auto key = std::make_pair(phase, conservative);
  if (!reports.count(key)) reports[key] = scan(corpus_scan_config(phase, conservative));
  return reports[key];
}

std::vector<std::string> keys_of(const json& j) {
  std::vector<std::string> out;
  for (const auto& [k, v] : j.items()) out.push_back(k);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("JSON round trip") {
  for (int phase = 1; phase <= 3; ++phase) {
    for (bool cons : {false, true}) {
      CAPTURE(phase);
      CAPTURE(cons);
      const auto& r = corpus_report(phase, cons);
      const auto text = render_json(r);
      const auto back = parse_report(text);
      CHECK(back == r);
      CHECK(render_json(back) == text);
    }
  }
}

TEST_CASE("top-level layout") {
  const auto j3 = json::parse(render_json(corpus_report(3, false)));
  CHECK(keys_of(j3) == std::vector<std::string>{"schema_version", "tool_version", "inputs", "phase_completed",
                                                "conservative", "evidence_mode", "warnings", "executables", "EV_1",
                                                "EV_2", "EV_3", "summary"});
  CHECK(j3["schema_version"] == "1.0");
  CHECK(j3["phase_completed"] == 3);

  const auto j1 = json::parse(render_json(corpus_report(1, false)));
  CHECK_FALSE(j1.contains("EV_2"));
  CHECK_FALSE(j1.contains("EV_3"));
  const auto j2 = json::parse(render_json(corpus_report(2, false)));
  CHECK(j2.contains("EV_2"));
  CHECK_FALSE(j2.contains("EV_3"));
}

TEST_CASE("evidence entry shapes") {
  const auto j = json::parse(render_json(corpus_report(3, true)));
  for (const auto& e : j["EV_1"]) {
    CHECK(keys_of(e) == std::vector<std::string>{"path"});
    CHECK(e["path"].is_array());
  }
  for (const auto& e : j["EV_2"]) {
    CHECK(e.contains("path"));
    CHECK(e["QV_apis"].is_array());
    CHECK(e["QV_apis_by_descriptor"].is_object());
  }
  size_t traces = 0;
  for (const auto& e : j["EV_3"]) {
    CHECK(e["executable"].is_string());
    if (e["status"] == "qv-proven") {
      ++traces;
      REQUIRE(e.contains("static-trace"));
      for (const auto& step : e["static-trace"]) {
        REQUIRE(step.is_array());
        CHECK(step.size() == 2);
      }
    } else {
      CHECK_FALSE(e.contains("static-trace"));
    }
    CHECK(e.contains("EV_2") == (e["status"] == "needs-review"));
  }
  CHECK(traces == 8);
}

TEST_CASE("summary counts match the evidence") {
  for (int phase = 1; phase <= 3; ++phase) {
    for (bool cons : {false, true}) {
      CAPTURE(phase);
      CAPTURE(cons);
      const auto& r = corpus_report(phase, cons);
      const auto s = summarize(r);
      const auto j = json::parse(render_json(r));
      const auto& counts = j["summary"]["counts"];
      CHECK(counts["scanned"] == r.executables.size());
      CHECK(counts["EV_1"] == j["EV_1"].size());
      if (phase >= 2) CHECK(counts["EV_2"] == j["EV_2"].size());
      if (phase == 3) CHECK(counts["EV_3"] == j["EV_3"].size());
      CHECK(s.qv_proven + s.qv_suspected + s.needs_review + s.not_qv == r.executables.size());
      CHECK(s.flagged == s.qv_suspected + s.needs_review);
      CHECK(s.executables.size() == r.executables.size());
      if (phase == 1) CHECK(s.qv_suspected == ev1_executables(r).size());
      if (phase == 2) CHECK(s.qv_suspected == ev2_executables(r).size());
      if (phase == 3) {
        CHECK(s.qv_proven == ev3_executables(r, Phase3Status::kQvProven).size());
        CHECK(s.needs_review == ev3_executables(r, Phase3Status::kNeedsReview).size());
        CHECK(s.qv_suspected == 0);
      }
    }
  }
}

TEST_CASE("per-executable classification") {
  const auto s = summarize(corpus_report(3, false));
  std::map<std::string, ExecutableSummary> by;
  for (const auto& e : s.executables) by[e.path] = e;
  CHECK(by[corpus_bin("app_no_crypto")].eliminated_at == 1);
  CHECK(by[corpus_bin("app_direct_sha512")].eliminated_at == 2);
  CHECK(by[corpus_bin("app_dead_code")].eliminated_at == 3);
  CHECK(by[corpus_bin("app_dead_code")].classification == Classification::kNotQv);
  CHECK(by[corpus_bin("app_direct_rsa")].classification == Classification::kQvProven);
  CHECK(by[corpus_bin("app_direct_rsa")].trace_length == 4);
  CHECK(by[corpus_bin("app_indirect_rsa")].trace_length == 6);

  const auto s2 = summarize(corpus_report(2, false));
  for (const auto& e : s2.executables) {
    CHECK((e.classification == Classification::kQvSuspected || e.classification == Classification::kNotQv));
  }
  CHECK(to_string(Classification::kQvSuspected) == "QV-suspected");
}

TEST_CASE("text rendering") {
  const auto text = render_text(corpus_report(3, false));
  const auto lines = lines_of(text);
  auto line_for = [&](const std::string& path) {
    for (const auto& l : lines) {
      if (l.rfind(path + " ", 0) == 0) return l;
    }
    return std::string();
  };
  const auto proven = line_for(corpus_bin("app_direct_rsa"));
  CHECK(proven.find("QV-proven") != std::string::npos);
  CHECK(proven.find("trace length 4") != std::string::npos);
  CHECK(line_for(corpus_bin("app_direct_sha512")).find("not-QV (phase 2)") != std::string::npos);
  CHECK(line_for(corpus_bin("app_no_crypto")).find("not-QV (phase 1)") != std::string::npos);
  CHECK(line_for(corpus_bin("app_dead_code")).find("not-QV (phase 3)") != std::string::npos);
  // libc is unresolved in the hermetic scan.
  CHECK(text.find("warnings (") != std::string::npos);
  CHECK(text.find("unresolved-dependency") != std::string::npos);

  const auto cons = render_text(corpus_report(3, true));
  CHECK(cons.find("needs-review") != std::string::npos);
  const auto p2 = render_text(corpus_report(2, false));
  CHECK(p2.find("QV-suspected") != std::string::npos);
}

TEST_CASE("empty scan") {
  auto cfg = corpus_scan_config(3, false);
  cfg.input_paths = {corpus_bin("app_no_crypto")};
  const auto r = scan(cfg);
  const auto j = json::parse(render_json(r));
  CHECK(j["EV_1"] == json::array());
  CHECK(j["EV_2"] == json::array());
  CHECK(j["EV_3"] == json::array());
  CHECK(j["tool_version"].is_string());
  CHECK(j["inputs"]["paths"].size() == 1);
  CHECK(j["summary"]["workload_reduction"] == 1.0);
  CHECK(parse_report(j.dump()) == r);
}

TEST_CASE("rendering is byte-stable") {
  const auto& r = corpus_report(3, true);
  CHECK(render_json(r) == render_json(r));
  CHECK(render_text(r) == render_text(r));
  const auto text = render_json(r);
  CHECK(text.find("\n  \"schema_version\"") != std::string::npos);
}

TEST_CASE("malformed reports are rejected") {
  for (const char* bad : {"", "[]", "{}", R"({"schema_version": "1.0"})"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_report(bad), ReportParseError);
  }
  auto j = json::parse(render_json(corpus_report(3, false)));
  j["EV_3"][0]["status"] = "maybe";
  CHECK_THROWS_AS(parse_report(j.dump()), ReportParseError);
}
