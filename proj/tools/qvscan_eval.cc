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

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "qvscan/eval.h"

int main(int argc, char** argv) {
  std::string report_path;
  std::string manifest_path;
  std::string format = "table";
  bool conservative = false;

  CLI::App app{"Scores a qvscan JSON report against a ground-truth manifest."};
  app.add_option("-r,--report", report_path, "JSON report written by qvscan")->required()->check(CLI::ExistingFile);
  app.add_option("-m,--manifest", manifest_path, "Ground-truth manifest")->required()->check(CLI::ExistingFile);
  app.add_flag("-c,--conservative", conservative, "Also score phase 3 in conservative mode");
  app.add_option("-f,--format", format, "Output format")->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::ifstream in(report_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto report = qvscan::parse_report(ss.str());
    const auto manifest = qvscan::load_manifest(manifest_path);

    std::vector<std::pair<std::string, qvscan::Metrics>> rows;
    for (int phase = 1; phase <= report.phase_completed; ++phase) {
      if (phase == 3) {
        rows.emplace_back("P3", qvscan::evaluate(report, manifest, 3, false));
        if (conservative) rows.emplace_back("P3-conservative", qvscan::evaluate(report, manifest, 3, true));
      } else {
        rows.emplace_back("P" + std::to_string(phase), qvscan::evaluate(report, manifest, phase, false));
      }
    }
    std::cout << (format == "json" ? qvscan::metrics_json(rows) : qvscan::metrics_table(rows));
    return 0;
  } catch (const qvscan::EvaluationError& e) {
    std::cerr << "qvscan-eval: " << e.what() << "\n";
    for (const auto& m : e.missing()) std::cerr << "  missing: " << m << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qvscan-eval: " << e.what() << "\n";
    return 2;
  }
}
