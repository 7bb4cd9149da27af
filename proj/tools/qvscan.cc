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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qvscan/scan.h"

int main(int argc, char** argv) {
  qvscan::CliConfig cfg;
  std::string format = "json";
  std::string all_paths;

  CLI::App app{"Finds executables that can reach quantum-vulnerable crypto APIs in shared libraries."};
  app.set_version_flag("--version", QVSCAN_VERSION);
  app.add_option("-i,--input", cfg.input_paths, "Executable file or directory to scan (repeatable)")->required();
  app.add_option("-d,--descs", cfg.desc_path, "Crypto library descriptor file (JSON)")->required();
  app.add_option("-p,--phase", cfg.max_phase, "Last phase to run")->check(CLI::Range(1, 3))->capture_default_str();
  app.add_flag("-c,--conservative", cfg.conservative, "Report trace-less phase-2 hits as needs-review");
  app.add_option("-L,--search-path", cfg.search_paths, "Library directory searched before the system ones (repeatable)");
  app.add_flag("!--no-system-paths", cfg.system_search_paths, "Do not search the standard loader directories");
  app.add_option("--all-paths", all_paths, "Report every simple dependency path, at most CUTOFF per library pair")
      ->expected(0, 1)
      ->type_name("CUTOFF");
  app.add_option("-o,--output", cfg.output, "Report file (default: stdout)");
  app.add_option("-f,--format", format, "Report format")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  app.add_option("-j,--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--dump-callgraph", cfg.dump_callgraph, "Write the callgraphs built during the scan as DOT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (app.count("--all-paths") > 0) {
    cfg.evidence_mode.all_paths = true;
    if (!all_paths.empty()) {
      try {
        cfg.evidence_mode.cutoff = std::stoul(all_paths);
      } catch (const std::exception&) {
        std::cerr << "qvscan: --all-paths expects a positive integer cutoff\n";
        return 2;
      }
    }
  }
  cfg.format = format == "text" ? qvscan::OutputFormat::kText : qvscan::OutputFormat::kJson;
  return qvscan::run_scan(cfg, std::cout, std::cerr);
}
