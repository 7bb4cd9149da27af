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
#include "qvscan/eval.h"
#include "qvscan/scan.h"
#include "test_support.h"

using namespace qvscan;
using namespace qvscan::testing;
using json = nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

std::string quoted(const std::string& s) { return "'" + s + "'"; }

std::string cli(const std::string& args) { return quoted(QVSCAN_CLI) + " " + args; }

std::string corpus_args() {
  return "--no-system-paths -L " + quoted((corpus_dir() / "lib").string()) + " -d " + quoted(corpus_descs());
}

}  // namespace

TEST_CASE("exit code contract") {
  std::ostringstream out, err;
  auto cfg = corpus_scan_config(1);
  cfg.input_paths = {corpus_bin("app_no_crypto")};
  CHECK(run_scan(cfg, out, err) == 0);
  const auto j = json::parse(out.str());
  CHECK(j["EV_1"] == json::array());

  std::ostringstream out3, err3;
  CHECK(run_scan(corpus_scan_config(3), out3, err3) == 1);
  CHECK_FALSE(json::parse(out3.str())["EV_3"].empty());

  // Everything cleared by phase 3 in normal mode.
  std::ostringstream out4, err4;
  cfg = corpus_scan_config(3);
  cfg.input_paths = {corpus_bin("app_dead_code"), corpus_bin("app_indirect_aes256")};
  CHECK(run_scan(cfg, out4, err4) == 0);
  cfg.conservative = true;
  CHECK(run_scan(cfg, out4, err4) == 1);

  std::ostringstream out5, err5;
  cfg = corpus_scan_config(3);
  cfg.desc_path = "/nonexistent/descs.json";
  CHECK(run_scan(cfg, out5, err5) == 2);
  CHECK(out5.str().empty());
  CHECK_FALSE(err5.str().empty());

  cfg = corpus_scan_config(3);
  cfg.input_paths = {"/nonexistent/bin"};
  CHECK(run_scan(cfg, out5, err5) == 2);
  cfg = corpus_scan_config(3);
  cfg.max_phase = 4;
  CHECK(run_scan(cfg, out5, err5) == 2);
  cfg = corpus_scan_config(3);
  cfg.jobs = 0;
  CHECK(run_scan(cfg, out5, err5) == 2);
}

TEST_CASE("each phase limit embeds only its own evidence") {
  const auto r1 = scan(corpus_scan_config(1));
  const auto r2 = scan(corpus_scan_config(2));
  const auto r3 = scan(corpus_scan_config(3));
  CHECK(r1.phase_completed == 1);
  CHECK(r1.ev2.empty());
  CHECK(r1.ev3.empty());
  CHECK(r2.phase_completed == 2);
  CHECK(r2.ev3.empty());
  CHECK(r1.ev1 == r3.ev1);
  CHECK(r2.ev2 == r3.ev2);
}

TEST_CASE("input enumeration") {
  TempDir dir;
  fs::create_directories(dir / "sub");
  fs::copy_file(corpus_bin("app_direct_rsa"), dir / "sub" / "copy");
  fs::create_symlink(corpus_bin("app_fnptr"), dir / "link_to_file");
  fs::create_directory_symlink(corpus_dir() / "bin", dir / "link_to_dir");
  fs::copy_file(corpus_lib("libmid.so"), dir / "libmid.so");
  write_file(dir / "readme.txt", "hello\n");

  BinaryCache cache;
  std::vector<Warning> warnings;
  const auto found = enumerate_inputs({dir.path().string()}, cache, warnings);
  CHECK(found == std::vector<fs::path>{canonical_id(corpus_bin("app_fnptr")), canonical_id(dir / "sub" / "copy")});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].kind == "non-elf");

  // A file given directly is taken as is; a missing path is a config error.
  warnings.clear();
  CHECK(enumerate_inputs({corpus_bin("app_two_api")}, cache, warnings).size() == 1);
  CHECK_THROWS_AS(enumerate_inputs({(dir / "missing").string()}, cache, warnings), ConfigError);
}

TEST_CASE("every file is parsed and every callgraph built at most once") {
  ScanStats stats;
  const auto r = scan(corpus_scan_config(3, true), &stats);
  // 15 executables + 2 libraries.
  CHECK(stats.parses == r.executables.size() + 2);
  CHECK(stats.callgraph_constructions == stats.callgraph_constructions_by_file.size());
  for (const auto& [file, n] : stats.callgraph_constructions_by_file) CHECK(n == 1);
}

TEST_CASE("worker count does not change the report") {
  auto cfg = corpus_scan_config(3, true);
  const auto serial = render_json(scan(cfg));
  cfg.jobs = 8;
  CHECK(render_json(scan(cfg)) == serial);
  cfg.evidence_mode = {true, 5};
  const auto all1 = render_json(scan(cfg));
  cfg.jobs = 1;
  CHECK(render_json(scan(cfg)) == all1);
}

TEST_CASE("command line") {
  const auto bin = quoted((corpus_dir() / "bin").string());
  {
    const auto r = run_with_status(cli("-i " + bin + " " + corpus_args()));
    CHECK(r.status == 1);
    const auto j = json::parse(r.out);
    CHECK(j["phase_completed"] == 3);
    CHECK(j["conservative"] == false);
  }
  {
    const auto r = run_with_status(cli("-i " + quoted(corpus_bin("app_no_crypto")) + " -p 1 " + corpus_args()));
    CHECK(r.status == 0);
    CHECK(json::parse(r.out)["EV_1"].empty());
  }
  {
    const auto r = run_with_status(cli("-i " + bin + " -c -f text " + corpus_args()));
    CHECK(r.status == 1);
    CHECK(r.out.find("needs-review") != std::string::npos);
  }
  {
    TempDir dir;
    const auto out = dir / "report.json";
    const auto dot = dir / "cg.dot";
    const auto r = run_with_status(cli("-i " + bin + " -j 4 --all-paths=3 -o " + quoted(out.string()) +
                                       " --dump-callgraph " + quoted(dot.string()) + " " + corpus_args()));
    CHECK(r.status == 1);
    CHECK(r.out.empty());
    const auto j = json::parse(read_file(out));
    CHECK(j["evidence_mode"]["all_paths"] == true);
    CHECK(j["evidence_mode"]["cutoff"] == 3);
    CHECK(read_file(dot).find("digraph") != std::string::npos);
  }
  CHECK(run_with_status(cli("-i " + bin + " -d /nonexistent.json")).status == 2);
  CHECK(run_with_status(cli("-i " + bin + " -p 4 " + corpus_args())).status == 2);
  CHECK(run_with_status(cli("-i " + bin + " -j 0 " + corpus_args())).status == 2);
  CHECK(run_with_status(cli("-i " + bin + " -f xml " + corpus_args())).status == 2);
  CHECK(run_with_status(cli(corpus_args())).status == 2);
  CHECK(run_with_status(cli("-i /nonexistent " + corpus_args())).status == 2);
  const auto v = run_with_status(cli("--version"));
  CHECK(v.status == 0);
  CHECK(v.out.find(QVSCAN_VERSION) != std::string::npos);
}

TEST_CASE("evaluation command line") {
  TempDir dir;
  const auto report = dir / "r.json";
  const auto bin = quoted((corpus_dir() / "bin").string());
  REQUIRE(run_with_status(cli("-i " + bin + " -c -o " + quoted(report.string()) + " " + corpus_args())).status == 1);
  const std::string eval = quoted(QVSCAN_EVAL_CLI);
  const std::string manifest = quoted((corpus_dir() / "manifest.json").string());
  const auto table = run_with_status(eval + " --report " + quoted(report.string()) + " --manifest " + manifest + " -c");
  CHECK(table.status == 0);
  for (const char* row : {"P1", "P2", "P3", "P3-conservative"}) CHECK(table.out.find(row) != std::string::npos);

  const auto js = run_with_status(eval + " --report " + quoted(report.string()) + " --manifest " + manifest +
                                  " -c -f json");
  CHECK(js.status == 0);
  CHECK_NOTHROW(json::parse(js.out));
  CHECK(run_with_status(eval + " --report /nonexistent --manifest " + manifest).status == 2);
}
