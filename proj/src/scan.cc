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

#include "qvscan/scan.h"

#include <fstream>
#include <iostream>
#include <set>

namespace qvscan {

namespace fs = std::filesystem;

namespace {

void consider_file(const fs::path& path, BinaryCache& cache, std::set<std::string>& found,
                   std::vector<Warning>& warnings) {
  const std::string id = canonical_id(path);
  if (!is_elf(id)) {
    warnings.push_back({"non-elf", id, "skipped: not a 64-bit little-endian ELF file"});
    return;
  }
  auto entry = cache.get(id);
  if (!entry.binary) {
    warnings.push_back({"parse-error", id, entry.error});
    return;
  }
  if (entry.binary->kind == BinaryKind::kExecutable) found.insert(id);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("cannot write " + path);
}

}  // namespace

std::vector<fs::path> enumerate_inputs(const std::vector<std::string>& inputs, BinaryCache& cache,
                                       std::vector<Warning>& warnings) {
  std::set<std::string> found;
  for (const auto& input : inputs) {
    std::error_code ec;
    const auto status = fs::status(input, ec);
    if (ec || !fs::exists(status)) throw ConfigError("input path does not exist: " + input);
    if (fs::is_regular_file(status)) {
      consider_file(input, cache, found, warnings);
      continue;
    }
    if (!fs::is_directory(status)) throw ConfigError("input is neither a file nor a directory: " + input);

    fs::recursive_directory_iterator it(input, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw ConfigError("cannot read directory " + input + ": " + ec.message());
    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
      if (ec) {
        warnings.push_back({"unreadable", input, ec.message()});
        break;
      }
      const auto& entry = *it;
      std::error_code sec;
      if (entry.is_symlink(sec)) {
        if (fs::is_regular_file(fs::status(entry.path(), sec))) consider_file(entry.path(), cache, found, warnings);
        continue;
      }
      if (entry.is_regular_file(sec)) consider_file(entry.path(), cache, found, warnings);
    }
  }
  return {found.begin(), found.end()};
}

ScanReport scan(const CliConfig& cfg, ScanStats* stats) {
  if (cfg.max_phase < 1 || cfg.max_phase > 3) throw ConfigError("--phase must be 1, 2 or 3");
  if (cfg.jobs < 1) throw ConfigError("--jobs must be at least 1");
  if (cfg.input_paths.empty()) throw ConfigError("no input paths given");
  if (cfg.evidence_mode.all_paths && cfg.evidence_mode.cutoff == 0) throw ConfigError("--all-paths cutoff must be positive");

  std::vector<CryptoLibDescriptor> descs;
  try {
    descs = load_descriptors(cfg.desc_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  ResolutionConfig rc;
  for (const auto& p : cfg.search_paths) rc.search_paths.emplace_back(p);
  if (cfg.system_search_paths) {
    for (auto& p : default_search_paths()) rc.search_paths.push_back(std::move(p));
  }

  BinaryCache cache;
  ScanReport report;
  report.tool_version = QVSCAN_VERSION;
  for (const auto& p : cfg.input_paths) report.input_paths.push_back(canonical_id(p));
  report.descriptor_path = canonical_id(cfg.desc_path);
  report.conservative = cfg.conservative;
  report.evidence_mode = cfg.evidence_mode;

  const auto execs = enumerate_inputs(cfg.input_paths, cache, report.warnings);
  for (const auto& e : execs) report.executables.push_back(e.string());

  auto p1 = phase1(execs, descs, rc, cache, cfg.evidence_mode, cfg.jobs);
  report.phase_completed = 1;
  report.ev1 = p1.ev1;
  report.warnings.insert(report.warnings.end(), p1.warnings.begin(), p1.warnings.end());

  CallgraphCache cgs;
  if (cfg.max_phase >= 2) {
    auto p2 = phase2(p1.graph, p1.executables, p1.crypto_libs, cfg.evidence_mode);
    report.phase_completed = 2;
    report.ev2 = p2.ev2;
    if (cfg.max_phase >= 3) {
      auto p3 = phase3(p2.graph, p2.ev2, cfg.conservative, cgs, cfg.jobs);
      report.phase_completed = 3;
      report.ev3 = std::move(p3.verdicts);
      report.warnings.insert(report.warnings.end(), p3.warnings.begin(), p3.warnings.end());
    }
  }
  sort_unique(report.warnings);

  if (!cfg.dump_callgraph.empty()) {
    if (cgs.graphs().empty()) {
      parallel_for(execs.size(), cfg.jobs, [&](size_t i) {
        FileNode node;
        node.id = execs[i].string();
        node.binary = cache.get(node.id).binary;
        cgs.get(node);
      });
    }
    std::string dot;
    for (const auto& [id, graph] : cgs.graphs()) dot += to_dot(*graph, id);
    write_file(cfg.dump_callgraph, dot);
  }

  if (stats) {
    stats->parses = cache.parse_count();
    stats->callgraph_constructions = cgs.constructions();
    stats->callgraph_constructions_by_file = cgs.construction_counts();
  }
  return report;
}

int exit_code_for(const ScanReport& r) {
  const auto s = summarize(r);
  return s.qv_proven + s.qv_suspected + s.needs_review > 0 ? 1 : 0;
}

int run_scan(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto report = scan(cfg);
    const std::string text = cfg.format == OutputFormat::kJson ? render_json(report) : render_text(report);
    if (cfg.output.empty()) {
      out << text;
      out.flush();
    } else {
      write_file(cfg.output, text);
    }
    return exit_code_for(report);
  } catch (const std::exception& e) {
    err << "qvscan: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qvscan
