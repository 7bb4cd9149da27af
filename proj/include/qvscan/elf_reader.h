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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qvscan {

// Raised when an ELF file's headers or tables are inconsistent. `structure()`
// names the offending table (e.g. "section header table", ".dynsym").
class ElfParseError : public std::runtime_error {
 public:
  ElfParseError(std::string structure, const std::string& detail)
      : std::runtime_error(structure + ": " + detail), structure_(std::move(structure)) {}

  const std::string& structure() const { return structure_; }

 private:
  std::string structure_;
};

enum class BinaryKind { kExecutable, kSharedObject };

struct FunctionSymbol {
  std::string name;
  uint64_t address = 0;
  uint64_t size = 0;
  // Other names bound to the same address (symbol aliases).
  std::vector<std::string> aliases;
};

struct CodeSection {
  std::string name;
  uint64_t address = 0;
  std::vector<uint8_t> bytes;

  uint64_t end() const { return address + bytes.size(); }
  bool contains(uint64_t addr) const { return addr >= address && addr < end(); }
};

// Static facts extracted from one ELF file. Immutable after parse_elf().
struct BinaryFile {
  std::filesystem::path path;
  BinaryKind kind = BinaryKind::kExecutable;
  uint16_t machine = 0;
  std::optional<std::string> soname;
  // DT_NEEDED entries, in dynamic-section order.
  std::vector<std::string> needed;
  // DT_RUNPATH entries when present, DT_RPATH entries otherwise. Unexpanded.
  std::vector<std::string> runpath;
  std::set<std::string> exported_syms;
  std::set<std::string> imported_syms;
  // Sorted by address, one entry per address.
  std::vector<FunctionSymbol> func_syms;
  std::vector<CodeSection> code_sections;
  // PLT stub address -> imported symbol name.
  std::map<uint64_t, std::string> plt_map;
  // PLT stub address -> symbol defined in this file (calls that stay
  // interposable, typical for -fPIC libraries calling their own exports).
  std::map<uint64_t, std::string> plt_local_map;
  // GOT slot address -> function symbol name, for `call *slot(%rip)` sites.
  std::map<uint64_t, std::string> got_map;
  uint64_t entry_point = 0;

  bool is_x86_64() const;
  const CodeSection* section_containing(uint64_t addr) const;
  const FunctionSymbol* function_at(uint64_t addr) const;
  const FunctionSymbol* function_named(std::string_view name) const;
};

struct ResolutionConfig {
  std::vector<std::filesystem::path> search_paths;
  bool follow_runpath = true;
  bool strip_symbol_versions = true;
};

// Standard loader directories for x86-64 Linux, used when a caller supplies none.
std::vector<std::filesystem::path> default_search_paths();

// True iff `path` starts with the ELF magic and is 64-bit little-endian.
// Unreadable files yield false.
bool is_elf(const std::filesystem::path& path);

// Throws ElfParseError on malformed input and std::system_error on I/O failure.
BinaryFile parse_elf(const std::filesystem::path& path, bool strip_symbol_versions = true);

// Parses an in-memory image; `path` is recorded verbatim.
BinaryFile parse_elf_bytes(std::vector<uint8_t> bytes, const std::filesystem::path& path,
                           bool strip_symbol_versions = true);

// Searches the depending file's runpath (with $ORIGIN expanded against
// `origin`'s directory) and then cfg.search_paths for a regular file named
// `soname`. Returns the first hit, canonicalized.
std::optional<std::filesystem::path> resolve_dependency(std::string_view soname,
                                                        const ResolutionConfig& cfg,
                                                        const BinaryFile& origin);

std::optional<std::filesystem::path> resolve_dependency(std::string_view soname,
                                                        const ResolutionConfig& cfg,
                                                        const std::filesystem::path& origin,
                                                        const std::vector<std::string>& runpath);

std::string strip_version(std::string_view symbol);

}  // namespace qvscan
