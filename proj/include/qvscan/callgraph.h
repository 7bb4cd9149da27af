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
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qvscan/elf_reader.h"
#include "qvscan/x86_decoder.h"

namespace qvscan {

class CallgraphUnsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Functions as nodes, direct invocations as edges. Node ids are symbol
// names, imported names for PLT/GOT targets, or "sub_<hex>" otherwise.
class Callgraph {
 public:
  void add_node(const std::string& id, std::optional<uint64_t> address = std::nullopt);
  void add_edge(const std::string& caller, const std::string& callee);
  // `alias` names the same function as `id`; lookups accept either.
  void add_alias(const std::string& alias, const std::string& id);

  const std::set<std::string>& nodes() const { return nodes_; }
  // Canonical id for a node id or alias.
  std::optional<std::string> resolve(const std::string& name) const;
  bool has_node(const std::string& name) const { return resolve(name).has_value(); }
  bool has_edge(const std::string& caller, const std::string& callee) const;
  const std::set<std::string>& successors(const std::string& id) const;
  std::optional<uint64_t> address_of(const std::string& name) const;
  std::vector<std::pair<std::string, std::string>> edges() const;
  size_t edge_count() const;

  std::optional<std::string> main_id;

  friend bool operator==(const Callgraph&, const Callgraph&) = default;

 private:
  std::set<std::string> nodes_;
  std::map<std::string, std::set<std::string>> succ_;
  std::map<std::string, std::string> aliases_;
  std::map<std::string, uint64_t> addresses_;
};

std::string synthesized_id(uint64_t address);

// Throws CallgraphUnsupported for machines without a decoder or files
// without code. Pass `decoder` to override the machine default.
Callgraph gen_callgraph(const BinaryFile& b, const InstructionDecoder* decoder = nullptr);

enum class MainMethod { kSymbol, kEntryStub, kEntryPoint };

struct MainLocation {
  std::string id;
  uint64_t address = 0;
  MainMethod method = MainMethod::kSymbol;
};

std::string to_string(MainMethod m);

// "main" if the symbol exists; else the address handed to the C runtime by
// the entry stub; else the entry point itself. Throws std::invalid_argument
// for shared objects.
MainLocation get_main_address(const BinaryFile& b, const InstructionDecoder* decoder = nullptr);

// Shortest path by BFS, neighbors in lexicographic order. `from` and `to`
// may be aliases; the returned path starts with `from` as given.
std::optional<std::vector<std::string>> reachable_path(const Callgraph& cg, const std::string& from,
                                                       const std::string& to);

std::string to_dot(const Callgraph& cg, const std::string& label = "callgraph");

}  // namespace qvscan
