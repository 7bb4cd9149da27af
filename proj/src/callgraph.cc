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

#include "qvscan/callgraph.h"

#include <algorithm>
#include <deque>
#include <sstream>

namespace qvscan {

namespace {

const std::set<std::string> kNone;
constexpr uint8_t kRdi = 7;
constexpr size_t kEntryStubLimit = 64;
constexpr int kMaxDiscoveryRounds = 32;

bool ends_flow(FlowKind f) {
  return f == FlowKind::kReturn || f == FlowKind::kJump || f == FlowKind::kJumpIndirect || f == FlowKind::kTrap;
}

std::unique_ptr<InstructionDecoder> own_decoder(const BinaryFile& b, const InstructionDecoder*& decoder) {
  if (decoder != nullptr) return nullptr;
  auto owned = decoder_for_machine(b.machine);
  if (!owned) throw CallgraphUnsupported(b.path.string() + ": no instruction decoder for machine " +
                                         std::to_string(b.machine));
  decoder = owned.get();
  return owned;
}

// Code sections that hold function bodies (PLT stubs are handled by name).
std::vector<const CodeSection*> body_sections(const BinaryFile& b) {
  std::vector<const CodeSection*> out;
  for (const auto& s : b.code_sections) {
    if (s.name.rfind(".plt", 0) == 0) continue;
    out.push_back(&s);
  }
  return out;
}

class Builder {
 public:
  Builder(const BinaryFile& b, const InstructionDecoder& dec) : b_(b), dec_(dec), sections_(body_sections(b)) {}

  Callgraph build(std::optional<MainLocation> main) {
    for (const auto& f : b_.func_syms) {
      if (in_body(f.address)) starts_.insert(f.address);
    }
    if (b_.kind == BinaryKind::kExecutable && in_body(b_.entry_point)) starts_.insert(b_.entry_point);
    if (main && in_body(main->address)) starts_.insert(main->address);

    for (int round = 0; round < kMaxDiscoveryRounds; ++round) {
      std::set<uint64_t> found;
      sweep([&](std::optional<uint64_t>, const Instruction& insn, bool after_end) {
        if (insn.flow == FlowKind::kCall && insn.target && in_body(*insn.target)) found.insert(*insn.target);
        if (insn.is_endbr64 && after_end) found.insert(insn.address);
      });
      const size_t before = starts_.size();
      starts_.insert(found.begin(), found.end());
      if (starts_.size() == before) break;
    }

    for (const auto& f : b_.func_syms) {
      cg_.add_node(f.name, f.address);
      for (const auto& a : f.aliases) cg_.add_alias(a, f.name);
    }
    for (uint64_t s : starts_) cg_.add_node(id_of(s), s);

    sweep([&](std::optional<uint64_t> owner, const Instruction& insn, bool) {
      if (!owner) return;
      const std::string caller = id_of(*owner);
      std::optional<std::string> callee;
      switch (insn.flow) {
        case FlowKind::kCall:
          if (insn.target) callee = target_name(*insn.target);
          break;
        case FlowKind::kJump:
        case FlowKind::kCondJump:
          if (insn.target) callee = target_name(*insn.target);
          break;
        case FlowKind::kCallIndirect:
        case FlowKind::kJumpIndirect:
          if (insn.memory_target) {
            if (auto it = b_.got_map.find(*insn.memory_target); it != b_.got_map.end()) callee = symbol_id(it->second);
          }
          break;
        default:
          break;
      }
      if (!callee || *callee == caller) return;
      if (!cg_.has_node(*callee)) cg_.add_node(*callee);
      cg_.add_edge(caller, *cg_.resolve(*callee));
    });

    if (main) {
      if (!cg_.has_node(main->id)) cg_.add_node(main->id, main->address);
      cg_.main_id = main->id;
    }
    return std::move(cg_);
  }

 private:
  bool in_body(uint64_t addr) const {
    return std::any_of(sections_.begin(), sections_.end(), [&](const CodeSection* s) { return s->contains(addr); });
  }

  std::string id_of(uint64_t addr) const {
    if (const auto* f = b_.function_at(addr)) return f->name;
    return synthesized_id(addr);
  }

  // Imported names stay as-is; locally defined names map to their primary symbol.
  std::string symbol_id(const std::string& name) const {
    if (b_.imported_syms.count(name)) return name;
    if (const auto* f = b_.function_named(name)) return f->name;
    return name;
  }

  std::optional<std::string> target_name(uint64_t target) const {
    if (auto it = b_.plt_map.find(target); it != b_.plt_map.end()) return it->second;
    if (auto it = b_.plt_local_map.find(target); it != b_.plt_local_map.end()) return symbol_id(it->second);
    if (starts_.count(target)) return id_of(target);
    return std::nullopt;
  }

  // Linear sweep of every body section, restarting at each function start.
  // `visit(owner, insn, after_end)`: owner is the enclosing start, unset for
  // code that precedes every start; after_end tells
  // whether only padding separates the instruction from a flow terminator.
  template <typename Visit>
  void sweep(Visit&& visit) const {
    for (const CodeSection* s : sections_) {
      std::vector<uint64_t> cuts{s->address};
      for (auto it = starts_.lower_bound(s->address); it != starts_.end() && *it < s->end(); ++it) cuts.push_back(*it);
      cuts.push_back(s->end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      const std::span<const uint8_t> bytes(s->bytes);
      for (size_t r = 0; r + 1 < cuts.size(); ++r) {
        const uint64_t begin = cuts[r];
        const uint64_t end = cuts[r + 1];
        const bool owned = starts_.count(begin) != 0;
        bool after_end = !owned;
        for (uint64_t addr = begin; addr < end;) {
          auto insn = dec_.decode(bytes.subspan(addr - s->address, end - addr), addr);
          if (!insn) {
            ++addr;
            continue;
          }
          visit(owned ? std::optional<uint64_t>(begin) : std::nullopt, *insn, after_end);
          if (ends_flow(insn->flow)) after_end = true;
          else if (!insn->is_nop && insn->flow != FlowKind::kTrap && !insn->is_endbr64) after_end = false;
          addr = insn->next();
        }
      }
    }
  }

  const BinaryFile& b_;
  const InstructionDecoder& dec_;
  std::vector<const CodeSection*> sections_;
  std::set<uint64_t> starts_;
  Callgraph cg_;
};

}  // namespace

void Callgraph::add_node(const std::string& id, std::optional<uint64_t> address) {
  nodes_.insert(id);
  if (address) addresses_.emplace(id, *address);
}

void Callgraph::add_edge(const std::string& caller, const std::string& callee) {
  nodes_.insert(caller);
  nodes_.insert(callee);
  succ_[caller].insert(callee);
}

void Callgraph::add_alias(const std::string& alias, const std::string& id) {
  if (alias != id && !nodes_.count(alias)) aliases_.emplace(alias, id);
}

std::optional<std::string> Callgraph::resolve(const std::string& name) const {
  if (nodes_.count(name)) return name;
  if (auto it = aliases_.find(name); it != aliases_.end()) return it->second;
  return std::nullopt;
}

bool Callgraph::has_edge(const std::string& caller, const std::string& callee) const {
  auto a = resolve(caller);
  auto b = resolve(callee);
  if (!a || !b) return false;
  auto it = succ_.find(*a);
  return it != succ_.end() && it->second.count(*b) != 0;
}

const std::set<std::string>& Callgraph::successors(const std::string& id) const {
  auto it = succ_.find(id);
  return it == succ_.end() ? kNone : it->second;
}

std::optional<uint64_t> Callgraph::address_of(const std::string& name) const {
  auto id = resolve(name);
  if (!id) return std::nullopt;
  auto it = addresses_.find(*id);
  if (it == addresses_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::string, std::string>> Callgraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [src, dsts] : succ_) {
    for (const auto& dst : dsts) out.emplace_back(src, dst);
  }
  return out;
}

size_t Callgraph::edge_count() const {
  size_t n = 0;
  for (const auto& [src, dsts] : succ_) n += dsts.size();
  return n;
}

std::string synthesized_id(uint64_t address) {
  std::ostringstream os;
  os << "sub_" << std::hex << address;
  return os.str();
}

std::string to_string(MainMethod m) {
  switch (m) {
    case MainMethod::kSymbol: return "symbol";
    case MainMethod::kEntryStub: return "entry-stub";
    case MainMethod::kEntryPoint: return "entry-point";
  }
  return "unknown";
}

MainLocation get_main_address(const BinaryFile& b, const InstructionDecoder* decoder) {
  if (b.kind != BinaryKind::kExecutable) {
    throw std::invalid_argument(b.path.string() + ": main exists only in executables");
  }
  if (const auto* f = b.function_named("main")) return {"main", f->address, MainMethod::kSymbol};

  auto owned = own_decoder(b, decoder);
  if (const auto* s = b.section_containing(b.entry_point)) {
    std::optional<uint64_t> rdi;
    uint64_t addr = b.entry_point;
    for (size_t n = 0; n < kEntryStubLimit && s->contains(addr); ++n) {
      auto insn = decoder->decode(std::span<const uint8_t>(s->bytes).subspan(addr - s->address), addr);
      if (!insn) break;
      if (insn->load && insn->load->reg == kRdi) rdi = insn->load->value;
      if (insn->flow == FlowKind::kCall || insn->flow == FlowKind::kCallIndirect) {
        if (rdi && b.section_containing(*rdi)) {
          const auto* f = b.function_at(*rdi);
          return {f ? f->name : synthesized_id(*rdi), *rdi, MainMethod::kEntryStub};
        }
        break;
      }
      if (ends_flow(insn->flow)) break;
      addr = insn->next();
    }
  }
  const auto* f = b.function_at(b.entry_point);
  return {f ? f->name : synthesized_id(b.entry_point), b.entry_point, MainMethod::kEntryPoint};
}

Callgraph gen_callgraph(const BinaryFile& b, const InstructionDecoder* decoder) {
  auto owned = own_decoder(b, decoder);
  if (body_sections(b).empty()) throw CallgraphUnsupported(b.path.string() + ": no executable code");
  std::optional<MainLocation> main;
  if (b.kind == BinaryKind::kExecutable) main = get_main_address(b, decoder);
  Builder builder(b, *decoder);
  return builder.build(main);
}

std::optional<std::vector<std::string>> reachable_path(const Callgraph& cg, const std::string& from,
                                                       const std::string& to) {
  auto src = cg.resolve(from);
  auto dst = cg.resolve(to);
  if (!src || !dst) return std::nullopt;
  std::map<std::string, std::string> parent{{*src, *src}};
  std::deque<std::string> queue{*src};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    if (cur == *dst) {
      std::vector<std::string> path{cur};
      while (path.back() != *src) path.push_back(parent[path.back()]);
      std::reverse(path.begin(), path.end());
      path.front() = from;
      path.back() = to;
      return path;
    }
    for (const auto& next : cg.successors(cur)) {
      if (parent.emplace(next, cur).second) queue.push_back(next);
    }
  }
  return std::nullopt;
}

std::string to_dot(const Callgraph& cg, const std::string& label) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "digraph " << quote(label) << " {\n";
  for (const auto& n : cg.nodes()) {
    os << "  " << quote(n);
    if (cg.main_id && cg.resolve(*cg.main_id) == n) os << " [shape=box]";
    os << ";\n";
  }
  for (const auto& [a, b] : cg.edges()) os << "  " << quote(a) << " -> " << quote(b) << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace qvscan
