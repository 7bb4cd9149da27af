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

#include <cstring>
#include <map>
#include <sstream>

#include "doctest.h"
#include "qvscan/elf_reader.h"
#include "qvscan/x86_decoder.h"
#include "test_support.h"

using namespace qvscan;
using namespace qvscan::testing;

namespace {

std::optional<Instruction> decode(std::initializer_list<uint8_t> bytes, uint64_t address = 0x1000) {
  const std::vector<uint8_t> v(bytes);
  return X86_64Decoder().decode(v, address);
}

uint8_t length_of(std::initializer_list<uint8_t> bytes) {
  auto insn = decode(bytes);
  return insn ? insn->length : 0;
}

struct ObjdumpInsn {
  std::string text;  // mnemonic and operands
};

struct ObjdumpListing {
  std::map<uint64_t, ObjdumpInsn> insns;
  std::set<uint64_t> labels;
};

// Parses `objdump -d -w --no-show-raw-insn` output for one section.
ObjdumpListing objdump_section(const std::string& path, const std::string& section) {
  ObjdumpListing out;
  auto text = run_command("objdump -d -w --no-show-raw-insn -j " + section + " " + path);
  REQUIRE(text);
  std::istringstream in(*text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != ' ') {
      // "0000000000001000 <_init>:"
      const auto lt = line.find(" <");
      if (lt != std::string::npos && line.back() == ':') out.labels.insert(std::stoull(line.substr(0, lt), nullptr, 16));
      continue;
    }
    const auto colon = line.find(':');
    const auto tab = line.find('\t');
    if (colon == std::string::npos || tab == std::string::npos || tab < colon) continue;
    const auto first = line.find_first_not_of(' ');
    const uint64_t addr = std::stoull(line.substr(first, colon - first), nullptr, 16);
    std::string insn = line.substr(tab + 1);
    while (!insn.empty() && insn.back() == ' ') insn.pop_back();
    out.insns[addr] = {insn};
  }
  return out;
}

std::string strip_prefixes(std::string s) {
  for (const char* p : {"bnd ", "notrack ", "ds ", "cs ", "rex.W ", "data16 "}) {
    while (s.rfind(p, 0) == 0) s = s.substr(std::strlen(p));
  }
  return s;
}

// The direct branch target objdump prints, e.g. "call   1139 <do_crypto>".
std::optional<uint64_t> printed_target(const std::string& operands) {
  auto start = operands.find_first_not_of(' ');
  if (start == std::string::npos || operands[start] == '*') return std::nullopt;
  const auto end = operands.find(' ', start);
  const std::string hex = operands.substr(start, end - start);
  if (hex.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
  return std::stoull(hex, nullptr, 16);
}

struct Mismatch {
  uint64_t address;
  std::string what;
};

// Sweeps each region between objdump labels with our decoder and compares
// instruction boundaries and direct control-flow targets.
// With `functions_only`, bytes outside sized function symbols are skipped
// (data tables placed in .text).
std::vector<Mismatch> compare_with_objdump(const std::string& path, size_t& compared, bool functions_only) {
  std::vector<Mismatch> bad;
  const auto b = parse_elf(path);
  X86_64Decoder dec;
  for (const auto& sec : b.code_sections) {
    const auto listing = objdump_section(path, sec.name);
    std::vector<uint64_t> cuts{sec.address};
    for (uint64_t l : listing.labels) {
      if (sec.contains(l)) cuts.push_back(l);
    }
    cuts.push_back(sec.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::map<uint64_t, Instruction> ours;
    std::set<uint64_t> undecodable;
    for (size_t r = 0; r + 1 < cuts.size(); ++r) {
      for (uint64_t a = cuts[r]; a < cuts[r + 1];) {
        auto insn = dec.decode(std::span<const uint8_t>(sec.bytes).subspan(a - sec.address, cuts[r + 1] - a), a);
        if (!insn) {
          undecodable.insert(a);
          // Where both sides reject the bytes, resume at objdump's next boundary.
          auto od = listing.insns.find(a);
          auto next = od == listing.insns.end() ? od : std::next(od);
          a = (od != listing.insns.end() && od->second.text.find("(bad)") != std::string::npos &&
               next != listing.insns.end() && next->first < cuts[r + 1])
                  ? next->first
                  : a + 1;
          continue;
        }
        ours[a] = *insn;
        a = insn->next();
      }
    }

    std::map<uint64_t, uint64_t> code;
    for (const auto& f : b.func_syms) {
      if (functions_only && f.size > 0 && sec.contains(f.address)) code[f.address] = f.address + f.size;
    }
    auto is_code = [&](uint64_t addr) {
      if (code.empty()) return true;
      auto it = code.upper_bound(addr);
      return it != code.begin() && addr < std::prev(it)->second;
    };

    for (const auto& [addr, od] : listing.insns) {
      if (!is_code(addr)) continue;
      const bool od_bad = od.text.find("(bad)") != std::string::npos;
      auto it = ours.find(addr);
      if (it == ours.end()) {
        if (!od_bad && !undecodable.count(addr)) bad.push_back({addr, "objdump boundary missed: " + od.text});
        else if (!od_bad) bad.push_back({addr, "rejected valid instruction: " + od.text});
        continue;
      }
      if (od_bad) continue;
      ++compared;
      const Instruction& insn = it->second;
      const std::string text = strip_prefixes(od.text);
      const auto space = text.find(' ');
      const std::string mnemonic = text.substr(0, space);
      const std::string operands = space == std::string::npos ? "" : text.substr(space);
      auto target = printed_target(operands);
      if (mnemonic == "call" && target) {
        if (insn.flow != FlowKind::kCall || insn.target != target) bad.push_back({addr, "call target: " + od.text});
      } else if (mnemonic == "jmp" && target) {
        if (insn.flow != FlowKind::kJump || insn.target != target) bad.push_back({addr, "jmp target: " + od.text});
      } else if (mnemonic[0] == 'j' && target) {
        if (insn.flow != FlowKind::kCondJump || insn.target != target) bad.push_back({addr, "jcc target: " + od.text});
      } else if (mnemonic == "call") {
        if (insn.flow != FlowKind::kCallIndirect) bad.push_back({addr, "indirect call: " + od.text});
      } else if (mnemonic == "ret") {
        if (insn.flow != FlowKind::kReturn) bad.push_back({addr, "ret: " + od.text});
      }
    }
    for (const auto& [addr, insn] : ours) {
      if (is_code(addr) && !listing.insns.count(addr)) bad.push_back({addr, "extra boundary"});
    }
  }
  return bad;
}

void check_against_objdump(const std::string& path, bool functions_only = false) {
  CAPTURE(path);
  size_t compared = 0;
  const auto bad = compare_with_objdump(path, compared, functions_only);
  MESSAGE(path << ": " << compared << " instructions compared, " << bad.size() << " mismatches");
  CHECK(compared > 0);
  for (size_t i = 0; i < std::min<size_t>(bad.size(), 10); ++i) {
    std::ostringstream where;
    where << std::hex << "0x" << bad[i].address << ": " << bad[i].what;
    FAIL_CHECK(where.str());
  }
  CHECK(bad.empty());
}

}  // namespace

TEST_CASE("direct control transfers") {
  SUBCASE("call rel32") {
    auto i = decode({0xe8, 0x10, 0x00, 0x00, 0x00});
    REQUIRE(i);
    CHECK(i->length == 5);
    CHECK(i->flow == FlowKind::kCall);
    CHECK(i->target == 0x1015u);
  }
  SUBCASE("backward call") {
    auto i = decode({0xe8, 0xfb, 0xff, 0xff, 0xff});
    REQUIRE(i);
    CHECK(i->target == 0x1000u);
  }
  SUBCASE("jmp rel32 and rel8") {
    auto far = decode({0xe9, 0x00, 0x01, 0x00, 0x00});
    REQUIRE(far);
    CHECK(far->flow == FlowKind::kJump);
    CHECK(far->target == 0x1105u);
    auto near = decode({0xeb, 0xfe});
    REQUIRE(near);
    CHECK(near->flow == FlowKind::kJump);
    CHECK(near->target == 0x1000u);
  }
  SUBCASE("conditional branches") {
    auto jz8 = decode({0x74, 0x02});
    REQUIRE(jz8);
    CHECK(jz8->flow == FlowKind::kCondJump);
    CHECK(jz8->target == 0x1004u);
    auto jz32 = decode({0x0f, 0x84, 0x00, 0x00, 0x00, 0x00});
    REQUIRE(jz32);
    CHECK(jz32->length == 6);
    CHECK(jz32->flow == FlowKind::kCondJump);
    CHECK(jz32->target == 0x1006u);
    auto loop = decode({0xe2, 0xfe});
    REQUIRE(loop);
    CHECK(loop->flow == FlowKind::kCondJump);
  }
  SUBCASE("bnd-prefixed jmp") {
    auto i = decode({0xf2, 0xe9, 0x00, 0x00, 0x00, 0x00});
    REQUIRE(i);
    CHECK(i->length == 6);
    CHECK(i->flow == FlowKind::kJump);
    CHECK(i->target == 0x1006u);
  }
}

TEST_CASE("indirect control transfers") {
  SUBCASE("call through rip-relative slot") {
    auto i = decode({0xff, 0x15, 0x00, 0x20, 0x00, 0x00});
    REQUIRE(i);
    CHECK(i->length == 6);
    CHECK(i->flow == FlowKind::kCallIndirect);
    CHECK(i->memory_target == 0x3006u);
    CHECK_FALSE(i->target.has_value());
  }
  SUBCASE("call through register has no target") {
    auto i = decode({0xff, 0xd0});
    REQUIRE(i);
    CHECK(i->flow == FlowKind::kCallIndirect);
    CHECK_FALSE(i->memory_target.has_value());
  }
  SUBCASE("jmp through rip-relative slot") {
    auto i = decode({0xff, 0x25, 0x02, 0x00, 0x00, 0x00});
    REQUIRE(i);
    CHECK(i->flow == FlowKind::kJumpIndirect);
    CHECK(i->memory_target == 0x1008u);
  }
  SUBCASE("notrack jmp through register") {
    auto i = decode({0x3e, 0xff, 0xe0});
    REQUIRE(i);
    CHECK(i->length == 3);
    CHECK(i->flow == FlowKind::kJumpIndirect);
  }
}

TEST_CASE("terminators and markers") {
  CHECK(decode({0xc3})->flow == FlowKind::kReturn);
  CHECK(decode({0xc2, 0x08, 0x00})->flow == FlowKind::kReturn);
  CHECK(decode({0xc2, 0x08, 0x00})->length == 3);
  CHECK(decode({0xf4})->flow == FlowKind::kTrap);
  CHECK(decode({0xcc})->flow == FlowKind::kTrap);
  CHECK(decode({0x0f, 0x0b})->flow == FlowKind::kTrap);
  auto endbr = decode({0xf3, 0x0f, 0x1e, 0xfa});
  REQUIRE(endbr);
  CHECK(endbr->length == 4);
  CHECK(endbr->is_endbr64);
  CHECK(endbr->flow == FlowKind::kSequential);
  CHECK(decode({0x90})->is_nop);
  auto long_nop = decode({0x66, 0x2e, 0x0f, 0x1f, 0x84, 0x00, 0x00, 0x00, 0x00, 0x00});
  REQUIRE(long_nop);
  CHECK(long_nop->length == 10);
  CHECK(long_nop->is_nop);
}

TEST_CASE("register loads used for main recovery") {
  SUBCASE("lea rdi, [rip+disp]") {
    auto i = decode({0x48, 0x8d, 0x3d, 0x10, 0x00, 0x00, 0x00});
    REQUIRE(i);
    REQUIRE(i->load);
    CHECK(i->load->reg == 7);
    CHECK(i->load->value == 0x1017u);
  }
  SUBCASE("mov rdi, imm32 sign-extended") {
    auto i = decode({0x48, 0xc7, 0xc7, 0x30, 0x11, 0x40, 0x00});
    REQUIRE(i);
    REQUIRE(i->load);
    CHECK(i->load->reg == 7);
    CHECK(i->load->value == 0x401130u);
  }
  SUBCASE("mov edi, imm32") {
    auto i = decode({0xbf, 0x30, 0x11, 0x40, 0x00});
    REQUIRE(i);
    REQUIRE(i->load);
    CHECK(i->load->reg == 7);
    CHECK(i->load->value == 0x401130u);
  }
  SUBCASE("lea r15, [rip+disp] uses REX.R") {
    auto i = decode({0x4c, 0x8d, 0x3d, 0x00, 0x00, 0x00, 0x00});
    REQUIRE(i);
    REQUIRE(i->load);
    CHECK(i->load->reg == 15);
  }
}

TEST_CASE("instruction lengths") {
  CHECK(length_of({0x66, 0xb8, 0x34, 0x12}) == 4);                                // mov ax, imm16
  CHECK(length_of({0xb8, 0x78, 0x56, 0x34, 0x12}) == 5);                          // mov eax, imm32
  CHECK(length_of({0x48, 0xb8, 1, 2, 3, 4, 5, 6, 7, 8}) == 10);                   // movabs rax, imm64
  CHECK(length_of({0xa0, 1, 2, 3, 4, 5, 6, 7, 8}) == 9);                          // mov al, moffs64
  CHECK(length_of({0x67, 0xa0, 1, 2, 3, 4}) == 6);                                // mov al, moffs32
  CHECK(length_of({0xf6, 0xc0, 0x01}) == 3);                                      // test al, imm8
  CHECK(length_of({0xf7, 0xc0, 0x01, 0x00, 0x00, 0x00}) == 6);                    // test eax, imm32
  CHECK(length_of({0x66, 0xf7, 0xc0, 0x01, 0x00}) == 5);                          // test ax, imm16
  CHECK(length_of({0xf7, 0xd8}) == 2);                                            // neg eax
  CHECK(length_of({0xc8, 0x10, 0x00, 0x00}) == 4);                                // enter
  CHECK(length_of({0x48, 0x8b, 0x44, 0x24, 0x08}) == 5);                          // mov rax, [rsp+8]
  CHECK(length_of({0x8b, 0x04, 0x25, 0x00, 0x10, 0x00, 0x00}) == 7);              // mov eax, [abs32]
  CHECK(length_of({0x8b, 0x84, 0x88, 0x00, 0x01, 0x00, 0x00}) == 7);              // SIB + disp32
  CHECK(length_of({0x0f, 0x3a, 0x0f, 0xc1, 0x08}) == 5);                          // palignr mm, mm, imm8
  CHECK(length_of({0x66, 0x0f, 0x3a, 0x0f, 0xc1, 0x08}) == 6);                    // palignr xmm
  CHECK(length_of({0x66, 0x0f, 0x38, 0x00, 0xc1}) == 5);                          // pshufb
  CHECK(length_of({0xc5, 0xf8, 0x77}) == 3);                                      // vzeroupper
  CHECK(length_of({0xc4, 0xe2, 0x7d, 0x18, 0x00}) == 5);                          // vbroadcastss ymm0, [rax]
  CHECK(length_of({0xc4, 0xe3, 0x7d, 0x18, 0xc1, 0x01}) == 6);                    // vinsertf128
  CHECK(length_of({0x62, 0xf1, 0x7c, 0x48, 0x10, 0x00}) == 6);                    // vmovups zmm0, [rax]
  CHECK(length_of({0x62, 0xf1, 0x7c, 0x48, 0x10, 0x40, 0x01}) == 7);              // EVEX disp8
  CHECK(length_of({0x62, 0xf3, 0x7d, 0x48, 0x3a, 0xc1, 0x01}) == 7);              // vinserti32x8
  CHECK(length_of({0x8f, 0xe8, 0x78, 0xc2, 0xc1, 0x05}) == 6);                    // XOP vprotq imm8
  CHECK(length_of({0x8f, 0xc0}) == 2);                                            // pop rax via 8F /0
  CHECK(length_of({0xf3, 0x48, 0xab}) == 3);                                      // rep stosq
}

TEST_CASE("invalid or truncated input") {
  CHECK_FALSE(decode({}).has_value());
  CHECK_FALSE(decode({0xe8, 0x00, 0x00}).has_value());
  CHECK_FALSE(decode({0x48, 0x8b}).has_value());
  // 15 prefixes leave no room for the opcode.
  CHECK_FALSE(decode({0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66, 0x66,
                      0x90})
                  .has_value());
  CHECK_FALSE(decode({0x06}).has_value());  // push es: invalid in 64-bit mode
}

TEST_CASE("encodings rejected by their ModRM or prefix fields") {
  CHECK_FALSE(decode({0xc6, 0x63, 0xa5}).has_value());  // c6 /4
  CHECK_FALSE(decode({0xc7, 0x48, 0x00, 0x01, 0x02, 0x03, 0x04}).has_value());
  CHECK_FALSE(decode({0x8d, 0xcb}).has_value());  // lea with a register source
  CHECK_FALSE(decode({0xfe, 0xfe}).has_value());
  CHECK_FALSE(decode({0xff, 0xf8}).has_value());
  CHECK_FALSE(decode({0x8f, 0x48, 0x00}).has_value());
  CHECK_FALSE(decode({0xc4, 0xc4, 0x57, 0x55}).has_value());              // VEX map 4
  CHECK_FALSE(decode({0xc4, 0x62, 0x62, 0xa6, 0x00}).has_value());        // fma without 66
  CHECK_FALSE(decode({0x62, 0x31, 0x31, 0x53, 0x2a, 0x00}).has_value());  // EVEX fixed bit clear
  CHECK_FALSE(decode({0x62, 0x91, 0x95, 0xe4, 0x79, 0x00}).has_value());  // EVEX L'L = 3
  CHECK_FALSE(decode({0x0f, 0x0f, 0x11, 0x7b}).has_value());              // 3DNow! suffix 7b

  auto xabort = decode({0xc6, 0xf8, 0x01});
  REQUIRE(xabort);
  CHECK(xabort->length == 3);
  auto xbegin = decode({0xc7, 0xf8, 0x00, 0x00, 0x00, 0x00});
  REQUIRE(xbegin);
  CHECK(xbegin->length == 6);
  auto pfcmpeq = decode({0x0f, 0x0f, 0xc1, 0xb0});
  REQUIRE(pfcmpeq);
  CHECK(pfcmpeq->length == 4);
  auto rorx = decode({0xc4, 0xe3, 0x7b, 0xf0, 0xc1, 0x05});
  REQUIRE(rorx);
  CHECK(rorx->length == 6);

  // A REX followed by another prefix is dropped and decodes on its own.
  auto lone = decode({0x46, 0x67, 0xbe, 0x00, 0x00, 0x00, 0x00});
  REQUIRE(lone);
  CHECK(lone->length == 1);
  CHECK(lone->is_nop);
}

TEST_CASE("decoder factory") {
  CHECK(decoder_for_machine(62) != nullptr);  // EM_X86_64
  CHECK(decoder_for_machine(183) == nullptr);  // EM_AARCH64
}

TEST_CASE("agrees with objdump on the corpus") {
  if (!have_tool("objdump")) {
    MESSAGE("objdump not installed; oracle comparison skipped");
    return;
  }
  for (const auto& n : corpus_exec_names()) check_against_objdump(corpus_bin(n));
  for (const char* n : {"libtoycrypto.so", "libmid.so", "libcyca.so", "libcycb.so"}) check_against_objdump(corpus_lib(n));
}

TEST_CASE("agrees with objdump on system binaries") {
  if (!have_tool("objdump")) {
    MESSAGE("objdump not installed; oracle comparison skipped");
    return;
  }
  size_t checked = 0;
  for (const char* p : {"/usr/bin/ls", "/usr/bin/ssh", "/lib/x86_64-linux-gnu/libc.so.6"}) {
    if (!std::filesystem::exists(p)) continue;
    check_against_objdump(canonical_id(p));
    ++checked;
  }
  // libcrypto keeps lookup tables inside .text.
  if (std::filesystem::exists("/lib/x86_64-linux-gnu/libcrypto.so.3")) {
    check_against_objdump(canonical_id("/lib/x86_64-linux-gnu/libcrypto.so.3"), true);
    ++checked;
  }
  if (checked == 0) MESSAGE("no system binaries available");
}
