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

#include "qvscan/x86_decoder.h"

#include <elf.h>

#include <array>
#include <initializer_list>
#include <utility>

namespace qvscan {

namespace {

constexpr size_t kMaxInstructionLength = 15;

// Operand layout flags. Immediate sizes are additive (ENTER = imm16 + imm8).
enum : uint16_t {
  kNone = 0,
  kModRM = 1 << 0,
  kImm8 = 1 << 1,
  kImmZ = 1 << 2,  // 16 or 32 bits depending on operand size
  kImm16 = 1 << 3,
  kRel8 = 1 << 4,
  kRel32 = 1 << 5,
  kMoffs = 1 << 6,
  kImmV = 1 << 7,  // 16/32/64 bits (mov r, imm)
  kGroup3 = 1 << 8,  // F6/F7: immediate only for /0 and /1
  kInvalid = 1 << 9,
  kImm32 = 1 << 10,
};

constexpr std::array<uint16_t, 256> make_one_byte_table() {
  std::array<uint16_t, 256> t{};
  for (int op = 0x00; op < 0x40; ++op) {
    switch (op & 7) {
      case 0: case 1: case 2: case 3: t[op] = kModRM; break;
      case 4: t[op] = kImm8; break;
      case 5: t[op] = kImmZ; break;
      default: t[op] = kInvalid; break;  // push/pop seg, daa etc. (or prefixes)
    }
  }
  t[0x60] = t[0x61] = t[0x62] = kInvalid;
  t[0x63] = kModRM;
  t[0x68] = kImmZ;
  t[0x69] = kModRM | kImmZ;
  t[0x6A] = kImm8;
  t[0x6B] = kModRM | kImm8;
  for (int op = 0x70; op < 0x80; ++op) t[op] = kRel8;
  t[0x80] = kModRM | kImm8;
  t[0x81] = kModRM | kImmZ;
  t[0x82] = kInvalid;
  t[0x83] = kModRM | kImm8;
  for (int op = 0x84; op < 0x90; ++op) t[op] = kModRM;
  t[0x9A] = kInvalid;
  for (int op = 0xA0; op < 0xA4; ++op) t[op] = kMoffs;
  t[0xA8] = kImm8;
  t[0xA9] = kImmZ;
  for (int op = 0xB0; op < 0xB8; ++op) t[op] = kImm8;
  for (int op = 0xB8; op < 0xC0; ++op) t[op] = kImmV;
  t[0xC0] = t[0xC1] = kModRM | kImm8;
  t[0xC2] = kImm16;
  t[0xC6] = kModRM | kImm8;
  t[0xC7] = kModRM | kImmZ;
  t[0xC8] = kImm16 | kImm8;
  t[0xCA] = kImm16;
  t[0xCD] = kImm8;
  t[0xCE] = kInvalid;
  for (int op = 0xD0; op < 0xD4; ++op) t[op] = kModRM;
  t[0xD4] = t[0xD5] = t[0xD6] = kInvalid;
  for (int op = 0xD8; op < 0xE0; ++op) t[op] = kModRM;
  for (int op = 0xE0; op < 0xE4; ++op) t[op] = kRel8;
  for (int op = 0xE4; op < 0xE8; ++op) t[op] = kImm8;
  t[0xE8] = t[0xE9] = kRel32;
  t[0xEA] = kInvalid;
  t[0xEB] = kRel8;
  t[0xF6] = t[0xF7] = kModRM | kGroup3;
  t[0xFE] = t[0xFF] = kModRM;
  return t;
}

constexpr std::array<uint16_t, 256> make_two_byte_table() {
  std::array<uint16_t, 256> t{};
  for (int op = 0x00; op < 0x100; ++op) t[op] = kModRM;
  t[0x04] = t[0x0A] = t[0x0C] = kInvalid;
  for (int op : {0x05, 0x06, 0x07, 0x08, 0x09, 0x0B, 0x0E}) t[op] = kNone;
  t[0x0F] = kModRM | kImm8;  // 3DNow!
  for (int op = 0x24; op < 0x28; ++op) t[op] = kInvalid;
  for (int op = 0x30; op < 0x38; ++op) t[op] = kNone;
  for (int op = 0x39; op < 0x40; ++op) t[op] = kInvalid;
  for (int op = 0x70; op < 0x74; ++op) t[op] = kModRM | kImm8;
  t[0x77] = kNone;
  t[0x7A] = t[0x7B] = kInvalid;
  for (int op = 0x80; op < 0x90; ++op) t[op] = kRel32;
  t[0xA0] = t[0xA1] = t[0xA2] = kNone;
  t[0xA4] = kModRM | kImm8;
  t[0xA6] = t[0xA7] = kInvalid;
  t[0xA8] = t[0xA9] = t[0xAA] = kNone;
  t[0xAC] = kModRM | kImm8;
  t[0xBA] = kModRM | kImm8;
  t[0xC2] = kModRM | kImm8;
  t[0xC4] = t[0xC5] = t[0xC6] = kModRM | kImm8;
  for (int op = 0xC8; op < 0xD0; ++op) t[op] = kNone;
  return t;
}

constexpr auto kOneByte = make_one_byte_table();
constexpr auto kTwoByte = make_two_byte_table();

bool is_legacy_prefix(uint8_t b) {
  switch (b) {
    case 0xF0: case 0xF2: case 0xF3: case 0x2E: case 0x36: case 0x3E:
    case 0x26: case 0x64: case 0x65: case 0x66: case 0x67:
      return true;
    default:
      return false;
  }
}

// VEX/EVEX map 1 opcodes that carry an imm8.
bool vex_map1_has_imm8(uint8_t op) {
  return (op >= 0x70 && op <= 0x73) || op == 0xC2 || (op >= 0xC4 && op <= 0xC6);
}

bool in(uint8_t op, std::initializer_list<std::pair<uint8_t, uint8_t>> ranges) {
  for (const auto& [lo, hi] : ranges) {
    if (op >= lo && op <= hi) return true;
  }
  return false;
}

// VEX 0F38 and 0F3A opcodes; map 1 is left to the ModRM checks. Most need pp = 66.
bool vex_opcode_valid(int map, uint8_t op, uint8_t pp) {
  if (pp != 1) {
    if (map == 2) return in(op, {{0x49, 0x49}, {0x4B, 0x4B}, {0x5C, 0x5C}, {0x5E, 0x5E}, {0x72, 0x72}, {0xB0, 0xB1},
                                 {0xF2, 0xF3}, {0xF5, 0xF7}});
    if (map == 3) return op == 0xF0;
  }
  if (map == 2) {
    return in(op, {{0x00, 0x0F}, {0x13, 0x13}, {0x16, 0x1A}, {0x1C, 0x1E}, {0x20, 0x25}, {0x28, 0x2F},
                   {0x30, 0x41}, {0x45, 0x47}, {0x49, 0x49}, {0x4B, 0x4B}, {0x50, 0x53}, {0x58, 0x5A},
                   {0x5C, 0x5C}, {0x5E, 0x5E}, {0x72, 0x72}, {0x78, 0x79}, {0x8C, 0x8C}, {0x8E, 0x8E},
                   {0x90, 0x93}, {0x96, 0x9F}, {0xA6, 0xAF}, {0xB0, 0xB1}, {0xB4, 0xBF}, {0xCF, 0xCF},
                   {0xDB, 0xDF}, {0xF2, 0xF3}, {0xF5, 0xF7}});
  }
  if (map == 3) {
    return in(op, {{0x00, 0x02}, {0x04, 0x06}, {0x08, 0x0F}, {0x14, 0x19}, {0x1D, 0x1D}, {0x20, 0x22},
                   {0x38, 0x39}, {0x40, 0x42}, {0x44, 0x44}, {0x46, 0x46}, {0x48, 0x4C}, {0x5C, 0x5F},
                   {0x60, 0x63}, {0x68, 0x6F}, {0x78, 0x7F}, {0xCE, 0xCF}, {0xDE, 0xDF}, {0xF0, 0xF0}});
  }
  return true;
}

// 3DNow! opcodes sit in the trailing byte.
bool amd3dnow_suffix_valid(uint8_t op) {
  return in(op, {{0x0C, 0x0D}, {0x1C, 0x1D}, {0x8A, 0x8A}, {0x8E, 0x8E}, {0x90, 0x90}, {0x94, 0x94}, {0x96, 0x97},
                 {0x9A, 0x9A}, {0x9E, 0x9E}, {0xA0, 0xA0}, {0xA4, 0xA4}, {0xA6, 0xA7}, {0xAA, 0xAA}, {0xAE, 0xAE},
                 {0xB0, 0xB0}, {0xB4, 0xB4}, {0xB6, 0xB7}, {0xBB, 0xBB}, {0xBF, 0xBF}});
}

bool xop_opcode_valid(int map, uint8_t op) {
  switch (map) {
    case 8:
      return (op >= 0x85 && op <= 0x87) || op == 0x8E || op == 0x8F || (op >= 0x95 && op <= 0x97) || op == 0x9E ||
             op == 0x9F || op == 0xA2 || op == 0xA3 || op == 0xA6 || op == 0xB6 || (op >= 0xC0 && op <= 0xC3) ||
             (op >= 0xCC && op <= 0xCF) || (op >= 0xEC && op <= 0xEF);
    case 9:
      return op == 0x01 || op == 0x02 || op == 0x12 || (op >= 0x80 && op <= 0x83) || (op >= 0x90 && op <= 0x9B) ||
             (op >= 0xC1 && op <= 0xC3) || op == 0xC6 || op == 0xC7 || op == 0xCB || (op >= 0xD1 && op <= 0xD3) ||
             op == 0xD6 || op == 0xD7 || op == 0xDB || (op >= 0xE1 && op <= 0xE3);
    case 0xA:
      return op == 0x10 || op == 0x12;
    default:
      return false;
  }
}

class Cursor {
 public:
  Cursor(std::span<const uint8_t> code) : code_(code) {}

  bool has(size_t n) const { return pos_ + n <= code_.size() && pos_ + n <= kMaxInstructionLength; }
  uint8_t peek(size_t ahead = 0) const { return code_[pos_ + ahead]; }
  uint8_t take() { return code_[pos_++]; }
  size_t pos() const { return pos_; }

  int64_t take_signed(size_t n) {
    uint64_t v = 0;
    for (size_t i = 0; i < n; ++i) v |= static_cast<uint64_t>(code_[pos_ + i]) << (8 * i);
    pos_ += n;
    if (n < 8) {
      const uint64_t sign = uint64_t{1} << (8 * n - 1);
      v = (v ^ sign) - sign;
    }
    return static_cast<int64_t>(v);
  }

  uint64_t take_unsigned(size_t n) {
    uint64_t v = 0;
    for (size_t i = 0; i < n; ++i) v |= static_cast<uint64_t>(code_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

 private:
  std::span<const uint8_t> code_;
  size_t pos_ = 0;
};

struct ModRM {
  uint8_t mod = 0;
  uint8_t reg = 0;
  uint8_t rm = 0;
  bool rip_relative = false;
  int64_t disp = 0;
};

// Consumes ModRM, SIB and displacement.
bool read_modrm(Cursor& c, ModRM& m) {
  if (!c.has(1)) return false;
  const uint8_t b = c.take();
  m.mod = b >> 6;
  m.reg = (b >> 3) & 7;
  m.rm = b & 7;
  if (m.mod == 3) return true;
  size_t disp_size = 0;
  if (m.rm == 4) {
    if (!c.has(1)) return false;
    const uint8_t sib = c.take();
    if (m.mod == 0 && (sib & 7) == 5) disp_size = 4;
  } else if (m.mod == 0 && m.rm == 5) {
    m.rip_relative = true;
    disp_size = 4;
  }
  if (m.mod == 1) disp_size = 1;
  if (m.mod == 2) disp_size = 4;
  if (!c.has(disp_size)) return false;
  m.disp = disp_size ? c.take_signed(disp_size) : 0;
  return true;
}

}  // namespace

std::optional<Instruction> X86_64Decoder::decode(std::span<const uint8_t> code,
                                                 uint64_t address) const {
  Cursor c(code);
  bool opsize16 = false;
  bool addr32 = false;
  bool rep = false;
  uint8_t rex = 0;

  while (c.has(1)) {
    const uint8_t b = c.peek();
    if (rex && (is_legacy_prefix(b) || (b & 0xF0) == 0x40)) {
      // A REX not directly before the opcode is ignored; treat it as its own no-op.
      Instruction lone;
      lone.address = address;
      lone.length = static_cast<uint8_t>(c.pos());
      lone.is_nop = true;
      return lone;
    }
    if (is_legacy_prefix(b)) {
      opsize16 |= b == 0x66;
      addr32 |= b == 0x67;
      rep |= b == 0xF3;
      c.take();
    } else if ((b & 0xF0) == 0x40) {
      rex = b;
      c.take();
    } else {
      break;
    }
  }
  if (!c.has(1)) return std::nullopt;

  const bool rex_w = rex & 0x08;
  const uint8_t rex_r = (rex & 0x04) ? 8 : 0;
  const uint8_t rex_b = (rex & 0x01) ? 8 : 0;

  Instruction insn;
  insn.address = address;

  const uint8_t op = c.take();
  uint16_t flags = kNone;
  int map = 0;  // 0 = one-byte, 1 = 0F, 2 = 0F38, 3 = 0F3A
  uint8_t opcode = op;
  bool vex_like = false;
  std::optional<uint8_t> evex_p2;

  if (op == 0x0F) {
    if (!c.has(1)) return std::nullopt;
    opcode = c.take();
    if (opcode == 0x38 || opcode == 0x3A) {
      if (!c.has(1)) return std::nullopt;
      map = opcode == 0x38 ? 2 : 3;
      opcode = c.take();
      flags = map == 2 ? kModRM : (kModRM | kImm8);
    } else {
      map = 1;
      flags = kTwoByte[opcode];
    }
  } else if (op == 0xC4 || op == 0xC5 || op == 0x62) {
    // VEX (2/3 byte) and EVEX. LES/LDS/BOUND do not exist in 64-bit mode.
    vex_like = true;
    uint8_t pp = 0;
    if (op == 0xC5) {
      if (!c.has(1)) return std::nullopt;
      pp = c.take() & 3;
      map = 1;
    } else if (op == 0xC4) {
      if (!c.has(2)) return std::nullopt;
      map = c.take() & 0x1F;
      pp = c.take() & 3;
      if (map < 1 || map > 3) return std::nullopt;
    } else {
      if (!c.has(3)) return std::nullopt;
      map = c.take() & 0x07;
      const uint8_t p1 = c.take();
      evex_p2 = c.take();
      if (map == 0 || !(p1 & 0x04)) return std::nullopt;
    }
    if (!c.has(1)) return std::nullopt;
    opcode = c.take();
    if (op != 0x62 && !vex_opcode_valid(map, opcode, pp)) return std::nullopt;
    flags = kModRM;
    if (map == 1 && opcode == 0x77 && op != 0x62) flags = kNone;  // vzeroupper/vzeroall
    if (map == 3 || (map == 1 && vex_map1_has_imm8(opcode))) flags |= kImm8;
  } else if (op == 0x8F && c.has(1) && (c.peek() & 0x1F) >= 8) {
    // AMD XOP.
    if (!c.has(2)) return std::nullopt;
    map = c.take() & 0x1F;
    c.take();
    if (!c.has(1)) return std::nullopt;
    opcode = c.take();
    if (!xop_opcode_valid(map, opcode)) return std::nullopt;
    vex_like = true;
    flags = kModRM;
    if (map == 8) flags |= kImm8;
    if (map == 0xA) flags |= kImm32;
  } else {
    flags = kOneByte[op];
  }
  if (flags & kInvalid) return std::nullopt;

  ModRM m;
  if (flags & kModRM) {
    if (!read_modrm(c, m)) return std::nullopt;
  }
  // L'L = 3 is reserved unless it encodes rounding (b set, register operand).
  if (evex_p2 && ((*evex_p2 >> 5) & 3) == 3 && !((*evex_p2 & 0x10) && m.mod == 3)) return std::nullopt;
  // Group 11: only /0 and the F8 forms (xabort, xbegin) exist.
  if (!vex_like && map == 0 && (op == 0xC6 || op == 0xC7) && m.reg != 0 && !(m.reg == 7 && m.mod == 3 && m.rm == 0)) {
    return std::nullopt;
  }
  if (!vex_like && map == 0) {
    if (op == 0x8D && m.mod == 3) return std::nullopt;
    if (op == 0xFE && m.reg >= 2) return std::nullopt;
    if (op == 0xFF && m.reg == 7) return std::nullopt;
    if (op == 0x8F && m.reg != 0) return std::nullopt;
  }

  size_t imm_size = 0;
  if (flags & kImm8) imm_size += 1;
  if (flags & kImm16) imm_size += 2;
  if (flags & kImm32) imm_size += 4;
  if (flags & kImmZ) imm_size += (opsize16 && !rex_w) ? 2 : 4;
  if (flags & kImmV) imm_size += rex_w ? 8 : (opsize16 ? 2 : 4);
  if (flags & kMoffs) imm_size += addr32 ? 4 : 8;
  if ((flags & kGroup3) && m.reg < 2) imm_size += op == 0xF6 ? 1 : ((opsize16 && !rex_w) ? 2 : 4);

  size_t rel_size = 0;
  if (flags & kRel8) rel_size = 1;
  if (flags & kRel32) rel_size = 4;

  if (!c.has(imm_size + rel_size)) return std::nullopt;
  const uint64_t imm = imm_size ? c.take_unsigned(std::min<size_t>(imm_size, 8)) : 0;
  const int64_t rel = rel_size ? c.take_signed(rel_size) : 0;
  if (!vex_like && map == 1 && opcode == 0x0F && !amd3dnow_suffix_valid(static_cast<uint8_t>(imm))) return std::nullopt;

  insn.length = static_cast<uint8_t>(c.pos());
  const uint64_t next = address + insn.length;

  if (m.rip_relative && (flags & kModRM)) insn.memory_target = next + static_cast<uint64_t>(m.disp);

  if (vex_like) return insn;

  if (map == 0) {
    switch (op) {
      case 0xE8:
        insn.flow = FlowKind::kCall;
        insn.target = next + static_cast<uint64_t>(rel);
        break;
      case 0xE9:
      case 0xEB:
        insn.flow = FlowKind::kJump;
        insn.target = next + static_cast<uint64_t>(rel);
        break;
      case 0xC2: case 0xC3: case 0xCA: case 0xCB: case 0xCF:
        insn.flow = FlowKind::kReturn;
        break;
      case 0xF4: case 0xCC:
        insn.flow = FlowKind::kTrap;
        break;
      case 0x90:
        insn.is_nop = !rex_b && !rep;
        break;
      case 0xFF:
        if (m.reg == 2 || m.reg == 3) insn.flow = FlowKind::kCallIndirect;
        if (m.reg == 4 || m.reg == 5) insn.flow = FlowKind::kJumpIndirect;
        break;
      case 0x8D:
        if (m.rip_relative) insn.load = RegisterLoad{static_cast<uint8_t>(m.reg | rex_r), *insn.memory_target};
        break;
      case 0xC7:
        if (m.mod == 3 && m.reg == 0 && !opsize16) {
          // Sign-extended with REX.W, zero-extended into the full register otherwise.
          uint64_t value = imm & 0xFFFFFFFFu;
          if (rex_w && (value & 0x80000000u)) value |= 0xFFFFFFFF00000000u;
          insn.load = RegisterLoad{static_cast<uint8_t>(m.rm | rex_b), value};
        }
        break;
      default:
        if (op >= 0x70 && op < 0x80) {
          insn.flow = FlowKind::kCondJump;
          insn.target = next + static_cast<uint64_t>(rel);
        } else if (op >= 0xE0 && op < 0xE4) {
          insn.flow = FlowKind::kCondJump;
          insn.target = next + static_cast<uint64_t>(rel);
        } else if (op >= 0xB8 && op < 0xC0 && !opsize16) {
          insn.load = RegisterLoad{static_cast<uint8_t>((op & 7) | rex_b), imm};
        }
        break;
    }
  } else if (map == 1) {
    if (opcode >= 0x80 && opcode < 0x90) {
      insn.flow = FlowKind::kCondJump;
      insn.target = next + static_cast<uint64_t>(rel);
    } else if (opcode == 0x0B) {
      insn.flow = FlowKind::kTrap;
    } else if (opcode == 0x1F) {
      insn.is_nop = true;
    } else if (opcode == 0x1E && rep && m.mod == 3 && m.reg == 7 && m.rm == 2) {
      insn.is_endbr64 = true;
    }
  }
  return insn;
}

std::unique_ptr<InstructionDecoder> decoder_for_machine(uint16_t machine) {
  if (machine == EM_X86_64) return std::make_unique<X86_64Decoder>();
  return nullptr;
}

}  // namespace qvscan
