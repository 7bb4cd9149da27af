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
#include <memory>
#include <optional>
#include <span>

namespace qvscan {

enum class FlowKind {
  kSequential,
  kCall,          // direct near call, `target` set
  kJump,          // direct unconditional jump, `target` set
  kCondJump,      // direct conditional branch, `target` set
  kCallIndirect,  // register or memory operand; `memory_target` set when RIP-relative
  kJumpIndirect,
  kReturn,
  kTrap,  // hlt, ud2, int3
};

// A general-purpose register receiving a statically known value
// (`lea reg, [rip+disp]` or `mov reg, imm`). Register numbers follow the
// hardware encoding: 0 = rax ... 7 = rdi, 8..15 = r8..r15.
struct RegisterLoad {
  uint8_t reg = 0;
  uint64_t value = 0;
};

struct Instruction {
  uint64_t address = 0;
  uint8_t length = 0;
  FlowKind flow = FlowKind::kSequential;
  std::optional<uint64_t> target;
  std::optional<uint64_t> memory_target;
  std::optional<RegisterLoad> load;
  bool is_endbr64 = false;
  bool is_nop = false;

  uint64_t next() const { return address + length; }
};

// Decodes one instruction at the start of `code`, which is mapped at
// `address`. Returns nullopt when the bytes do not form a valid instruction
// (or are truncated).
class InstructionDecoder {
 public:
  virtual ~InstructionDecoder() = default;
  virtual std::optional<Instruction> decode(std::span<const uint8_t> code,
                                            uint64_t address) const = 0;
};

// Table-driven x86-64 length decoder that classifies control flow. It knows
// operand layouts for the legacy, 0F, 0F38, 0F3A, VEX, EVEX and XOP maps but
// does not track semantics beyond what callgraph recovery needs.
class X86_64Decoder final : public InstructionDecoder {
 public:
  std::optional<Instruction> decode(std::span<const uint8_t> code,
                                    uint64_t address) const override;
};

// Returns a decoder for the ELF e_machine value, or nullptr if unsupported.
std::unique_ptr<InstructionDecoder> decoder_for_machine(uint16_t machine);

}  // namespace qvscan
