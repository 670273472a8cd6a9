#pragma once

#include <optional>

#include "tapc/result.hpp"
#include "tapc/state.hpp"

namespace tapc {

// Two-word instructions: an opcode word followed by one operand word.
// The operand packs up to two fields, field0 in the low half of the word
// and field1 in the high half.
//
//   0x01 LOADI r imm   regs[r] = imm
//   0x02 LOAD  r va    regs[r] = word read through va
//   0x03 STORE r va    write regs[r] through va (CoW on shared frames)
//   0x04 ADD   r1 r2   regs[r1] += regs[r2] (mod 2^word_bits)
//   0x05 JNZ   r va    pc = va when regs[r] != 0
//   0x06 IN    r       regs[r] = next input word
//   0x07 OUT   r       append regs[r] to the output tape
//   0x08 SNAP          freeze self as a snapshot (continuation pc+2)
//   0x09 EXIT          return control to the OS
enum class Opcode : uint8_t {
  LOADI = 0x01,
  LOAD = 0x02,
  STORE = 0x03,
  ADD = 0x04,
  JNZ = 0x05,
  IN = 0x06,
  OUT = 0x07,
  SNAP = 0x08,
  EXIT = 0x09,
};

struct Instruction {
  Opcode op = Opcode::EXIT;
  uint32_t a = 0;   // register index, or r1
  uint32_t b = 0;   // immediate, va, or r2

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

// Operand fields must fit the half-word; register and VA fields must be in
// range for the config. Encode refuses instructions that do not fit,
// decode refuses words that name out-of-range fields or unknown opcodes.
std::optional<std::pair<Word, Word>> encode(const PlatformConfig& cfg,
                                            const Instruction& ins);
std::optional<Instruction> decode(const PlatformConfig& cfg, Word w0, Word w1);

// Redirect a write on a shared frame: take the lowest-index frame from the
// enclave's reserve, copy the shared word, remap only the faulting VA.
// Fails (OOM) when the reserve is empty. Preconditions: e runs, va is
// mapped and its backing frame is owned by e's root snapshot.
OpResult op_cow_fault(PlatformState& st, EnclaveId e, VirtAddr va);

// One compute step of the running enclave. Faults revert the step and then
// take the pause path (control to the OS, continuation at the faulting
// instruction) — except a SNAP that fails its success condition, which
// reverts and leaves the enclave running. Access rules:
//   fetch  pc and pc+1 mapped, private, executable
//   LOAD   read perm; private VAs read their own/shared frame, non-private
//          VAs are windows and read OS-owned frames only
//   STORE  write perm, private; shared frames trigger CoW; after CoW the
//          frame must be self-owned
StepOutcome enclave_step(PlatformState& st);

}  // namespace tapc
