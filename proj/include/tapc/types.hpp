#pragma once

#include <cstdint>
#include <string>

namespace tapc {

using Word = uint32_t;
using VirtAddr = uint32_t;
using PhysAddr = uint32_t;

// Enclave identifiers. 0 is the OS, [1, max_enclaves] are enclaves, and
// 0xffffffff is the invalid sentinel used for "no root snapshot".
struct EnclaveId {
  uint32_t raw = 0;

  static constexpr EnclaveId os() { return EnclaveId{0}; }
  static constexpr EnclaveId invalid() { return EnclaveId{0xffffffffu}; }
  static constexpr EnclaveId enclave(uint32_t n) { return EnclaveId{n}; }

  constexpr bool is_os() const { return raw == 0; }
  constexpr bool is_invalid() const { return raw == 0xffffffffu; }

  friend constexpr bool operator==(EnclaveId a, EnclaveId b) = default;
};

// Valid means "some enclave": neither the OS nor the invalid sentinel.
// Range checks against a config's max_enclaves happen at the call sites
// that index metadata.
constexpr bool is_valid(EnclaveId e) { return !e.is_os() && !e.is_invalid(); }

struct Perm {
  bool read = false;
  bool write = false;
  bool execute = false;

  friend constexpr bool operator==(Perm, Perm) = default;
};

constexpr Perm perm_r() { return {true, false, false}; }
constexpr Perm perm_rw() { return {true, true, false}; }
constexpr Perm perm_rx() { return {true, false, true}; }
constexpr Perm perm_rwx() { return {true, true, true}; }

std::string perm_to_string(Perm p);   // "rw-" style; "---" when empty
bool perm_from_string(const std::string& s, Perm& out);

// Fault injection knobs for non-vacuity checks. All default to off; the
// checking harnesses flip one at a time and must then report a violation.
// The eager reference platform ignores these.
struct Mutations {
  bool store_check_disabled = false;     // STORE skips the ev/ownership gate
  bool cow_write_through = false;        // STORE writes snapshot frames in place
  bool observe_exposes_protected = false;// observe() ignores the protected set
  bool destroy_skip_cc_guard = false;    // destroy ignores child_count
  bool destroy_skip_zeroing = false;     // destroy leaks page contents

  bool any() const {
    return store_check_disabled || cow_write_through ||
           observe_exposes_protected || destroy_skip_cc_guard ||
           destroy_skip_zeroing;
  }
};

struct PlatformConfig {
  uint32_t n_va = 4;
  uint32_t n_pa = 8;
  uint32_t n_regs = 2;
  uint32_t word_bits = 8;   // 8, 16 or 32
  uint32_t max_enclaves = 4;
  Mutations mutations;      // not part of the canonical state encoding

  Word word_mask() const {
    return word_bits >= 32 ? 0xffffffffu : ((Word{1} << word_bits) - 1);
  }

  bool valid() const {
    return n_va >= 1 && n_pa >= n_va && n_regs >= 1 && max_enclaves >= 1 &&
           (word_bits == 8 || word_bits == 16 || word_bits == 32);
  }
};

}  // namespace tapc
