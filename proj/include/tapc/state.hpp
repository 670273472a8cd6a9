#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tapc/measure.hpp"
#include "tapc/types.hpp"

namespace tapc {

// One page-table entry. Unmapped entries are normalized to pa=0, perm={}
// so that defaulted equality and the canonical encoding agree.
struct PageEntry {
  bool mapped = false;
  PhysAddr pa = 0;
  Perm perm;

  friend bool operator==(const PageEntry&, const PageEntry&) = default;
};

// Input tape: the words an enclave consumes through IN. pos advances,
// the prefix is kept so traces stay replayable.
struct Tape {
  std::vector<Word> words;
  size_t pos = 0;

  bool exhausted() const { return pos >= words.size(); }

  friend bool operator==(const Tape&, const Tape&) = default;
};

// Per-enclave security-monitor metadata. Index 0 of PlatformState::meta
// reuses this record as the OS context checkpoint (table + pc + regs).
// Inactive slots stay all-default (zeroed vectors sized to the config).
struct EnclaveMetadata {
  bool active = false;
  VirtAddr ep = 0;
  std::vector<PageEntry> table;   // per VA: am_pa + am_perm
  std::vector<uint8_t> ev;        // per VA: private flag
  VirtAddr pc = 0;
  std::vector<Word> regs;
  bool paused = false;
  bool is_snapshot = false;
  uint64_t child_count = 0;       // refcount held on *this* root snapshot
  EnclaveId root_snapshot = EnclaveId::invalid();
  std::vector<uint8_t> pa_free;   // per PA: reserved for this enclave's CoW
  Measurement measurement;

  friend bool operator==(const EnclaveMetadata&, const EnclaveMetadata&) = default;
};

struct PlatformState {
  PlatformConfig cfg;
  VirtAddr pc = 0;                    // active context
  std::vector<Word> regs;
  std::vector<Word> mem;              // per PA
  std::vector<PageEntry> active_table;// per VA, installed for e_curr
  EnclaveId e_curr = EnclaveId::os();
  std::vector<EnclaveId> owner;       // per PA
  std::vector<EnclaveMetadata> meta;  // [0] = OS checkpoint, [1..max_enclaves]
  std::vector<Tape> input;            // per enclave id ([0] unused)
  std::vector<std::vector<Word>> output;

  EnclaveMetadata& md(EnclaveId e) { return meta[e.raw]; }
  const EnclaveMetadata& md(EnclaveId e) const { return meta[e.raw]; }

  bool in_range(EnclaveId e) const {
    return e.raw >= 1 && e.raw <= cfg.max_enclaves;
  }

  friend bool operator==(const PlatformState&, const PlatformState&) = default;
};

// Fresh platform: OS running with empty context, all pages OS-owned and
// zeroed, every enclave slot inactive.
PlatformState initial_state(const PlatformConfig& cfg);

// Metadata record sized for cfg with everything defaulted; what inactive
// slots must equal at all times.
EnclaveMetadata blank_metadata(const PlatformConfig& cfg);

bool is_active(const PlatformState& st, EnclaveId e);

// The enclave-visible state. Physical placement is deliberately absent:
// per VA we keep mapped/perm/ev plus the content seen through the
// enclave's own table, so views of two enclaves at different frames
// compare equal when they are logically identical.
struct VaView {
  bool mapped = false;
  Perm perm;
  bool ev = false;
  std::optional<Word> value;   // engaged iff ev and mapped

  friend bool operator==(const VaView&, const VaView&) = default;
};

struct EnclaveStateView {
  VirtAddr ep = 0;
  VirtAddr pc = 0;
  std::vector<Word> regs;
  std::vector<VaView> va;

  friend bool operator==(const EnclaveStateView&, const EnclaveStateView&) = default;
};

// What the adversary sees: one word per PA, blanked out (nullopt) exactly
// on the protected pages.
struct Observation {
  std::vector<std::optional<Word>> view;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Pages the platform shields for e: those owned by e and, when e has a
// root snapshot, those owned by it (shared frames hold e's data).
// nullopt when e is not a valid in-range enclave.
std::optional<std::vector<uint8_t>> protected_mask(const PlatformState& st,
                                                   EnclaveId e);

// nullopt unless e is valid, in range and active.
std::optional<EnclaveStateView> project_enclave(const PlatformState& st,
                                                EnclaveId e);

// Adversary view relative to protected enclave e (nullopt when e is not a
// valid in-range enclave). With cfg.mutations.observe_exposes_protected the
// blanking is skipped — the hook the confidentiality suite must catch.
std::optional<Observation> observe(const PlatformState& st, EnclaveId e);

// Union variant for a family of protected enclaves: blanks every member's
// protected pages. Members that are invalid or out of range contribute
// nothing. The observe_exposes_protected hook applies here too.
Observation observe_many(const PlatformState& st,
                         const std::vector<EnclaveId>& prot);

// Protect-everything variant used by functional-equivalence runs: only
// OS-owned pages are visible.
Observation observe_unowned(const PlatformState& st);

// Canonical byte encoding of the full state (config shape, memory, owner
// map, contexts, metadata, tapes). Mutations are excluded. Equal states
// yield equal bytes and vice versa.
std::vector<uint8_t> serialize_state(const PlatformState& st);

uint64_t state_digest(const PlatformState& st);

// Second independent 64-bit hash (FNV-1 with a different basis) so the
// explorer can dedup on 128 bits without storing full encodings.
uint64_t state_digest2(const std::vector<uint8_t>& bytes);

}  // namespace tapc
