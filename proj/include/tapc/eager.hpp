#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tapc/action.hpp"
#include "tapc/result.hpp"
#include "tapc/state.hpp"

namespace tapc {

// Independent re-implementation of the platform used as a differential
// oracle. The observable contract is identical to the lazy platform; the
// memory strategy is the opposite: every enclave keeps its private content
// per VA and clone copies all of it immediately, so there is no
// copy-on-write machinery to share bugs with. Frame grants and the owner
// map still evolve the same way (they are OS-visible resource accounting),
// and a per-enclave reserve keeps OOM timing aligned with the success
// condition cloning was checked against. cfg.mutations is ignored, which
// is what makes injected faults visible as lazy/eager mismatches.
struct EagerEnclave {
  bool active = false;
  VirtAddr ep = 0;
  std::vector<uint8_t> mapped;   // per VA
  std::vector<PhysAddr> pa;      // per VA, used for windows and accounting
  std::vector<Perm> perm;        // per VA
  std::vector<uint8_t> ev;       // per VA
  std::vector<Word> vmem;        // per VA, content of private mapped pages
  VirtAddr pc = 0;
  std::vector<Word> regs;
  bool paused = false;
  bool is_snapshot = false;
  uint64_t child_count = 0;
  EnclaveId root_snapshot = EnclaveId::invalid();
  std::vector<PhysAddr> reserve; // unconsumed granted frames, ascending
  Measurement measurement;
};

struct EagerState {
  PlatformConfig cfg;
  VirtAddr pc = 0;                    // live context
  std::vector<Word> regs;
  std::vector<Word> mem;              // per PA, the OS-visible layer
  std::vector<PageEntry> os_table;    // the OS's live table
  VirtAddr os_pc = 0;                 // OS context saved while an enclave runs
  std::vector<Word> os_regs;
  EnclaveId e_curr = EnclaveId::os();
  std::vector<EnclaveId> owner;       // per PA
  std::vector<EagerEnclave> enc;      // [0] unused
  std::vector<Tape> input;
  std::vector<std::vector<Word>> output;

  EagerEnclave& md(EnclaveId e) { return enc[e.raw]; }
  const EagerEnclave& md(EnclaveId e) const { return enc[e.raw]; }
  bool in_range(EnclaveId e) const {
    return e.raw >= 1 && e.raw <= cfg.max_enclaves;
  }
};

EagerState eager_initial(const PlatformConfig& cfg);

// Same view type as the lazy platform so projections compare directly.
std::optional<EnclaveStateView> eager_project(const EagerState& st,
                                              EnclaveId e);

Observation eager_observe_unowned(const EagerState& st);

// Applies one action with the same dispatch, guard order and result codes
// as the lazy platform's apply_mut.
OpResult eager_apply(EagerState& st, const Action& a);

}  // namespace tapc
