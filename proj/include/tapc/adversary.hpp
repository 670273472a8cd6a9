#pragma once

#include <cstdint>
#include <vector>

#include "tapc/action.hpp"
#include "tapc/result.hpp"
#include "tapc/state.hpp"

namespace tapc {

// SplitMix64; the one stream every seeded component draws from.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

  uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Modulo-reduced draw; the bias is irrelevant at the ranges used here.
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

  bool chance(uint32_t percent) { return below(100) < percent; }
};

struct AdversarySchedule {
  uint64_t seed = 0;
  std::vector<AdversaryAction> actions;
};

// Deterministic in (seed, cfg, length): uniform over the four action kinds,
// arguments uniform over the config's ranges. CallOp draws uniformly over
// the nine platform operations with in-range arguments (launch and clone
// get small structured maps/frame sets).
AdversarySchedule generate_schedule(uint64_t seed, const PlatformConfig& cfg,
                                    uint32_t length);

// Execute one adversary action. Preconditions: the OS is executing
// (NotOS otherwise). TamperMem writes only outside the protected
// boundary: the protected enclave's pages (protected_eid valid), or all
// enclave pages (protected_eid invalid, "protect everything"), and never
// a frame owned by an active snapshot. TamperPageTable rewrites the live
// OS table entry. CallOp dispatches through apply. Observe returns the
// observation in the result without touching the state.
OpResult adversary_execute(PlatformState& st, EnclaveId protected_eid,
                           const AdversaryAction& act);

// Family form used by the lockstep harness once clones widen the protected
// set: TamperMem is denied on any member's protected pages, Observe blanks
// the union. An empty set protects nothing beyond active snapshots.
OpResult adversary_execute(PlatformState& st,
                           const std::vector<EnclaveId>& protected_set,
                           const AdversaryAction& act);

}  // namespace tapc
