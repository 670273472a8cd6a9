#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tapc/adversary.hpp"
#include "tapc/measure.hpp"
#include "tapc/ops.hpp"
#include "tapc/state.hpp"

namespace tapc {

struct Violation {
  std::string property;     // predicate that failed
  uint64_t state_index = 0; // which visited state / trial step tripped it
  std::string witness;      // human-readable detail (ids, addresses, values)
  std::string scenario;     // replayable scenario text, empty if not derivable
};

struct InvariantReport {
  uint64_t states_checked = 0;
  uint64_t trials = 0;
  bool budget_exceeded = false;
  bool misuse = false;          // a harness assumption was violated
  std::string misuse_detail;
  std::vector<Violation> violations;

  bool all_pass() const {
    return violations.empty() && !misuse && !budget_exceeded;
  }
  // Deterministic rendering: reports for equal inputs are byte-identical.
  std::string to_text() const;
};

// Platform invariants, checked on one state:
//   ep-owned            entrypoint backing frame owned by e or its root
//   private-owned       every mapped private frame owned by e or its root
//   free-owned          frames reserved for e are owned by e
//   root-not-self       no enclave is its own root snapshot
//   snapshot-no-root    snapshots have no root snapshot
//   root-is-snapshot    a root is an active snapshot with child_count > 0
//   no-running-snapshot the executing enclave is active and not a snapshot
// plus artifact invariants:
//   ownership-partition every frame is owned by the OS or an active enclave
//   refcount-exact      child_count equals the live count of sharers
//   private-injective   an enclave's mapped private VAs hit distinct frames
//   inactive-blank      inactive metadata slots are all-default
//   active-table-sync   the installed table equals the runner's metadata
InvariantReport check_invariants(const PlatformState& st);

// Accumulating form used by the explorer and harness loops; index labels
// the state in the violation records.
void check_invariants_into(const PlatformState& st, uint64_t index,
                           InvariantReport& rep);

// measure_1 as a checkable biconditional: equal measurements iff equal
// views. Returns whether it held; nullopt when either view is not initial.
std::optional<bool> check_measurement_pair(const PlatformConfig& cfg,
                                           const EnclaveStateView& a,
                                           const EnclaveStateView& b);

// Randomized measure_1 suite: `pairs` random initial-view pairs, each also
// re-checked under a sweep of single-field mutants.
InvariantReport measurement_pair_suite(uint64_t seed, uint64_t pairs);

enum class TwoTraceMode { Measurement, Integrity, Confidentiality };

// One seeded lockstep pair: build two platforms, drive both with the same
// event schedule, compare after every event.
//   Integrity      same protected program and tapes; the traces differ in
//                  adversary memory outside the protected frames. Asserts
//                  protected E-views, output tapes and input positions are
//                  equal at every step.
//   Measurement    integrity's check with different protected ids on the
//                  two traces (same launch arguments); additionally asserts
//                  measurement equality and clone inheritance.
//   Confidentiality same program; the traces differ only in the initial
//                  word of a designated secret private VA that the program
//                  never outputs. Asserts adversary projections are equal
//                  at every step; divergent protected output tapes mean the
//                  generated program leaked and are reported as misuse.
struct TwoTraceConfig {
  TwoTraceMode mode = TwoTraceMode::Integrity;
  PlatformConfig cfg;       // mutations here apply to both traces
  uint64_t seed = 0;
  uint32_t events = 24;     // schedule length per trial
};

// Smallest shape the harness lays its fixed frame map onto (12 VAs, 24
// frames, 2 registers, 8-bit words, 4 enclave slots). run_two_trace reports
// misuse on anything smaller.
PlatformConfig two_trace_config();

InvariantReport run_two_trace(const TwoTraceConfig& tt);

// Suite: `trials` independent seeded trials; stops at the first violation.
InvariantReport two_trace_suite(TwoTraceMode mode, const PlatformConfig& cfg,
                                uint64_t seed, uint64_t trials,
                                uint32_t events);

// Differential check against the eager-copy oracle: identical random action
// sequences on the lazy platform and the eager platform must give identical
// results, observations, E-views, tapes, and faults at every step. The
// eager platform ignores cfg.mutations, so any mutation shows up here.
InvariantReport oracle_equivalence(const PlatformConfig& cfg, uint64_t seed,
                                   uint64_t trials, uint32_t len);

// Bounded exhaustive exploration: BFS over a curated but complete action
// alphabet (launch shapes over all frame choices, all lifecycle ops, clones
// over small grants, tampers over tamper_words), invariant-checking every
// deduplicated state.
struct ExploreConfig {
  PlatformConfig cfg;
  uint32_t depth = 4;
  uint64_t state_cap = 500000;
  std::vector<Word> tamper_words = {0, 1};
};

struct ExploreReport {
  InvariantReport inv;
  uint64_t unique_states = 0;
  uint64_t transitions = 0;
  uint32_t depth_reached = 0;
};

ExploreReport explore(const ExploreConfig& ec);

}  // namespace tapc
