#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "tapc/action.hpp"
#include "tapc/result.hpp"
#include "tapc/state.hpp"

namespace tapc {

// Lifecycle operations. Each validates its whole precondition list before
// touching the state, so an Err return leaves the state byte-identical.
// The spec-facing pure transition is apply() below.

OpResult op_launch(PlatformState& st, const LaunchArgs& a);
OpResult op_destroy(PlatformState& st, EnclaveId eid);
OpResult op_enter(PlatformState& st, EnclaveId eid);
OpResult op_exit(PlatformState& st);
OpResult op_pause(PlatformState& st);
OpResult op_resume(PlatformState& st, EnclaveId eid);

// Freeze e_curr as a sharing root: marks it a snapshot, saves the given
// continuation, hands control back to the OS. Callers pass the pc the
// resumed clones should start from (the SNAP instruction passes pc+2).
OpResult op_snapshot(PlatformState& st, std::optional<VirtAddr> resume_pc = {});

struct CloneStats {
  uint32_t pages_copied = 0;
};

OpResult op_clone(PlatformState& st, const CloneArgs& a,
                  CloneStats* stats = nullptr);

// Frames op_clone would copy for this parent: private mapped VAs whose
// backing frame is not owned by the root snapshot the child would share.
// For a snapshot parent that is everything shared (0 copies); for a plain
// parent it is every private mapped page.
uint32_t required_copy_count(const PlatformState& st, EnclaveId parent);

// |x_p| covers the eager part of the clone.
bool sufficient_mem(const PlatformState& st, EnclaveId parent,
                    const std::vector<PhysAddr>& x_p);

// One transition of the labelled system: dispatches the action, returning
// the successor state and the result. On any Err the returned state is the
// input state unchanged. Compute steps go through enclave_step (a Fault is
// a successful transition whose outcome reports the fault).
std::pair<PlatformState, OpResult> apply(const PlatformState& st,
                                         const Action& a);

// In-place variant used by the hot loops; same contract.
OpResult apply_mut(PlatformState& st, const Action& a);

struct TraceStep {
  PlatformState state;   // state the action was applied to
  Action action;
  OpResult result;
};

struct Trace {
  std::vector<TraceStep> steps;
  PlatformState final_state;
};

}  // namespace tapc
