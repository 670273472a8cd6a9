#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "tapc/types.hpp"

namespace tapc {

struct LaunchArgs {
  EnclaveId eid;
  VirtAddr ep = 0;
  struct Mapping {
    VirtAddr va = 0;
    PhysAddr pa = 0;
    Perm perm;
    friend bool operator==(const Mapping&, const Mapping&) = default;
  };
  std::vector<Mapping> map;        // sorted by va, unique
  std::vector<VirtAddr> ev;        // private VAs, sorted unique
  std::vector<PhysAddr> pages;     // frames granted to the enclave

  friend bool operator==(const LaunchArgs&, const LaunchArgs&) = default;
};

struct DestroyArgs {
  EnclaveId eid;
  friend bool operator==(const DestroyArgs&, const DestroyArgs&) = default;
};

struct EnterArgs {
  EnclaveId eid;
  friend bool operator==(const EnterArgs&, const EnterArgs&) = default;
};

struct ExitArgs {
  friend bool operator==(const ExitArgs&, const ExitArgs&) = default;
};

struct PauseArgs {
  friend bool operator==(const PauseArgs&, const PauseArgs&) = default;
};

struct ResumeArgs {
  EnclaveId eid;
  friend bool operator==(const ResumeArgs&, const ResumeArgs&) = default;
};

struct SnapshotArgs {
  friend bool operator==(const SnapshotArgs&, const SnapshotArgs&) = default;
};

struct CloneArgs {
  EnclaveId parent;
  EnclaveId child;
  std::vector<PhysAddr> pages;     // x_p, the frames granted to the child

  friend bool operator==(const CloneArgs&, const CloneArgs&) = default;
};

struct StepArgs {
  friend bool operator==(const StepArgs&, const StepArgs&) = default;
};

struct Action;

// What the OS-level attacker can do between enclave steps. CallOp wraps a
// non-adversary platform action (the OS interface is the attack surface).
struct AdversaryAction {
  enum class Kind : uint8_t { TamperMem, TamperPageTable, CallOp, Observe };
  Kind kind = Kind::Observe;
  PhysAddr pa = 0;     // TamperMem
  Word value = 0;      // TamperMem
  VirtAddr va = 0;     // TamperPageTable
  PhysAddr pt_pa = 0;  // TamperPageTable
  Perm perm;           // TamperPageTable
  std::shared_ptr<const Action> call;  // CallOp

  static AdversaryAction tamper_mem(PhysAddr p, Word w);
  static AdversaryAction tamper_page_table(VirtAddr v, PhysAddr p, Perm perm);
  static AdversaryAction call_op(Action a);
  static AdversaryAction observe_now();
};

bool operator==(const AdversaryAction& a, const AdversaryAction& b);

// protected_eid names the enclave whose protected set bounds the tamper;
// the invalid sentinel means "protect every enclave" (tampers must hit
// OS-owned pages), the mode functional-equivalence runs use.
struct AdversaryArgs {
  AdversaryAction act;
  EnclaveId protected_eid = EnclaveId::invalid();

  friend bool operator==(const AdversaryArgs& a, const AdversaryArgs& b) {
    return a.act == b.act && a.protected_eid == b.protected_eid;
  }
};

struct Action {
  std::variant<LaunchArgs, DestroyArgs, EnterArgs, ExitArgs, PauseArgs,
               ResumeArgs, SnapshotArgs, CloneArgs, StepArgs, AdversaryArgs>
      v;

  friend bool operator==(const Action& a, const Action& b) { return a.v == b.v; }
};

inline AdversaryAction AdversaryAction::tamper_mem(PhysAddr p, Word w) {
  AdversaryAction a;
  a.kind = Kind::TamperMem;
  a.pa = p;
  a.value = w;
  return a;
}

inline AdversaryAction AdversaryAction::tamper_page_table(VirtAddr v, PhysAddr p,
                                                          Perm perm) {
  AdversaryAction a;
  a.kind = Kind::TamperPageTable;
  a.va = v;
  a.pt_pa = p;
  a.perm = perm;
  return a;
}

inline AdversaryAction AdversaryAction::call_op(Action inner) {
  AdversaryAction a;
  a.kind = Kind::CallOp;
  a.call = std::make_shared<const Action>(std::move(inner));
  return a;
}

inline AdversaryAction AdversaryAction::observe_now() { return {}; }

inline bool operator==(const AdversaryAction& a, const AdversaryAction& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case AdversaryAction::Kind::TamperMem:
      return a.pa == b.pa && a.value == b.value;
    case AdversaryAction::Kind::TamperPageTable:
      return a.va == b.va && a.pt_pa == b.pt_pa && a.perm == b.perm;
    case AdversaryAction::Kind::CallOp:
      if (!a.call || !b.call) return a.call == b.call;
      return *a.call == *b.call;
    case AdversaryAction::Kind::Observe:
      return true;
  }
  return false;
}

}  // namespace tapc
