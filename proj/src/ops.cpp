#include "tapc/ops.hpp"

#include <algorithm>

#include "tapc/adversary.hpp"
#include "tapc/machine.hpp"

namespace tapc {

const char* err_name(Err e) {
  switch (e) {
    case Err::Ok: return "Ok";
    case Err::NotOS: return "NotOS";
    case Err::NotEnclave: return "NotEnclave";
    case Err::InvalidId: return "InvalidId";
    case Err::NotActive: return "NotActive";
    case Err::AlreadyActive: return "AlreadyActive";
    case Err::AlreadySnapshot: return "AlreadySnapshot";
    case Err::HasRootSnapshot: return "HasRootSnapshot";
    case Err::IsSnapshot: return "IsSnapshot";
    case Err::NotPaused: return "NotPaused";
    case Err::PageNotOSOwned: return "PageNotOSOwned";
    case Err::InsufficientMemory: return "InsufficientMemory";
    case Err::SelfClone: return "SelfClone";
    case Err::SnapshotHasChildren: return "SnapshotHasChildren";
    case Err::BadArguments: return "BadArguments";
    case Err::ProtectedTarget: return "ProtectedTarget";
  }
  return "?";
}

bool err_from_name(const std::string& s, Err& out) {
  for (int i = 0; i <= int(Err::ProtectedTarget); i++) {
    if (s == err_name(Err(i))) {
      out = Err(i);
      return true;
    }
  }
  return false;
}

const char* fault_name(StepFault f) {
  switch (f) {
    case StepFault::PermDenied: return "PermDenied";
    case StepFault::Unmapped: return "Unmapped";
    case StepFault::OOM: return "OOM";
    case StepFault::BadInstr: return "BadInstr";
    case StepFault::InputExhausted: return "InputExhausted";
  }
  return "?";
}

bool fault_from_name(const std::string& s, StepFault& out) {
  for (int i = 0; i <= int(StepFault::InputExhausted); i++) {
    if (s == fault_name(StepFault(i))) {
      out = StepFault(i);
      return true;
    }
  }
  return false;
}

std::string result_to_string(const OpResult& r) {
  if (r.code != Err::Ok) return std::string("err:") + err_name(r.code);
  if (r.step) {
    switch (r.step->kind) {
      case StepOutcome::Kind::Continued: return "continued";
      case StepOutcome::Kind::Output:
        return "output:" + std::to_string(r.step->output);
      case StepOutcome::Kind::Exited: return "exited";
      case StepOutcome::Kind::Snapshotted: return "snapshotted";
      case StepOutcome::Kind::Faulted:
        return std::string("fault:") + fault_name(r.step->fault);
    }
  }
  return "ok";
}

namespace {

// Sentinel ids are InvalidId; ids beyond the configured slot count are
// malformed arguments.
std::optional<Err> check_id(const PlatformState& st, EnclaveId e) {
  if (!is_valid(e)) return Err::InvalidId;
  if (!st.in_range(e)) return Err::BadArguments;
  return std::nullopt;
}

std::vector<PhysAddr> sorted_set(std::vector<PhysAddr> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void checkpoint_os(PlatformState& st) {
  EnclaveMetadata& os = st.meta[0];
  os.pc = st.pc;
  os.regs = st.regs;
  os.table = st.active_table;
}

void restore_os(PlatformState& st) {
  const EnclaveMetadata& os = st.meta[0];
  st.pc = os.pc;
  st.regs = os.regs;
  st.active_table = os.table;
  st.e_curr = EnclaveId::os();
}

}  // namespace

OpResult op_launch(PlatformState& st, const LaunchArgs& a) {
  const PlatformConfig& cfg = st.cfg;
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, a.eid)) return OpResult::err(*e);
  if (a.ep >= cfg.n_va) return OpResult::err(Err::BadArguments);
  for (const auto& m : a.map)
    if (m.va >= cfg.n_va || m.pa >= cfg.n_pa)
      return OpResult::err(Err::BadArguments);
  for (VirtAddr v : a.ev)
    if (v >= cfg.n_va) return OpResult::err(Err::BadArguments);
  for (PhysAddr p : a.pages)
    if (p >= cfg.n_pa) return OpResult::err(Err::BadArguments);
  if (is_active(st, a.eid)) return OpResult::err(Err::AlreadyActive);

  std::vector<PhysAddr> pages = sorted_set(a.pages);
  for (PhysAddr p : pages)
    if (!st.owner[p].is_os()) return OpResult::err(Err::PageNotOSOwned);

  // Build the per-VA table; duplicate map entries are contradictory.
  std::vector<PageEntry> table(cfg.n_va);
  std::vector<uint8_t> ev(cfg.n_va, 0);
  for (const auto& m : a.map) {
    if (table[m.va].mapped) return OpResult::err(Err::BadArguments);
    table[m.va] = PageEntry{true, m.pa, m.perm};
  }
  for (VirtAddr v : a.ev) ev[v] = 1;

  // Private mapped VAs must target the granted frames, injectively, and
  // the entrypoint must be private, mapped and executable.
  std::vector<uint8_t> page_set(cfg.n_pa, 0);
  for (PhysAddr p : pages) page_set[p] = 1;
  std::vector<uint8_t> used(cfg.n_pa, 0);
  for (uint32_t v = 0; v < cfg.n_va; v++) {
    if (!ev[v] || !table[v].mapped) continue;
    PhysAddr p = table[v].pa;
    if (!page_set[p] || used[p]) return OpResult::err(Err::BadArguments);
    used[p] = 1;
  }
  if (!table[a.ep].mapped || !ev[a.ep] || !table[a.ep].perm.execute)
    return OpResult::err(Err::BadArguments);

  for (PhysAddr p : pages) st.owner[p] = a.eid;
  EnclaveMetadata& md = st.md(a.eid);
  md = blank_metadata(cfg);
  md.active = true;
  md.ep = a.ep;
  md.table = std::move(table);
  md.ev = std::move(ev);
  md.pc = a.ep;
  md.measurement = measure(cfg, *project_enclave(st, a.eid));
  return OpResult::success();
}

OpResult op_destroy(PlatformState& st, EnclaveId eid) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, eid)) return OpResult::err(*e);
  if (!is_active(st, eid)) return OpResult::err(Err::NotActive);
  EnclaveMetadata& md = st.md(eid);
  if (md.child_count > 0 && !st.cfg.mutations.destroy_skip_cc_guard)
    return OpResult::err(Err::SnapshotHasChildren);

  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (st.owner[p] == eid) {
      if (!st.cfg.mutations.destroy_skip_zeroing) st.mem[p] = 0;
      st.owner[p] = EnclaveId::os();
    }
  }
  EnclaveId rs = md.root_snapshot;
  if (is_valid(rs) && st.in_range(rs) && st.md(rs).child_count > 0)
    st.md(rs).child_count--;
  md = blank_metadata(st.cfg);
  st.input[eid.raw] = Tape{};
  st.output[eid.raw].clear();
  return OpResult::success();
}

OpResult op_enter(PlatformState& st, EnclaveId eid) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, eid)) return OpResult::err(*e);
  if (!is_active(st, eid)) return OpResult::err(Err::NotActive);
  EnclaveMetadata& md = st.md(eid);
  if (md.is_snapshot) return OpResult::err(Err::IsSnapshot);
  if (md.paused) return OpResult::err(Err::BadArguments);

  checkpoint_os(st);
  st.active_table = md.table;
  st.pc = md.ep;
  st.regs = md.regs;
  st.e_curr = eid;
  return OpResult::success();
}

OpResult op_resume(PlatformState& st, EnclaveId eid) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, eid)) return OpResult::err(*e);
  if (!is_active(st, eid)) return OpResult::err(Err::NotActive);
  EnclaveMetadata& md = st.md(eid);
  if (md.is_snapshot) return OpResult::err(Err::IsSnapshot);
  if (!md.paused) return OpResult::err(Err::NotPaused);

  checkpoint_os(st);
  st.active_table = md.table;
  st.pc = md.pc;
  st.regs = md.regs;
  md.paused = false;
  st.e_curr = eid;
  return OpResult::success();
}

OpResult op_exit(PlatformState& st) {
  if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
  // The continuation is dropped: the enclave re-enters from ep next time.
  restore_os(st);
  return OpResult::success();
}

OpResult op_pause(PlatformState& st) {
  if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
  EnclaveMetadata& md = st.md(st.e_curr);
  md.pc = st.pc;
  md.regs = st.regs;
  md.paused = true;
  restore_os(st);
  return OpResult::success();
}

OpResult op_snapshot(PlatformState& st, std::optional<VirtAddr> resume_pc) {
  if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
  EnclaveMetadata& md = st.md(st.e_curr);
  if (md.is_snapshot) return OpResult::err(Err::AlreadySnapshot);
  if (is_valid(md.root_snapshot)) return OpResult::err(Err::HasRootSnapshot);

  // The permission map is left as-is: a snapshot never executes again and
  // no agent may write its frames (descendant stores are redirected by
  // CoW, tampers reject snapshot-owned targets), which is what makes the
  // frozen image read-only in effect. Clones inherit the map unchanged.
  md.is_snapshot = true;
  md.pc = resume_pc.value_or(st.pc);
  md.regs = st.regs;
  md.paused = true;
  restore_os(st);
  return OpResult::success();
}

uint32_t required_copy_count(const PlatformState& st, EnclaveId parent) {
  if (!is_active(st, parent)) return 0;
  const EnclaveMetadata& pm = st.md(parent);
  EnclaveId rs_child = pm.is_snapshot ? parent : pm.root_snapshot;
  uint32_t n = 0;
  for (uint32_t v = 0; v < st.cfg.n_va; v++) {
    if (!pm.ev[v] || !pm.table[v].mapped) continue;
    if (!(is_valid(rs_child) && st.owner[pm.table[v].pa] == rs_child)) n++;
  }
  return n;
}

bool sufficient_mem(const PlatformState& st, EnclaveId parent,
                    const std::vector<PhysAddr>& x_p) {
  if (!is_active(st, parent)) return false;
  return sorted_set(x_p).size() >= required_copy_count(st, parent);
}

OpResult op_clone(PlatformState& st, const CloneArgs& a, CloneStats* stats) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, a.parent)) return OpResult::err(*e);
  if (auto e = check_id(st, a.child)) return OpResult::err(*e);
  if (a.child == a.parent) return OpResult::err(Err::SelfClone);
  if (!is_active(st, a.parent)) return OpResult::err(Err::NotActive);
  if (is_active(st, a.child)) return OpResult::err(Err::AlreadyActive);
  for (PhysAddr p : a.pages)
    if (p >= st.cfg.n_pa) return OpResult::err(Err::BadArguments);
  std::vector<PhysAddr> x_p = sorted_set(a.pages);
  for (PhysAddr p : x_p)
    if (!st.owner[p].is_os()) return OpResult::err(Err::PageNotOSOwned);
  uint32_t required = required_copy_count(st, a.parent);
  if (x_p.size() < required) return OpResult::err(Err::InsufficientMemory);

  const EnclaveMetadata& pm = st.md(a.parent);
  EnclaveId rs_child = pm.is_snapshot ? a.parent : pm.root_snapshot;
  if (is_valid(rs_child) && !st.in_range(rs_child))
    rs_child = EnclaveId::invalid();

  for (PhysAddr p : x_p) st.owner[p] = a.child;

  EnclaveMetadata& cm = st.md(a.child);
  cm = blank_metadata(st.cfg);
  cm.active = true;
  cm.ep = pm.ep;
  cm.table = pm.table;
  cm.ev = pm.ev;
  cm.pc = pm.pc;
  cm.regs = pm.regs;
  cm.paused = pm.paused;
  cm.measurement = pm.measurement;
  cm.root_snapshot = rs_child;
  for (PhysAddr p : x_p) cm.pa_free[p] = 1;
  if (is_valid(rs_child)) st.md(rs_child).child_count++;

  // Eager part: private pages the child cannot share (not owned by its
  // root snapshot) are copied to the lowest-index reserved frames, in VA
  // order. Shared frames keep the parent's mapping.
  uint32_t copied = 0;
  for (uint32_t v = 0; v < st.cfg.n_va; v++) {
    if (!cm.ev[v] || !cm.table[v].mapped) continue;
    PhysAddr src = cm.table[v].pa;
    if (is_valid(rs_child) && st.owner[src] == rs_child) continue;
    PhysAddr q = 0;
    while (!cm.pa_free[q]) q++;   // guaranteed by sufficient_mem
    cm.pa_free[q] = 0;
    st.mem[q] = st.mem[src];
    cm.table[v].pa = q;
    copied++;
  }
  if (stats) stats->pages_copied = copied;
  return OpResult::success();
}

OpResult apply_mut(PlatformState& st, const Action& a) {
  return std::visit(
      [&st](const auto& args) -> OpResult {
        using T = std::decay_t<decltype(args)>;
        if constexpr (std::is_same_v<T, LaunchArgs>) {
          return op_launch(st, args);
        } else if constexpr (std::is_same_v<T, DestroyArgs>) {
          return op_destroy(st, args.eid);
        } else if constexpr (std::is_same_v<T, EnterArgs>) {
          return op_enter(st, args.eid);
        } else if constexpr (std::is_same_v<T, ExitArgs>) {
          return op_exit(st);
        } else if constexpr (std::is_same_v<T, PauseArgs>) {
          return op_pause(st);
        } else if constexpr (std::is_same_v<T, ResumeArgs>) {
          return op_resume(st, args.eid);
        } else if constexpr (std::is_same_v<T, SnapshotArgs>) {
          return op_snapshot(st);
        } else if constexpr (std::is_same_v<T, CloneArgs>) {
          return op_clone(st, args);
        } else if constexpr (std::is_same_v<T, StepArgs>) {
          if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
          OpResult r;
          r.step = enclave_step(st);
          return r;
        } else {
          static_assert(std::is_same_v<T, AdversaryArgs>);
          return adversary_execute(st, args.protected_eid, args.act);
        }
      },
      a.v);
}

std::pair<PlatformState, OpResult> apply(const PlatformState& st,
                                         const Action& a) {
  PlatformState next = st;
  OpResult r = apply_mut(next, a);
  if (!r.ok()) return {st, r};   // structural atomicity on errors
  return {std::move(next), r};
}

}  // namespace tapc
