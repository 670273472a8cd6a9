#include "tapc/eager.hpp"

#include <algorithm>

#include "tapc/machine.hpp"
#include "tapc/measure.hpp"
#include "tapc/ops.hpp"

namespace tapc {

namespace {

EagerEnclave blank_eager(const PlatformConfig& cfg) {
  EagerEnclave e;
  e.mapped.assign(cfg.n_va, 0);
  e.pa.assign(cfg.n_va, 0);
  e.perm.assign(cfg.n_va, Perm{});
  e.ev.assign(cfg.n_va, 0);
  e.vmem.assign(cfg.n_va, 0);
  e.regs.assign(cfg.n_regs, 0);
  return e;
}

std::optional<Err> check_id(const EagerState& st, EnclaveId e) {
  if (!is_valid(e)) return Err::InvalidId;
  if (!st.in_range(e)) return Err::BadArguments;
  return std::nullopt;
}

bool active(const EagerState& st, EnclaveId e) {
  return is_valid(e) && st.in_range(e) && st.md(e).active;
}

std::vector<PhysAddr> sorted_set(std::vector<PhysAddr> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void restore_os(EagerState& st) {
  st.pc = st.os_pc;
  st.regs = st.os_regs;
  st.e_curr = EnclaveId::os();
}

uint32_t required_copies(const EagerState& st, EnclaveId parent) {
  const EagerEnclave& pm = st.md(parent);
  EnclaveId rs_child = pm.is_snapshot ? parent : pm.root_snapshot;
  uint32_t n = 0;
  for (uint32_t v = 0; v < st.cfg.n_va; v++) {
    if (!pm.ev[v] || !pm.mapped[v]) continue;
    if (!(is_valid(rs_child) && st.owner[pm.pa[v]] == rs_child)) n++;
  }
  return n;
}

OpResult launch(EagerState& st, const LaunchArgs& a) {
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
  if (active(st, a.eid)) return OpResult::err(Err::AlreadyActive);

  std::vector<PhysAddr> pages = sorted_set(a.pages);
  for (PhysAddr p : pages)
    if (!st.owner[p].is_os()) return OpResult::err(Err::PageNotOSOwned);

  EagerEnclave m = blank_eager(cfg);
  for (const auto& e : a.map) {
    if (m.mapped[e.va]) return OpResult::err(Err::BadArguments);
    m.mapped[e.va] = 1;
    m.pa[e.va] = e.pa;
    m.perm[e.va] = e.perm;
  }
  for (VirtAddr v : a.ev) m.ev[v] = 1;

  std::vector<uint8_t> page_set(cfg.n_pa, 0);
  for (PhysAddr p : pages) page_set[p] = 1;
  std::vector<uint8_t> used(cfg.n_pa, 0);
  for (uint32_t v = 0; v < cfg.n_va; v++) {
    if (!m.ev[v] || !m.mapped[v]) continue;
    PhysAddr p = m.pa[v];
    if (!page_set[p] || used[p]) return OpResult::err(Err::BadArguments);
    used[p] = 1;
  }
  if (!m.mapped[a.ep] || !m.ev[a.ep] || !m.perm[a.ep].execute)
    return OpResult::err(Err::BadArguments);

  for (PhysAddr p : pages) st.owner[p] = a.eid;
  m.active = true;
  m.ep = a.ep;
  m.pc = a.ep;
  // The eager copy at launch: private content moves out of physical memory
  // into the per-VA image.
  for (uint32_t v = 0; v < cfg.n_va; v++)
    if (m.ev[v] && m.mapped[v]) m.vmem[v] = st.mem[m.pa[v]];
  st.md(a.eid) = std::move(m);
  st.md(a.eid).measurement = measure(cfg, *eager_project(st, a.eid));
  return OpResult::success();
}

OpResult destroy(EagerState& st, EnclaveId eid) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, eid)) return OpResult::err(*e);
  if (!active(st, eid)) return OpResult::err(Err::NotActive);
  EagerEnclave& md = st.md(eid);
  if (md.child_count > 0) return OpResult::err(Err::SnapshotHasChildren);

  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (st.owner[p] == eid) {
      st.mem[p] = 0;
      st.owner[p] = EnclaveId::os();
    }
  }
  EnclaveId rs = md.root_snapshot;
  if (is_valid(rs) && st.in_range(rs) && st.md(rs).child_count > 0)
    st.md(rs).child_count--;
  md = blank_eager(st.cfg);
  st.input[eid.raw] = Tape{};
  st.output[eid.raw].clear();
  return OpResult::success();
}

OpResult enter(EagerState& st, EnclaveId eid) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, eid)) return OpResult::err(*e);
  if (!active(st, eid)) return OpResult::err(Err::NotActive);
  EagerEnclave& md = st.md(eid);
  if (md.is_snapshot) return OpResult::err(Err::IsSnapshot);
  if (md.paused) return OpResult::err(Err::BadArguments);

  st.os_pc = st.pc;
  st.os_regs = st.regs;
  st.pc = md.ep;
  st.regs = md.regs;
  st.e_curr = eid;
  return OpResult::success();
}

OpResult resume(EagerState& st, EnclaveId eid) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, eid)) return OpResult::err(*e);
  if (!active(st, eid)) return OpResult::err(Err::NotActive);
  EagerEnclave& md = st.md(eid);
  if (md.is_snapshot) return OpResult::err(Err::IsSnapshot);
  if (!md.paused) return OpResult::err(Err::NotPaused);

  st.os_pc = st.pc;
  st.os_regs = st.regs;
  st.pc = md.pc;
  st.regs = md.regs;
  md.paused = false;
  st.e_curr = eid;
  return OpResult::success();
}

OpResult exit_op(EagerState& st) {
  if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
  restore_os(st);
  return OpResult::success();
}

OpResult pause_op(EagerState& st) {
  if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
  EagerEnclave& md = st.md(st.e_curr);
  md.pc = st.pc;
  md.regs = st.regs;
  md.paused = true;
  restore_os(st);
  return OpResult::success();
}

OpResult snapshot_op(EagerState& st, std::optional<VirtAddr> resume_pc) {
  if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
  EagerEnclave& md = st.md(st.e_curr);
  if (md.is_snapshot) return OpResult::err(Err::AlreadySnapshot);
  if (is_valid(md.root_snapshot)) return OpResult::err(Err::HasRootSnapshot);

  md.is_snapshot = true;
  md.pc = resume_pc.value_or(st.pc);
  md.regs = st.regs;
  md.paused = true;
  restore_os(st);
  return OpResult::success();
}

OpResult clone_op(EagerState& st, const CloneArgs& a) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  if (auto e = check_id(st, a.parent)) return OpResult::err(*e);
  if (auto e = check_id(st, a.child)) return OpResult::err(*e);
  if (a.child == a.parent) return OpResult::err(Err::SelfClone);
  if (!active(st, a.parent)) return OpResult::err(Err::NotActive);
  if (active(st, a.child)) return OpResult::err(Err::AlreadyActive);
  for (PhysAddr p : a.pages)
    if (p >= st.cfg.n_pa) return OpResult::err(Err::BadArguments);
  std::vector<PhysAddr> x_p = sorted_set(a.pages);
  for (PhysAddr p : x_p)
    if (!st.owner[p].is_os()) return OpResult::err(Err::PageNotOSOwned);
  if (x_p.size() < required_copies(st, a.parent))
    return OpResult::err(Err::InsufficientMemory);

  const EagerEnclave& pm = st.md(a.parent);
  EnclaveId rs_child = pm.is_snapshot ? a.parent : pm.root_snapshot;
  if (is_valid(rs_child) && !st.in_range(rs_child))
    rs_child = EnclaveId::invalid();

  for (PhysAddr p : x_p) st.owner[p] = a.child;

  EagerEnclave cm = blank_eager(st.cfg);
  cm.active = true;
  cm.ep = pm.ep;
  cm.mapped = pm.mapped;
  cm.pa = pm.pa;
  cm.perm = pm.perm;
  cm.ev = pm.ev;
  cm.vmem = pm.vmem;  // the whole private image, copied now
  cm.pc = pm.pc;
  cm.regs = pm.regs;
  cm.paused = pm.paused;
  cm.measurement = pm.measurement;
  cm.root_snapshot = rs_child;
  cm.reserve = x_p;
  // Frames the child cannot share move onto its own grant, lowest first in
  // VA order; the content needs no copying, it is already in vmem.
  for (uint32_t v = 0; v < st.cfg.n_va; v++) {
    if (!cm.ev[v] || !cm.mapped[v]) continue;
    if (is_valid(rs_child) && st.owner[cm.pa[v]] == rs_child) continue;
    cm.pa[v] = cm.reserve.front();
    cm.reserve.erase(cm.reserve.begin());
  }
  st.md(a.child) = std::move(cm);
  if (is_valid(rs_child)) st.md(rs_child).child_count++;
  return OpResult::success();
}

StepOutcome eager_step(EagerState& st) {
  EnclaveId e = st.e_curr;
  const PlatformConfig& cfg = st.cfg;
  Word mask = cfg.word_mask();
  EagerState pre = st;

  auto fault = [&](StepFault f) {
    st = pre;
    pause_op(st);
    return StepOutcome::faulted(f);
  };

  if (st.pc + 1 >= cfg.n_va) return fault(StepFault::Unmapped);
  EagerEnclave& md = st.md(e);
  Word iw[2];
  for (uint32_t k = 0; k < 2; k++) {
    VirtAddr v = st.pc + k;
    if (!md.mapped[v]) return fault(StepFault::Unmapped);
    if (!md.ev[v] || !md.perm[v].execute) return fault(StepFault::PermDenied);
    iw[k] = md.vmem[v];
  }
  auto ins = decode(cfg, iw[0], iw[1]);
  if (!ins) return fault(StepFault::BadInstr);

  switch (ins->op) {
    case Opcode::LOADI:
      st.regs[ins->a] = ins->b & mask;
      break;
    case Opcode::ADD:
      st.regs[ins->a] = (st.regs[ins->a] + st.regs[ins->b]) & mask;
      break;
    case Opcode::JNZ:
      st.pc = st.regs[ins->a] != 0 ? ins->b : st.pc + 2;
      return StepOutcome::continued();
    case Opcode::IN: {
      Tape& t = st.input[e.raw];
      if (t.exhausted()) return fault(StepFault::InputExhausted);
      st.regs[ins->a] = t.words[t.pos++] & mask;
      break;
    }
    case Opcode::OUT: {
      Word w = st.regs[ins->a];
      st.output[e.raw].push_back(w);
      st.pc += 2;
      return StepOutcome::out(w);
    }
    case Opcode::LOAD: {
      VirtAddr b = ins->b;
      if (!md.mapped[b]) return fault(StepFault::Unmapped);
      if (!md.perm[b].read) return fault(StepFault::PermDenied);
      if (md.ev[b]) {
        st.regs[ins->a] = md.vmem[b];
      } else {
        if (!st.owner[md.pa[b]].is_os()) return fault(StepFault::PermDenied);
        st.regs[ins->a] = st.mem[md.pa[b]];
      }
      break;
    }
    case Opcode::STORE: {
      VirtAddr b = ins->b;
      if (!md.mapped[b]) return fault(StepFault::Unmapped);
      if (!md.perm[b].write) return fault(StepFault::PermDenied);
      if (!md.ev[b]) return fault(StepFault::PermDenied);
      EnclaveId own = st.owner[md.pa[b]];
      if (own != e) {
        EnclaveId rs = md.root_snapshot;
        if (!is_valid(rs) || own != rs) return fault(StepFault::PermDenied);
        if (md.reserve.empty()) return fault(StepFault::OOM);
        md.pa[b] = md.reserve.front();
        md.reserve.erase(md.reserve.begin());
      }
      md.vmem[b] = st.regs[ins->a];
      break;
    }
    case Opcode::SNAP: {
      OpResult r = snapshot_op(st, st.pc + 2);
      if (r.ok()) return StepOutcome::snapshotted();
      st = pre;
      return StepOutcome::faulted(StepFault::BadInstr);
    }
    case Opcode::EXIT:
      exit_op(st);
      return StepOutcome::exited();
  }
  st.pc += 2;
  return StepOutcome::continued();
}

OpResult adversary(EagerState& st, EnclaveId protected_eid,
                   const AdversaryAction& act) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  switch (act.kind) {
    case AdversaryAction::Kind::TamperMem: {
      if (act.pa >= st.cfg.n_pa || act.value > st.cfg.word_mask())
        return OpResult::err(Err::BadArguments);
      if (is_valid(protected_eid)) {
        if (!st.in_range(protected_eid)) return OpResult::err(Err::BadArguments);
        const EagerEnclave& pm = st.md(protected_eid);
        EnclaveId o = st.owner[act.pa];
        if (o == protected_eid ||
            (is_valid(pm.root_snapshot) && o == pm.root_snapshot))
          return OpResult::err(Err::ProtectedTarget);
      } else if (!st.owner[act.pa].is_os()) {
        return OpResult::err(Err::ProtectedTarget);
      }
      EnclaveId own = st.owner[act.pa];
      if (active(st, own) && st.md(own).is_snapshot)
        return OpResult::err(Err::ProtectedTarget);
      st.mem[act.pa] = act.value;
      return OpResult::success();
    }
    case AdversaryAction::Kind::TamperPageTable: {
      if (act.va >= st.cfg.n_va || act.pt_pa >= st.cfg.n_pa)
        return OpResult::err(Err::BadArguments);
      st.os_table[act.va] = PageEntry{true, act.pt_pa, act.perm};
      return OpResult::success();
    }
    case AdversaryAction::Kind::CallOp: {
      if (!act.call || std::holds_alternative<AdversaryArgs>(act.call->v))
        return OpResult::err(Err::BadArguments);
      return eager_apply(st, *act.call);
    }
    case AdversaryAction::Kind::Observe: {
      OpResult r;
      if (is_valid(protected_eid) && st.in_range(protected_eid)) {
        const EagerEnclave& pm = st.md(protected_eid);
        Observation obs;
        obs.view.resize(st.cfg.n_pa);
        for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
          EnclaveId o = st.owner[p];
          bool prot = o == protected_eid ||
                      (is_valid(pm.root_snapshot) && o == pm.root_snapshot);
          if (!prot) obs.view[p] = st.mem[p];
        }
        r.observation = std::move(obs);
      } else {
        r.observation = eager_observe_unowned(st);
      }
      return r;
    }
  }
  return OpResult::err(Err::BadArguments);
}

}  // namespace

EagerState eager_initial(const PlatformConfig& cfg) {
  EagerState st;
  st.cfg = cfg;
  st.regs.assign(cfg.n_regs, 0);
  st.os_regs.assign(cfg.n_regs, 0);
  st.mem.assign(cfg.n_pa, 0);
  st.os_table.resize(cfg.n_va);
  st.owner.assign(cfg.n_pa, EnclaveId::os());
  st.enc.resize(cfg.max_enclaves + 1);
  for (auto& e : st.enc) e = blank_eager(cfg);
  st.input.resize(cfg.max_enclaves + 1);
  st.output.resize(cfg.max_enclaves + 1);
  return st;
}

std::optional<EnclaveStateView> eager_project(const EagerState& st,
                                              EnclaveId e) {
  if (!active(st, e)) return std::nullopt;
  const EagerEnclave& m = st.md(e);
  EnclaveStateView view;
  view.ep = m.ep;
  view.pc = m.pc;
  view.regs = m.regs;
  view.va.resize(st.cfg.n_va);
  for (uint32_t v = 0; v < st.cfg.n_va; v++) {
    VaView& out = view.va[v];
    out.mapped = m.mapped[v] != 0;
    out.perm = m.mapped[v] ? m.perm[v] : Perm{};
    out.ev = m.ev[v] != 0;
    if (out.ev && out.mapped) out.value = m.vmem[v];
  }
  return view;
}

Observation eager_observe_unowned(const EagerState& st) {
  Observation obs;
  obs.view.resize(st.cfg.n_pa);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (st.owner[p].is_os()) obs.view[p] = st.mem[p];
  }
  return obs;
}

OpResult eager_apply(EagerState& st, const Action& a) {
  return std::visit(
      [&st](const auto& args) -> OpResult {
        using T = std::decay_t<decltype(args)>;
        if constexpr (std::is_same_v<T, LaunchArgs>) {
          return launch(st, args);
        } else if constexpr (std::is_same_v<T, DestroyArgs>) {
          return destroy(st, args.eid);
        } else if constexpr (std::is_same_v<T, EnterArgs>) {
          return enter(st, args.eid);
        } else if constexpr (std::is_same_v<T, ExitArgs>) {
          return exit_op(st);
        } else if constexpr (std::is_same_v<T, PauseArgs>) {
          return pause_op(st);
        } else if constexpr (std::is_same_v<T, ResumeArgs>) {
          return resume(st, args.eid);
        } else if constexpr (std::is_same_v<T, SnapshotArgs>) {
          return snapshot_op(st, std::nullopt);
        } else if constexpr (std::is_same_v<T, CloneArgs>) {
          return clone_op(st, args);
        } else if constexpr (std::is_same_v<T, StepArgs>) {
          if (st.e_curr.is_os()) return OpResult::err(Err::NotEnclave);
          OpResult r;
          r.step = eager_step(st);
          return r;
        } else {
          static_assert(std::is_same_v<T, AdversaryArgs>);
          return adversary(st, args.protected_eid, args.act);
        }
      },
      a.v);
}

}  // namespace tapc
