#include "tapc/machine.hpp"

#include "tapc/ops.hpp"

namespace tapc {

std::optional<std::pair<Word, Word>> encode(const PlatformConfig& cfg,
                                            const Instruction& ins) {
  uint32_t half = cfg.word_bits / 2;
  Word fmask = (Word{1} << half) - 1;
  auto fits_reg = [&](uint32_t r) { return r < cfg.n_regs && r <= fmask; };
  auto fits_va = [&](uint32_t v) { return v < cfg.n_va && v <= fmask; };
  switch (ins.op) {
    case Opcode::LOADI:
      if (!fits_reg(ins.a) || ins.b > fmask) return std::nullopt;
      break;
    case Opcode::LOAD:
    case Opcode::STORE:
    case Opcode::JNZ:
      if (!fits_reg(ins.a) || !fits_va(ins.b)) return std::nullopt;
      break;
    case Opcode::ADD:
      if (!fits_reg(ins.a) || !fits_reg(ins.b)) return std::nullopt;
      break;
    case Opcode::IN:
    case Opcode::OUT:
      if (!fits_reg(ins.a) || ins.b != 0) return std::nullopt;
      break;
    case Opcode::SNAP:
    case Opcode::EXIT:
      if (ins.a != 0 || ins.b != 0) return std::nullopt;
      break;
    default:
      return std::nullopt;
  }
  return std::make_pair(Word(ins.op), Word(ins.a | (ins.b << half)));
}

std::optional<Instruction> decode(const PlatformConfig& cfg, Word w0, Word w1) {
  if (w0 < 0x01 || w0 > 0x09) return std::nullopt;
  uint32_t half = cfg.word_bits / 2;
  Word fmask = (Word{1} << half) - 1;
  uint32_t f0 = w1 & fmask;
  uint32_t f1 = (w1 >> half) & fmask;
  Instruction ins;
  ins.op = Opcode(w0);
  switch (ins.op) {
    case Opcode::LOADI:
      if (f0 >= cfg.n_regs) return std::nullopt;
      ins.a = f0;
      ins.b = f1;
      break;
    case Opcode::LOAD:
    case Opcode::STORE:
    case Opcode::JNZ:
      if (f0 >= cfg.n_regs || f1 >= cfg.n_va) return std::nullopt;
      ins.a = f0;
      ins.b = f1;
      break;
    case Opcode::ADD:
      if (f0 >= cfg.n_regs || f1 >= cfg.n_regs) return std::nullopt;
      ins.a = f0;
      ins.b = f1;
      break;
    case Opcode::IN:
    case Opcode::OUT:
      if (f0 >= cfg.n_regs) return std::nullopt;
      ins.a = f0;
      break;
    case Opcode::SNAP:
    case Opcode::EXIT:
      break;
  }
  return ins;
}

namespace {

// Lowest-index reserved frame, or nullopt when the reserve is exhausted.
std::optional<PhysAddr> take_free_frame(PlatformState& st, EnclaveId e) {
  EnclaveMetadata& md = st.md(e);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (md.pa_free[p]) {
      md.pa_free[p] = 0;
      return p;
    }
  }
  return std::nullopt;
}

// Copy the shared frame into q and retarget only this VA, in both the
// metadata table and the live one.
void cow_remap(PlatformState& st, EnclaveId e, VirtAddr va, PhysAddr q) {
  EnclaveMetadata& md = st.md(e);
  st.mem[q] = st.mem[md.table[va].pa];
  md.table[va].pa = q;
  if (st.e_curr == e) st.active_table[va].pa = q;
}

}  // namespace

OpResult op_cow_fault(PlatformState& st, EnclaveId e, VirtAddr va) {
  if (st.e_curr.is_os() || st.e_curr != e) return OpResult::err(Err::NotEnclave);
  if (va >= st.cfg.n_va) return OpResult::err(Err::BadArguments);
  EnclaveMetadata& md = st.md(e);
  EnclaveId rs = md.root_snapshot;
  if (!md.table[va].mapped || !is_valid(rs) ||
      st.owner[md.table[va].pa] != rs)
    return OpResult::err(Err::BadArguments);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (md.pa_free[p]) {
      md.pa_free[p] = 0;
      cow_remap(st, e, va, p);
      return OpResult::success();
    }
  }
  return OpResult::err(Err::InsufficientMemory);
}

StepOutcome enclave_step(PlatformState& st) {
  if (st.e_curr.is_os()) return StepOutcome::faulted(StepFault::BadInstr);
  EnclaveId e = st.e_curr;
  const PlatformConfig& cfg = st.cfg;
  Word mask = cfg.word_mask();
  PlatformState pre = st;

  auto fault = [&](StepFault f) {
    st = pre;
    op_pause(st);
    return StepOutcome::faulted(f);
  };

  // Fetch both instruction words through the live table.
  if (st.pc + 1 >= cfg.n_va) return fault(StepFault::Unmapped);
  Word iw[2];
  for (uint32_t k = 0; k < 2; k++) {
    VirtAddr v = st.pc + k;
    const PageEntry& ent = st.active_table[v];
    if (!ent.mapped) return fault(StepFault::Unmapped);
    if (!st.md(e).ev[v] || !ent.perm.execute)
      return fault(StepFault::PermDenied);
    iw[k] = st.mem[ent.pa];
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
      const PageEntry& ent = st.active_table[ins->b];
      if (!ent.mapped) return fault(StepFault::Unmapped);
      if (!ent.perm.read) return fault(StepFault::PermDenied);
      if (!st.md(e).ev[ins->b] && !st.owner[ent.pa].is_os())
        return fault(StepFault::PermDenied);   // windows read OS frames only
      st.regs[ins->a] = st.mem[ent.pa];
      break;
    }
    case Opcode::STORE: {
      const PageEntry& ent = st.active_table[ins->b];
      if (!ent.mapped) return fault(StepFault::Unmapped);
      if (!ent.perm.write) return fault(StepFault::PermDenied);
      if (cfg.mutations.store_check_disabled) {
        st.mem[ent.pa] = st.regs[ins->a];
        break;
      }
      if (!st.md(e).ev[ins->b]) return fault(StepFault::PermDenied);
      PhysAddr target = ent.pa;
      EnclaveId own = st.owner[target];
      if (own != e) {
        EnclaveId rs = st.md(e).root_snapshot;
        if (!is_valid(rs) || own != rs) return fault(StepFault::PermDenied);
        if (!cfg.mutations.cow_write_through) {
          auto q = take_free_frame(st, e);
          if (!q) return fault(StepFault::OOM);
          cow_remap(st, e, ins->b, *q);
          target = *q;
        }
      }
      st.mem[target] = st.regs[ins->a];
      break;
    }
    case Opcode::SNAP: {
      OpResult r = op_snapshot(st, st.pc + 2);
      if (r.ok()) return StepOutcome::snapshotted();
      // Success-condition failure: the step is reverted but the enclave
      // keeps running; the error shows up only in the outcome.
      st = pre;
      return StepOutcome::faulted(StepFault::BadInstr);
    }
    case Opcode::EXIT:
      op_exit(st);
      return StepOutcome::exited();
  }
  st.pc += 2;
  return StepOutcome::continued();
}

}  // namespace tapc
