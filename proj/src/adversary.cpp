#include "tapc/adversary.hpp"

#include <map>

#include "tapc/ops.hpp"

namespace tapc {

namespace {

Perm perm_from_bits(uint64_t bits) {
  return Perm{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0};
}

EnclaveId random_eid(SplitMix64& rng, const PlatformConfig& cfg) {
  return EnclaveId::enclave(1 + uint32_t(rng.below(cfg.max_enclaves)));
}

LaunchArgs random_launch(SplitMix64& rng, const PlatformConfig& cfg) {
  LaunchArgs a;
  a.eid = random_eid(rng, cfg);
  // Structured map: a few distinct VAs, deduped via std::map so the draw
  // order stays deterministic.
  std::map<VirtAddr, LaunchArgs::Mapping> entries;
  uint32_t k = 1 + uint32_t(rng.below(std::min<uint32_t>(3, cfg.n_va)));
  for (uint32_t i = 0; i < k; i++) {
    LaunchArgs::Mapping m;
    m.va = VirtAddr(rng.below(cfg.n_va));
    m.pa = PhysAddr(rng.below(cfg.n_pa));
    m.perm = perm_from_bits(rng.below(8));
    entries[m.va] = m;
  }
  std::vector<uint8_t> ev(cfg.n_va, 0);
  for (auto& [va, m] : entries) {
    a.map.push_back(m);
    if (rng.chance(60)) ev[va] = 1;
  }
  for (uint32_t v = 0; v < cfg.n_va; v++) {
    if (!entries.count(v) && rng.chance(10)) ev[v] = 1;
    if (ev[v]) a.ev.push_back(v);
  }
  a.ep = a.map[rng.below(a.map.size())].va;
  // Grant the frames behind private mapped VAs, plus occasional extras.
  for (auto& [va, m] : entries)
    if (ev[va]) a.pages.push_back(m.pa);
  for (uint32_t p = 0; p < cfg.n_pa; p++)
    if (rng.chance(25)) a.pages.push_back(p);
  return a;
}

Action random_call(SplitMix64& rng, const PlatformConfig& cfg) {
  switch (rng.below(9)) {
    case 0: return Action{random_launch(rng, cfg)};
    case 1: return Action{DestroyArgs{random_eid(rng, cfg)}};
    case 2: return Action{EnterArgs{random_eid(rng, cfg)}};
    case 3: return Action{ExitArgs{}};
    case 4: return Action{PauseArgs{}};
    case 5: return Action{ResumeArgs{random_eid(rng, cfg)}};
    case 6: return Action{SnapshotArgs{}};
    case 7: {
      CloneArgs c;
      c.parent = random_eid(rng, cfg);
      c.child = random_eid(rng, cfg);
      for (uint32_t p = 0; p < cfg.n_pa; p++)
        if (rng.chance(25)) c.pages.push_back(p);
      return Action{c};
    }
    default: return Action{StepArgs{}};
  }
}

}  // namespace

AdversarySchedule generate_schedule(uint64_t seed, const PlatformConfig& cfg,
                                    uint32_t length) {
  AdversarySchedule sched;
  sched.seed = seed;
  sched.actions.reserve(length);
  SplitMix64 rng(seed);
  for (uint32_t i = 0; i < length; i++) {
    switch (rng.below(4)) {
      case 0:
        sched.actions.push_back(AdversaryAction::tamper_mem(
            PhysAddr(rng.below(cfg.n_pa)), Word(rng.below(cfg.word_mask() + 1ull))));
        break;
      case 1:
        sched.actions.push_back(AdversaryAction::tamper_page_table(
            VirtAddr(rng.below(cfg.n_va)), PhysAddr(rng.below(cfg.n_pa)),
            perm_from_bits(rng.below(8))));
        break;
      case 2:
        sched.actions.push_back(AdversaryAction::call_op(random_call(rng, cfg)));
        break;
      default:
        sched.actions.push_back(AdversaryAction::observe_now());
        break;
    }
  }
  return sched;
}

namespace {

// prot == nullptr means protect everything: only OS frames are fair game.
OpResult execute_guarded(PlatformState& st,
                         const std::vector<EnclaveId>* prot,
                         const AdversaryAction& act) {
  if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
  switch (act.kind) {
    case AdversaryAction::Kind::TamperMem: {
      if (act.pa >= st.cfg.n_pa || act.value > st.cfg.word_mask())
        return OpResult::err(Err::BadArguments);
      if (prot) {
        for (EnclaveId e : *prot) {
          auto mask = protected_mask(st, e);
          if (mask && (*mask)[act.pa]) return OpResult::err(Err::ProtectedTarget);
        }
      } else if (!st.owner[act.pa].is_os()) {
        return OpResult::err(Err::ProtectedTarget);
      }
      // Snapshot frames are immutable for everyone, protected or not.
      EnclaveId own = st.owner[act.pa];
      if (is_active(st, own) && st.md(own).is_snapshot)
        return OpResult::err(Err::ProtectedTarget);
      st.mem[act.pa] = act.value;
      return OpResult::success();
    }
    case AdversaryAction::Kind::TamperPageTable: {
      if (act.va >= st.cfg.n_va || act.pt_pa >= st.cfg.n_pa)
        return OpResult::err(Err::BadArguments);
      st.active_table[act.va] = PageEntry{true, act.pt_pa, act.perm};
      return OpResult::success();
    }
    case AdversaryAction::Kind::CallOp: {
      if (!act.call || std::holds_alternative<AdversaryArgs>(act.call->v))
        return OpResult::err(Err::BadArguments);
      return apply_mut(st, *act.call);
    }
    case AdversaryAction::Kind::Observe: {
      OpResult r;
      if (prot)
        r.observation = observe_many(st, *prot);
      else
        r.observation = observe_unowned(st);
      return r;
    }
  }
  return OpResult::err(Err::BadArguments);
}

}  // namespace

OpResult adversary_execute(PlatformState& st, EnclaveId protected_eid,
                           const AdversaryAction& act) {
  if (!is_valid(protected_eid))
    return execute_guarded(st, nullptr, act);
  if (!st.in_range(protected_eid)) {
    if (act.kind == AdversaryAction::Kind::TamperMem) {
      if (!st.e_curr.is_os()) return OpResult::err(Err::NotOS);
      return OpResult::err(Err::BadArguments);
    }
    return execute_guarded(st, nullptr, act);
  }
  std::vector<EnclaveId> prot{protected_eid};
  return execute_guarded(st, &prot, act);
}

OpResult adversary_execute(PlatformState& st,
                           const std::vector<EnclaveId>& protected_set,
                           const AdversaryAction& act) {
  return execute_guarded(st, &protected_set, act);
}

}  // namespace tapc
