#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "tapc/adversary.hpp"
#include "tapc/eager.hpp"
#include "tapc/ops.hpp"
#include "tapc/properties.hpp"
#include "tapc/scenario.hpp"

namespace tapc {
namespace {

// First divergence between the lazy platform and the eager reference after
// one action, or nullopt when everything observable agrees.
std::optional<std::string> divergence(const PlatformState& lz,
                                      const EagerState& eg, const OpResult& rl,
                                      const OpResult& re) {
  if (result_to_string(rl) != result_to_string(re))
    return "results differ: " + result_to_string(rl) + " vs " +
           result_to_string(re);
  if (rl.observation.has_value() != re.observation.has_value() ||
      (rl.observation && *rl.observation != *re.observation))
    return "observations differ";
  if (lz.e_curr != eg.e_curr) return "running enclave differs";
  if (lz.pc != eg.pc || lz.regs != eg.regs) return "live context differs";
  if (observe_unowned(lz) != eager_observe_unowned(eg))
    return "OS-visible memory differs";
  for (uint32_t id = 1; id <= lz.cfg.max_enclaves; id++) {
    EnclaveId e = EnclaveId::enclave(id);
    const EnclaveMetadata& m = lz.md(e);
    const EagerEnclave& n = eg.md(e);
    std::string who = "enclave " + std::to_string(id) + ": ";
    if (m.active != n.active) return who + "active flags differ";
    if (!m.active) continue;
    if (m.paused != n.paused) return who + "paused flags differ";
    if (m.is_snapshot != n.is_snapshot) return who + "snapshot flags differ";
    if (m.child_count != n.child_count) return who + "child counts differ";
    if (m.root_snapshot != n.root_snapshot)
      return who + "root snapshots differ";
    if (m.measurement.canonical != n.measurement.canonical)
      return who + "measurements differ";
    auto vl = project_enclave(lz, e);
    auto ve = eager_project(eg, e);
    if (vl.has_value() != ve.has_value() || (vl && *vl != *ve))
      return who + "views differ";
    if (lz.input[id] != eg.input[id]) return who + "input tapes differ";
    if (lz.output[id] != eg.output[id]) return who + "output tapes differ";
  }
  return std::nullopt;
}

}  // namespace

InvariantReport oracle_equivalence(const PlatformConfig& cfg, uint64_t seed,
                                   uint64_t trials, uint32_t len) {
  InvariantReport rep;
  SplitMix64 seeder(seed);
  // Word values below the opcode ceiling so seeded memory decodes as real
  // instructions often enough for launched enclaves to actually run.
  uint64_t code_span =
      std::min<uint64_t>(0x0b, uint64_t(cfg.word_mask()) + 1);

  for (uint64_t t = 0; t < trials; t++) {
    uint64_t ts = seeder.next();
    rep.trials++;

    std::vector<Action> acts;
    SplitMix64 pre(ts ^ 0xc0dec0dec0dec0deull);
    for (int i = 0; i < 8; i++) {
      AdversaryAction a = AdversaryAction::tamper_mem(
          PhysAddr(pre.below(cfg.n_pa)), Word(pre.below(code_span)));
      acts.push_back(Action{AdversaryArgs{a, EnclaveId::invalid()}});
    }
    AdversarySchedule sched = generate_schedule(ts, cfg, len);
    for (const AdversaryAction& aa : sched.actions) {
      if (aa.kind == AdversaryAction::Kind::CallOp) {
        if (aa.call) acts.push_back(*aa.call);
      } else {
        acts.push_back(Action{AdversaryArgs{aa, EnclaveId::invalid()}});
      }
    }

    PlatformState lz = initial_state(cfg);
    EagerState eg = eager_initial(cfg);
    std::vector<Directive> log;
    for (size_t i = 0; i < acts.size(); i++) {
      OpResult rl = apply_mut(lz, acts[i]);
      OpResult re = eager_apply(eg, acts[i]);
      log.push_back(directive_from_action(acts[i]));
      rep.states_checked++;
      if (auto why = divergence(lz, eg, rl, re)) {
        rep.violations.push_back({"oracle-divergence", i,
                                  "trial " + std::to_string(t) + ", step " +
                                      std::to_string(i) + ": " + *why,
                                  witness_text(cfg, log, state_digest(lz))});
        return rep;
      }
      size_t before = rep.violations.size();
      check_invariants_into(lz, i, rep);
      if (rep.violations.size() != before) {
        for (size_t k = before; k < rep.violations.size(); k++) {
          rep.violations[k].witness =
              "trial " + std::to_string(t) + ": " + rep.violations[k].witness;
          rep.violations[k].scenario = witness_text(cfg, log, state_digest(lz));
        }
        return rep;
      }
    }
  }
  return rep;
}

}  // namespace tapc
