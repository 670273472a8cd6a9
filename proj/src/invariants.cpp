#include <algorithm>
#include <set>
#include <sstream>

#include "tapc/properties.hpp"

namespace tapc {

namespace {

std::string eid_str(EnclaveId e) {
  if (e.is_os()) return "os";
  if (!is_valid(e)) return "invalid";
  return "e" + std::to_string(e.raw);
}

void fail(InvariantReport& rep, uint64_t index, std::string property,
          std::string witness) {
  rep.violations.push_back(
      Violation{std::move(property), index, std::move(witness), {}});
}

}  // namespace

std::string InvariantReport::to_text() const {
  std::ostringstream os;
  os << "states=" << states_checked << " trials=" << trials;
  if (budget_exceeded) os << " BUDGET-EXCEEDED";
  if (misuse) os << " MISUSE: " << misuse_detail;
  if (violations.empty() && !misuse) {
    os << " all-pass\n";
    return os.str();
  }
  os << " violations=" << violations.size() << "\n";
  for (const Violation& v : violations) {
    os << "  [" << v.property << "] at state " << v.state_index << ": "
       << v.witness << "\n";
    if (!v.scenario.empty()) {
      os << "  --- witness scenario ---\n";
      std::istringstream lines(v.scenario);
      std::string line;
      while (std::getline(lines, line)) os << "  | " << line << "\n";
    }
  }
  return os.str();
}

void check_invariants_into(const PlatformState& st, uint64_t index,
                           InvariantReport& rep) {
  rep.states_checked++;
  const PlatformConfig& cfg = st.cfg;
  const EnclaveMetadata blank = blank_metadata(cfg);

  // ownership-partition
  for (uint32_t p = 0; p < cfg.n_pa; p++) {
    EnclaveId o = st.owner[p];
    if (o.is_os()) continue;
    if (!is_valid(o) || !st.in_range(o) || !st.md(o).active)
      fail(rep, index, "ownership-partition",
           "pa " + std::to_string(p) + " owned by " + eid_str(o) +
               " which is not the OS or an active enclave");
  }

  for (uint32_t raw = 1; raw <= cfg.max_enclaves; raw++) {
    EnclaveId e = EnclaveId::enclave(raw);
    const EnclaveMetadata& m = st.md(e);

    if (!m.active) {
      // inactive-blank
      if (!(m == blank))
        fail(rep, index, "inactive-blank",
             eid_str(e) + " is inactive but its metadata is not default");
      continue;
    }

    EnclaveId rs = m.root_snapshot;
    bool rs_valid = is_valid(rs);

    // root-not-self
    if (rs == e)
      fail(rep, index, "root-not-self", eid_str(e) + " is its own root snapshot");

    // snapshot-no-root
    if (m.is_snapshot && rs_valid)
      fail(rep, index, "snapshot-no-root",
           eid_str(e) + " is a snapshot yet has root " + eid_str(rs));

    // root-is-snapshot
    if (rs_valid && rs != e) {
      if (!st.in_range(rs) || !st.md(rs).active || !st.md(rs).is_snapshot ||
          st.md(rs).child_count == 0)
        fail(rep, index, "root-is-snapshot",
             eid_str(e) + " has root " + eid_str(rs) +
                 " which is not an active snapshot with children");
    }

    auto owned_by_self_or_root = [&](PhysAddr pa) {
      if (st.owner[pa] == e) return true;
      return rs_valid && st.in_range(rs) && st.owner[pa] == rs;
    };

    // ep-owned
    if (m.ep >= cfg.n_va || !m.table[m.ep].mapped)
      fail(rep, index, "ep-owned",
           eid_str(e) + " entrypoint va " + std::to_string(m.ep) +
               " is not mapped");
    else if (!owned_by_self_or_root(m.table[m.ep].pa))
      fail(rep, index, "ep-owned",
           eid_str(e) + " entrypoint frame pa " +
               std::to_string(m.table[m.ep].pa) + " owned by " +
               eid_str(st.owner[m.table[m.ep].pa]));

    // private-owned, private-injective
    std::set<PhysAddr> private_frames;
    for (uint32_t v = 0; v < cfg.n_va; v++) {
      if (!m.ev[v] || !m.table[v].mapped) continue;
      PhysAddr pa = m.table[v].pa;
      if (!owned_by_self_or_root(pa))
        fail(rep, index, "private-owned",
             eid_str(e) + " private va " + std::to_string(v) + " backed by pa " +
                 std::to_string(pa) + " owned by " + eid_str(st.owner[pa]));
      if (!private_frames.insert(pa).second)
        fail(rep, index, "private-injective",
             eid_str(e) + " maps pa " + std::to_string(pa) +
                 " behind two private VAs");
    }

    // free-owned
    for (uint32_t p = 0; p < cfg.n_pa; p++) {
      if (m.pa_free[p] && st.owner[p] != e)
        fail(rep, index, "free-owned",
             eid_str(e) + " reserves pa " + std::to_string(p) + " owned by " +
                 eid_str(st.owner[p]));
    }
  }

  // refcount-exact
  for (uint32_t raw = 1; raw <= cfg.max_enclaves; raw++) {
    EnclaveId s = EnclaveId::enclave(raw);
    uint64_t sharers = 0;
    for (uint32_t o = 1; o <= cfg.max_enclaves; o++) {
      EnclaveId e = EnclaveId::enclave(o);
      if (st.md(e).active && st.md(e).root_snapshot == s) sharers++;
    }
    if (st.md(s).child_count != sharers)
      fail(rep, index, "refcount-exact",
           eid_str(s) + " child_count " + std::to_string(st.md(s).child_count) +
               " but " + std::to_string(sharers) + " active sharers");
  }

  // no-running-snapshot, active-table-sync
  if (!st.e_curr.is_os()) {
    EnclaveId e = st.e_curr;
    if (!is_valid(e) || !st.in_range(e) || !st.md(e).active ||
        st.md(e).is_snapshot || st.md(e).paused)
      fail(rep, index, "no-running-snapshot",
           "executing context " + eid_str(e) +
               " is not an active unpaused non-snapshot enclave");
    else if (st.active_table != st.md(e).table)
      fail(rep, index, "active-table-sync",
           "installed table differs from " + eid_str(e) + "'s metadata table");
  }
}

InvariantReport check_invariants(const PlatformState& st) {
  InvariantReport rep;
  check_invariants_into(st, 0, rep);
  return rep;
}

std::optional<bool> check_measurement_pair(const PlatformConfig& cfg,
                                           const EnclaveStateView& a,
                                           const EnclaveStateView& b) {
  auto ma = measure_checked(cfg, a);
  auto mb = measure_checked(cfg, b);
  if (!ma || !mb) return std::nullopt;
  return (ma->canonical == mb->canonical) == (a == b);
}

namespace {

// Random launch-shaped initial view: pc at ep, registers zero, contents
// engaged exactly on private mapped VAs.
EnclaveStateView random_initial_view(SplitMix64& rng,
                                     const PlatformConfig& cfg) {
  EnclaveStateView v;
  v.regs.assign(cfg.n_regs, 0);
  v.va.resize(cfg.n_va);
  for (uint32_t i = 0; i < cfg.n_va; i++) {
    VaView& e = v.va[i];
    e.mapped = rng.chance(70);
    e.perm = Perm{rng.chance(60), rng.chance(40), rng.chance(40)};
    e.ev = rng.chance(60);
    if (e.ev && e.mapped) e.value = Word(rng.below(cfg.word_mask() + 1ull));
  }
  v.ep = VirtAddr(rng.below(cfg.n_va));
  v.pc = v.ep;
  return v;
}

}  // namespace

InvariantReport measurement_pair_suite(uint64_t seed, uint64_t pairs) {
  InvariantReport rep;
  PlatformConfig cfg;
  cfg.n_va = 6;
  cfg.n_pa = 12;
  SplitMix64 rng(seed);
  for (uint64_t i = 0; i < pairs; i++) {
    rep.trials++;
    EnclaveStateView a = random_initial_view(rng, cfg);
    EnclaveStateView b =
        rng.chance(50) ? a : random_initial_view(rng, cfg);
    auto held = check_measurement_pair(cfg, a, b);
    rep.states_checked++;
    if (!held || !*held) {
      fail(rep, i, "measure-biconditional",
           std::string(held ? "measurement equality disagreed with view "
                              "equality on a random pair"
                            : "generator produced a non-initial view"));
      return rep;
    }

    // Single-field mutants of a: each must flip the measurement.
    for (int field = 0; field < 5; field++) {
      EnclaveStateView m = a;
      uint32_t va = uint32_t(rng.below(cfg.n_va));
      switch (field) {
        case 0:
          m.ep = (m.ep + 1) % cfg.n_va;
          m.pc = m.ep;  // keep it initial
          break;
        case 1: m.va[va].mapped = !m.va[va].mapped; break;
        case 2: m.va[va].perm.read = !m.va[va].perm.read; break;
        case 3: m.va[va].ev = !m.va[va].ev; break;
        case 4: {
          if (!m.va[va].ev || !m.va[va].mapped) {
            m.va[va].ev = true;
            m.va[va].mapped = true;
          }
          Word old = m.va[va].value.value_or(0);
          m.va[va].value = (old + 1) & cfg.word_mask();
          break;
        }
      }
      // Normalize the content slot to the invariant the platform keeps.
      for (auto& slot : m.va) {
        if (slot.ev && slot.mapped) {
          if (!slot.value) slot.value = 0;
        } else {
          slot.value.reset();
        }
      }
      if (m == a) continue;
      auto flipped = check_measurement_pair(cfg, a, m);
      rep.states_checked++;
      if (!flipped || !*flipped) {
        fail(rep, i, "measure-biconditional",
             "mutant field " + std::to_string(field) +
                 " did not flip the measurement");
        return rep;
      }
    }
  }
  return rep;
}

}  // namespace tapc
