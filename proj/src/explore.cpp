#include <algorithm>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tapc/ops.hpp"
#include "tapc/properties.hpp"
#include "tapc/scenario.hpp"

namespace tapc {
namespace {

struct Key {
  uint64_t a = 0;
  uint64_t b = 0;
  friend bool operator==(const Key&, const Key&) = default;
};

struct KeyHash {
  size_t operator()(const Key& k) const {
    return size_t(k.a ^ (k.b * 0x9e3779b97f4a7c15ull));
  }
};

Key key_of(const PlatformState& st) {
  std::vector<uint8_t> bytes = serialize_state(st);
  return Key{fnv1a64(bytes), state_digest2(bytes)};
}

// The alphabet is state-independent and finite: every launch shape over
// every frame choice, every lifecycle op over every id, clones over all
// grant subsets of size <= 2, tampers over the configured word set, and
// page-table rewrites. Errors are self-loops, so applying the whole
// alphabet from every reachable state is an exhaustive bounded search of
// the OS-and-adversary interface.
std::vector<Action> build_alphabet(const ExploreConfig& ec) {
  const PlatformConfig& cfg = ec.cfg;
  std::vector<Action> al;

  for (uint32_t id = 1; id <= cfg.max_enclaves; id++) {
    EnclaveId e = EnclaveId::enclave(id);
    for (PhysAddr p = 0; p < cfg.n_pa; p++) {
      LaunchArgs rx;
      rx.eid = e;
      rx.map = {{0, p, perm_rx()}};
      rx.ev = {0};
      rx.pages = {p};
      al.push_back(Action{rx});

      LaunchArgs rwx = rx;
      rwx.map[0].perm = perm_rwx();
      al.push_back(Action{rwx});

      if (cfg.n_va < 2) continue;
      for (PhysAddr q = 0; q < cfg.n_pa; q++) {
        if (q != p) {
          LaunchArgs pair = rx;
          pair.map.push_back({1, q, perm_rw()});
          pair.ev = {0, 1};
          pair.pages = {std::min(p, q), std::max(p, q)};
          al.push_back(Action{pair});
        }
        LaunchArgs win = rx;  // va1 reads frame q through a window
        win.map.push_back({1, q, perm_r()});
        al.push_back(Action{win});
      }
    }
  }

  for (uint32_t id = 1; id <= cfg.max_enclaves; id++) {
    EnclaveId e = EnclaveId::enclave(id);
    al.push_back(Action{DestroyArgs{e}});
    al.push_back(Action{EnterArgs{e}});
    al.push_back(Action{ResumeArgs{e}});
  }
  al.push_back(Action{ExitArgs{}});
  al.push_back(Action{PauseArgs{}});
  al.push_back(Action{SnapshotArgs{}});
  al.push_back(Action{StepArgs{}});

  std::vector<std::vector<PhysAddr>> grants;
  grants.push_back({});
  for (PhysAddr p = 0; p < cfg.n_pa; p++) grants.push_back({p});
  for (PhysAddr p = 0; p < cfg.n_pa; p++)
    for (PhysAddr q = p + 1; q < cfg.n_pa; q++) grants.push_back({p, q});
  for (uint32_t pid = 1; pid <= cfg.max_enclaves; pid++) {
    for (uint32_t cid = 1; cid <= cfg.max_enclaves; cid++) {
      if (pid == cid) continue;
      for (const auto& g : grants)
        al.push_back(Action{
            CloneArgs{EnclaveId::enclave(pid), EnclaveId::enclave(cid), g}});
    }
  }

  for (PhysAddr p = 0; p < cfg.n_pa; p++)
    for (Word w : ec.tamper_words)
      al.push_back(Action{
          AdversaryArgs{AdversaryAction::tamper_mem(p, w), EnclaveId::invalid()}});

  for (VirtAddr v = 0; v < cfg.n_va; v++)
    for (PhysAddr p = 0; p < cfg.n_pa; p++)
      for (Perm pm : {perm_rw(), perm_rx()})
        al.push_back(Action{AdversaryArgs{
            AdversaryAction::tamper_page_table(v, p, pm), EnclaveId::invalid()}});

  return al;
}

}  // namespace

ExploreReport explore(const ExploreConfig& ec) {
  ExploreReport out;
  InvariantReport& rep = out.inv;
  std::vector<Action> alphabet = build_alphabet(ec);
  std::vector<Directive> dirs;
  dirs.reserve(alphabet.size());
  for (const Action& a : alphabet) dirs.push_back(directive_from_action(a));

  constexpr uint32_t kRoot = 0xffffffffu;
  std::unordered_map<Key, std::pair<Key, uint32_t>, KeyHash> parent;

  auto witness_for = [&](Key k, const PlatformState& st) {
    std::vector<uint32_t> path;
    for (Key cur = k;;) {
      const auto& pr = parent.at(cur);
      if (pr.second == kRoot) break;
      path.push_back(pr.second);
      cur = pr.first;
    }
    std::reverse(path.begin(), path.end());
    std::vector<Directive> ds;
    ds.reserve(path.size());
    for (uint32_t idx : path) ds.push_back(dirs[idx]);
    return witness_text(ec.cfg, ds, state_digest(st));
  };

  auto check_state = [&](const PlatformState& st, Key k) {
    size_t before = rep.violations.size();
    check_invariants_into(st, rep.states_checked, rep);
    rep.states_checked++;
    if (rep.violations.size() == before) return true;
    for (size_t i = before; i < rep.violations.size(); i++)
      rep.violations[i].scenario = witness_for(k, st);
    return false;
  };

  struct Node {
    PlatformState st;
    Key key;
  };

  PlatformState init = initial_state(ec.cfg);
  Key k0 = key_of(init);
  parent.emplace(k0, std::pair<Key, uint32_t>{Key{}, kRoot});
  out.unique_states = 1;
  if (!check_state(init, k0)) return out;

  std::vector<Node> frontier;
  frontier.push_back({std::move(init), k0});

  for (uint32_t depth = 1; depth <= ec.depth && !frontier.empty(); depth++) {
    std::vector<Node> next;
    for (const Node& n : frontier) {
      for (uint32_t ai = 0; ai < alphabet.size(); ai++) {
        auto [succ, res] = apply(n.st, alphabet[ai]);
        out.transitions++;
        if (!res.ok()) continue;
        Key k = key_of(succ);
        if (parent.count(k)) continue;
        if (out.unique_states >= ec.state_cap) {
          rep.budget_exceeded = true;
          return out;
        }
        parent.emplace(k, std::pair<Key, uint32_t>{n.key, ai});
        out.unique_states++;
        out.depth_reached = depth;
        if (!check_state(succ, k)) return out;
        next.push_back({std::move(succ), k});
      }
    }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace tapc
