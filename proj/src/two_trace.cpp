#include <algorithm>
#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tapc/adversary.hpp"
#include "tapc/machine.hpp"
#include "tapc/ops.hpp"
#include "tapc/properties.hpp"
#include "tapc/scenario.hpp"

namespace tapc {
namespace {

// Fixed frame map for the lockstep pair (needs n_pa >= 24):
//   0        attack-enclave data; divergent across integrity traces
//   1,2      adversary scratch; divergence candidates in integrity trials
//   3        window input frame, common in every mode
//   4..7     attack program code (common)
//   8..15    protected program code (common)
//   16       protected data word (common)
//   17       protected secret; divergent across confidentiality traces
//   18..21   clone grants, reserved for protected children
//   22,23    adversary scratch; divergence candidates in integrity trials
// VAs: 0..7 code, 8 data, 9 window onto frame 3, 10 secret, 11 unmapped.
// Ids: 1/2 are the protected roots (2 only in measurement mode), 3 the
// protected clone child, 4 the adversary's own enclave. Keeping adversary
// launches off the protected frames and ids is what makes the two traces
// provably alignable: everything the protected family reads is common, so
// any divergence the comparison sees came through the platform.
constexpr PhysAddr kAttackDataFrame = 0;
constexpr PhysAddr kWindowFrame = 3;
constexpr PhysAddr kAttackCodeFrame = 4;
constexpr PhysAddr kProtCodeFrame = 8;
constexpr PhysAddr kProtDataFrame = 16;
constexpr PhysAddr kSecretFrame = 17;
constexpr std::array<PhysAddr, 4> kGrantFrames = {18, 19, 20, 21};
constexpr std::array<PhysAddr, 5> kScratchFrames = {0, 1, 2, 22, 23};

constexpr VirtAddr kDataVa = 8;
constexpr VirtAddr kWindowVa = 9;
constexpr VirtAddr kSecretVa = 10;

constexpr uint32_t kChildRaw = 3;
constexpr uint32_t kAdvRaw = 4;

struct Event {
  enum class K : uint8_t {
    Tamper,        // adversary tamper, protect-everything
    TamperPt,      // adversary page-table rewrite
    AdvDestroy,    // destroy the adversary enclave
    JunkRound,     // destroy + launch over scratch frames + run a little
    AdvEnter,      // enter the adversary enclave and run a little
    AdvResume,     // resume it instead
    AttackRound,   // destroy + launch the window-attack enclave + run it
    ProtRound,     // pause world, activate a protected member, step burst
    SnapRoot,      // pause world, run the root into a snapshot
    CloneProt,     // pause world, clone a protected member to id 3
    DestroyChild,  // pause world, destroy the protected child
  };
  K k = K::Tamper;
  AdversaryAction adv;          // Tamper / TamperPt
  LaunchArgs junk;              // JunkRound
  uint32_t steps = 0;           // bursts
  uint32_t fam_idx = 0;         // ProtRound / CloneProt member pick
  std::vector<PhysAddr> grant;  // CloneProt
};

struct TrialPlan {
  std::array<Word, 4> attack{};
  std::array<Word, 8> prog{};
  Word window_word = 0;
  Word data_word = 0;
  std::array<Word, 2> secret{};                  // per trace
  std::array<std::array<Word, 2>, 5> scratch{};  // per scratch frame, per trace
  std::vector<Word> input_words;
  std::vector<Event> events;
};

// Straight-line protected program, 4 instructions over registers 0 and 1.
// Taint tracking keeps OUT away from secret-derived values: the program is
// non-interfering by construction, so equal adversary projections is a
// property of the platform alone. Conservative rules (ADD joins taints, a
// tainted STORE taints the data page) can only over-approximate.
std::array<Word, 8> gen_program(SplitMix64& rng, const PlatformConfig& cfg) {
  std::array<Word, 8> code{};
  std::array<bool, 2> taint{};
  bool data_tainted = false;
  for (uint32_t slot = 0; slot < 4; slot++) {
    uint32_t r = uint32_t(rng.below(2));
    Instruction ins{Opcode::EXIT, 0, 0};
    if (!(slot == 3 && rng.chance(40))) {
      switch (rng.below(10)) {
        case 0: ins = {Opcode::IN, r, 0}; taint[r] = false; break;
        case 1:
          ins = {Opcode::LOADI, r, uint32_t(rng.below(16))};
          taint[r] = false;
          break;
        case 2: ins = {Opcode::LOAD, r, kDataVa}; taint[r] = data_tainted; break;
        case 3: ins = {Opcode::LOAD, r, kWindowVa}; taint[r] = false; break;
        case 4: ins = {Opcode::LOAD, r, kSecretVa}; taint[r] = true; break;
        case 5:
          ins = {Opcode::ADD, r, 1 - r};
          taint[r] = taint[r] || taint[1 - r];
          break;
        case 6:
          ins = {Opcode::STORE, r, kDataVa};
          data_tainted = data_tainted || taint[r];
          break;
        case 7: ins = {Opcode::STORE, r, kSecretVa}; break;
        case 8:
          if (!taint[r]) {
            ins = {Opcode::OUT, r, 0};
          } else if (!taint[1 - r]) {
            ins = {Opcode::OUT, 1 - r, 0};
          } else {
            ins = {Opcode::LOADI, r, 0};
            taint[r] = false;
          }
          break;
        case 9: ins = {Opcode::SNAP, 0, 0}; break;
      }
    }
    auto enc = encode(cfg, ins);
    code[2 * slot] = enc->first;
    code[2 * slot + 1] = enc->second;
  }
  return code;
}

// LOAD r0 from the private data page, STORE it through the window mapped
// onto the protected data frame. The store must be refused (non-private
// VA); with the store check disabled it writes divergent data straight
// into the protected frame, which the integrity comparison then sees.
std::array<Word, 4> attack_program(const PlatformConfig& cfg) {
  auto a = encode(cfg, {Opcode::LOAD, 0, 4});
  auto b = encode(cfg, {Opcode::STORE, 0, 5});
  return {a->first, a->second, b->first, b->second};
}

LaunchArgs attack_launch() {
  LaunchArgs a;
  a.eid = EnclaveId::enclave(kAdvRaw);
  a.ep = 0;
  for (uint32_t v = 0; v < 4; v++)
    a.map.push_back({v, kAttackCodeFrame + v, perm_rx()});
  a.map.push_back({4, kAttackDataFrame, perm_rw()});
  a.map.push_back({5, kProtDataFrame, perm_rw()});
  a.ev = {0, 1, 2, 3, 4};
  a.pages = {kAttackDataFrame, 4, 5, 6, 7};
  return a;
}

LaunchArgs protected_launch(EnclaveId root) {
  LaunchArgs a;
  a.eid = root;
  a.ep = 0;
  for (uint32_t v = 0; v < 8; v++)
    a.map.push_back({v, kProtCodeFrame + v, perm_rx()});
  a.map.push_back({kDataVa, kProtDataFrame, perm_rw()});
  a.map.push_back({kWindowVa, kWindowFrame, perm_r()});
  a.map.push_back({kSecretVa, kSecretFrame, perm_rw()});
  a.ev = {0, 1, 2, 3, 4, 5, 6, 7, kDataVa, kSecretVa};
  a.pages = {8, 9, 10, 11, 12, 13, 14, 15, kProtDataFrame, kSecretFrame};
  return a;
}

LaunchArgs junk_launch(SplitMix64& rng) {
  LaunchArgs a;
  a.eid = EnclaveId::enclave(kAdvRaw);
  a.ep = 0;
  std::array<PhysAddr, 5> pool = kScratchFrames;
  uint32_t k = 1 + uint32_t(rng.below(2));
  for (uint32_t i = 0; i < k; i++) {
    uint32_t j = i + uint32_t(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  for (uint32_t v = 0; v < k; v++) {
    a.map.push_back({v, pool[v], Perm{true, rng.chance(50), true}});
    a.ev.push_back(v);
    a.pages.push_back(pool[v]);
  }
  std::sort(a.map.begin(), a.map.end(),
            [](const auto& x, const auto& y) { return x.va < y.va; });
  std::sort(a.pages.begin(), a.pages.end());
  return a;
}

std::vector<Event> gen_events(SplitMix64& rng, const PlatformConfig& cfg,
                              uint32_t n) {
  std::vector<Event> evs;
  evs.reserve(n);
  for (uint32_t i = 0; i < n; i++) {
    Event e;
    uint64_t d = rng.below(100);
    if (d < 18) {
      e.k = Event::K::Tamper;
      e.adv = AdversaryAction::tamper_mem(
          PhysAddr(rng.below(cfg.n_pa)), Word(rng.below(cfg.word_mask() + 1ull)));
    } else if (d < 26) {
      e.k = Event::K::TamperPt;
      e.adv = AdversaryAction::tamper_page_table(
          VirtAddr(rng.below(cfg.n_va)), PhysAddr(rng.below(cfg.n_pa)),
          Perm{rng.chance(70), rng.chance(50), rng.chance(30)});
    } else if (d < 32) {
      e.k = Event::K::AdvDestroy;
    } else if (d < 42) {
      e.k = Event::K::JunkRound;
      e.junk = junk_launch(rng);
      e.steps = 1 + uint32_t(rng.below(3));
    } else if (d < 46) {
      e.k = Event::K::AdvEnter;
      e.steps = 1 + uint32_t(rng.below(3));
    } else if (d < 50) {
      e.k = Event::K::AdvResume;
      e.steps = 1 + uint32_t(rng.below(3));
    } else if (d < 62) {
      e.k = Event::K::AttackRound;
    } else if (d < 78) {
      e.k = Event::K::ProtRound;
      e.fam_idx = uint32_t(rng.below(4));
      e.steps = 1 + uint32_t(rng.below(6));
    } else if (d < 86) {
      e.k = Event::K::SnapRoot;
    } else if (d < 94) {
      e.k = Event::K::CloneProt;
      e.fam_idx = uint32_t(rng.below(4));
      uint32_t mask = uint32_t(rng.below(16));
      for (uint32_t j = 0; j < kGrantFrames.size(); j++)
        if (mask & (1u << j)) e.grant.push_back(kGrantFrames[j]);
    } else {
      e.k = Event::K::DestroyChild;
    }
    evs.push_back(std::move(e));
  }
  return evs;
}

TrialPlan make_plan(const TwoTraceConfig& tt, SplitMix64& rng) {
  TrialPlan p;
  const PlatformConfig& cfg = tt.cfg;
  uint64_t wspan = uint64_t(cfg.word_mask()) + 1;
  p.attack = attack_program(cfg);
  p.prog = gen_program(rng, cfg);
  p.window_word = Word(rng.below(wspan));
  p.data_word = Word(rng.below(wspan));
  Word s0 = Word(rng.below(wspan));
  p.secret = {s0, s0};
  if (tt.mode == TwoTraceMode::Confidentiality)
    p.secret[1] = Word((s0 + 1 + rng.below(wspan - 1)) & cfg.word_mask());
  for (size_t i = 0; i < kScratchFrames.size(); i++) {
    Word w0 = Word(rng.below(wspan));
    bool diverge = tt.mode == TwoTraceMode::Integrity &&
                   (kScratchFrames[i] == kAttackDataFrame || rng.chance(60));
    Word w1 = diverge ? Word((w0 + 1 + rng.below(wspan - 1)) & cfg.word_mask())
                      : w0;
    p.scratch[i] = {w0, w1};
  }
  for (int i = 0; i < 4; i++) p.input_words.push_back(Word(rng.below(wspan)));
  p.events = gen_events(rng, cfg, tt.events);
  return p;
}

struct Side {
  PlatformState st;
  EnclaveId root;
  std::vector<EnclaveId> family;  // root first, live protected members
  std::vector<Directive> log;
  std::optional<std::pair<EnclaveId, EnclaveId>> last_clone;
};

OpResult apply_rec(Side& s, const Action& a) {
  OpResult r = apply_mut(s.st, a);
  s.log.push_back(directive_from_action(a));
  return r;
}

void force_pause(Side& s) {
  if (!s.st.e_curr.is_os()) apply_rec(s, Action{PauseArgs{}});
}

void burst(Side& s, uint32_t steps) {
  for (uint32_t i = 0; i < steps && !s.st.e_curr.is_os(); i++)
    apply_rec(s, Action{StepArgs{}});
}

std::optional<std::string> setup_side(Side& s, const TwoTraceConfig& tt,
                                      const TrialPlan& plan, uint32_t ti) {
  s.st = initial_state(tt.cfg);
  bool second_root = tt.mode == TwoTraceMode::Measurement && ti == 1;
  s.root = EnclaveId::enclave(second_root ? 2 : 1);
  s.family = {s.root};

  auto oswrite = [&](PhysAddr base, const Word* w, size_t n) -> bool {
    Directive d;
    d.kind = Directive::Kind::OsWrite;
    d.pa = base;
    d.words.assign(w, w + n);
    s.log.push_back(d);
    for (size_t k = 0; k < n; k++) {
      OpResult r = adversary_execute(
          s.st, EnclaveId::invalid(),
          AdversaryAction::tamper_mem(base + PhysAddr(k), w[k]));
      if (!r.ok()) return false;
    }
    return true;
  };

  bool ok = true;
  for (size_t i = 0; i < kScratchFrames.size(); i++)
    ok = ok && oswrite(kScratchFrames[i], &plan.scratch[i][ti], 1);
  ok = ok && oswrite(kWindowFrame, &plan.window_word, 1);
  ok = ok && oswrite(kAttackCodeFrame, plan.attack.data(), plan.attack.size());
  ok = ok && oswrite(kProtCodeFrame, plan.prog.data(), plan.prog.size());
  ok = ok && oswrite(kProtDataFrame, &plan.data_word, 1);
  ok = ok && oswrite(kSecretFrame, &plan.secret[ti], 1);
  if (!ok) return "setup memory write refused";

  Directive din;
  din.kind = Directive::Kind::Input;
  din.eid = s.root;
  din.words = plan.input_words;
  s.log.push_back(din);
  auto& tape = s.st.input[s.root.raw].words;
  tape.insert(tape.end(), plan.input_words.begin(), plan.input_words.end());

  OpResult r = apply_rec(s, Action{protected_launch(s.root)});
  if (!r.ok())
    return std::string("protected launch refused: ") + err_name(r.code);
  return std::nullopt;
}

void apply_event(Side& s, const Event& e) {
  force_pause(s);
  EnclaveId adv = EnclaveId::enclave(kAdvRaw);
  switch (e.k) {
    case Event::K::Tamper:
    case Event::K::TamperPt:
      apply_rec(s, Action{AdversaryArgs{e.adv, EnclaveId::invalid()}});
      break;
    case Event::K::AdvDestroy:
      apply_rec(s, Action{DestroyArgs{adv}});
      break;
    case Event::K::JunkRound: {
      apply_rec(s, Action{DestroyArgs{adv}});
      if (apply_rec(s, Action{e.junk}).ok() &&
          apply_rec(s, Action{EnterArgs{adv}}).ok())
        burst(s, e.steps);
      break;
    }
    case Event::K::AdvEnter:
      if (apply_rec(s, Action{EnterArgs{adv}}).ok()) burst(s, e.steps);
      break;
    case Event::K::AdvResume:
      if (apply_rec(s, Action{ResumeArgs{adv}}).ok()) burst(s, e.steps);
      break;
    case Event::K::AttackRound: {
      apply_rec(s, Action{DestroyArgs{adv}});
      if (apply_rec(s, Action{attack_launch()}).ok() &&
          apply_rec(s, Action{EnterArgs{adv}}).ok())
        burst(s, 2);
      break;
    }
    case Event::K::ProtRound: {
      EnclaveId m = s.family[e.fam_idx % s.family.size()];
      if (s.st.md(m).is_snapshot) break;
      bool paused = s.st.md(m).paused;
      OpResult r = paused ? apply_rec(s, Action{ResumeArgs{m}})
                          : apply_rec(s, Action{EnterArgs{m}});
      if (r.ok()) burst(s, e.steps);
      break;
    }
    case Event::K::SnapRoot: {
      if (s.st.md(s.root).is_snapshot) break;
      bool paused = s.st.md(s.root).paused;
      OpResult r = paused ? apply_rec(s, Action{ResumeArgs{s.root}})
                          : apply_rec(s, Action{EnterArgs{s.root}});
      if (r.ok()) apply_rec(s, Action{SnapshotArgs{}});
      break;
    }
    case Event::K::CloneProt: {
      s.last_clone.reset();
      EnclaveId parent = s.family[e.fam_idx % s.family.size()];
      CloneArgs ca{parent, EnclaveId::enclave(kChildRaw), e.grant};
      if (apply_rec(s, Action{ca}).ok()) {
        s.family.push_back(ca.child);
        s.last_clone = {parent, ca.child};
      }
      break;
    }
    case Event::K::DestroyChild: {
      EnclaveId child = EnclaveId::enclave(kChildRaw);
      auto it = std::find(s.family.begin(), s.family.end(), child);
      if (it == s.family.end()) break;
      if (apply_rec(s, Action{DestroyArgs{child}}).ok()) s.family.erase(it);
      break;
    }
  }
}

EnclaveStateView live_view(const PlatformState& st, EnclaveId e) {
  EnclaveStateView v = *project_enclave(st, e);
  if (st.e_curr == e) {
    v.pc = st.pc;
    v.regs = st.regs;
  }
  return v;
}

// Root ids are trace-local in measurement mode; fold them to one token so
// root_snapshot fields compare positionally.
uint32_t norm_id(const Side& s, EnclaveId id) {
  if (!is_valid(id)) return 0xffffffffu;
  if (id == s.root) return 0xfffffffeu;
  return id.raw;
}

std::optional<std::string> family_divergence(const Side& A, const Side& B,
                                             bool meas) {
  for (size_t i = 0; i < A.family.size(); i++) {
    EnclaveId ea = A.family[i];
    EnclaveId eb = B.family[i];
    const EnclaveMetadata& ma = A.st.md(ea);
    const EnclaveMetadata& mb = B.st.md(eb);
    std::ostringstream w;
    w << "family member " << i << " (ids " << ea.raw << "/" << eb.raw << "): ";
    if (ma.paused != mb.paused) return w.str() + "paused flags differ";
    if (ma.is_snapshot != mb.is_snapshot)
      return w.str() + "snapshot flags differ";
    if (ma.child_count != mb.child_count)
      return w.str() + "child counts differ";
    if (norm_id(A, ma.root_snapshot) != norm_id(B, mb.root_snapshot))
      return w.str() + "root snapshots differ";
    if (live_view(A.st, ea) != live_view(B.st, eb))
      return w.str() + "enclave views differ";
    if (A.st.input[ea.raw] != B.st.input[eb.raw])
      return w.str() + "input tapes differ";
    if (A.st.output[ea.raw] != B.st.output[eb.raw])
      return w.str() + "output tapes differ";
    if (meas && ma.measurement.canonical != mb.measurement.canonical)
      return w.str() + "measurements differ";
  }
  return std::nullopt;
}

void put32(std::vector<uint8_t>& o, uint32_t x) {
  for (int i = 0; i < 4; i++) o.push_back(uint8_t(x >> (8 * i)));
}

void put64(std::vector<uint8_t>& o, uint64_t x) {
  for (int i = 0; i < 8; i++) o.push_back(uint8_t(x >> (8 * i)));
}

void put_entry(std::vector<uint8_t>& o, const PageEntry& pe) {
  o.push_back(pe.mapped ? 1 : 0);
  put32(o, pe.pa);
  o.push_back(uint8_t(pe.perm.read) | uint8_t(pe.perm.write) << 1 |
              uint8_t(pe.perm.execute) << 2);
}

// Everything the OS-level adversary can see. Protected members contribute
// their OS-visible lifecycle bits only; their contexts, tables, tapes,
// reserve markings and measurements stay out (the measurement would carry
// the secret here, since the harness bakes it into the launch image).
// Non-protected enclaves are adversary property and count in full.
std::vector<uint8_t> adversary_projection(const Side& s) {
  const PlatformState& st = s.st;
  std::vector<uint8_t> o;
  auto fam_pos = [&](EnclaveId e) -> int {
    auto it = std::find(s.family.begin(), s.family.end(), e);
    return it == s.family.end() ? -1 : int(it - s.family.begin());
  };

  int cur = st.e_curr.is_os() ? -2 : fam_pos(st.e_curr);
  bool prot_running = cur >= 0;
  if (st.e_curr.is_os()) {
    o.push_back(0);
    put32(o, 0);
  } else if (prot_running) {
    o.push_back(1);
    put32(o, uint32_t(cur));
  } else {
    o.push_back(2);
    put32(o, st.e_curr.raw);
  }

  for (EnclaveId e : st.owner) put32(o, e.raw);

  Observation obs = observe_many(st, s.family);
  for (const auto& v : obs.view) {
    o.push_back(v.has_value() ? 1 : 0);
    put32(o, v.value_or(0));
  }

  if (!prot_running) {
    put32(o, st.pc);
    for (Word r : st.regs) put32(o, r);
    for (const PageEntry& pe : st.active_table) put_entry(o, pe);
  }

  for (uint32_t id = 1; id <= st.cfg.max_enclaves; id++) {
    EnclaveId e = EnclaveId::enclave(id);
    const EnclaveMetadata& m = st.md(e);
    bool prot = fam_pos(e) >= 0;
    o.push_back(prot ? 1 : 0);
    o.push_back(m.active ? 1 : 0);
    o.push_back(m.paused ? 1 : 0);
    o.push_back(m.is_snapshot ? 1 : 0);
    put64(o, m.child_count);
    put32(o, m.root_snapshot.raw);
    put32(o, m.ep);
    if (prot) continue;
    put32(o, m.pc);
    for (Word r : m.regs) put32(o, r);
    for (const PageEntry& pe : m.table) put_entry(o, pe);
    o.insert(o.end(), m.ev.begin(), m.ev.end());
    o.insert(o.end(), m.pa_free.begin(), m.pa_free.end());
    put32(o, uint32_t(m.measurement.canonical.size()));
    o.insert(o.end(), m.measurement.canonical.begin(),
             m.measurement.canonical.end());
    const Tape& t = st.input[id];
    put32(o, uint32_t(t.words.size()));
    for (Word w : t.words) put32(o, w);
    put64(o, t.pos);
    put32(o, uint32_t(st.output[id].size()));
    for (Word w : st.output[id]) put32(o, w);
  }
  return o;
}

std::string witness_doc(const Side& s) {
  return witness_text(s.st.cfg, s.log, state_digest(s.st));
}

std::string pair_doc(const Side& a, const Side& b) {
  return witness_doc(a) + "# === trace 2 ===\n" + witness_doc(b);
}

}  // namespace

PlatformConfig two_trace_config() {
  PlatformConfig cfg;
  cfg.n_va = 12;
  cfg.n_pa = 24;
  cfg.n_regs = 2;
  cfg.word_bits = 8;
  cfg.max_enclaves = 4;
  return cfg;
}

InvariantReport run_two_trace(const TwoTraceConfig& tt) {
  InvariantReport rep;
  rep.trials = 1;
  const PlatformConfig& cfg = tt.cfg;
  if (!cfg.valid() || cfg.n_va < 12 || cfg.n_pa < 24 || cfg.n_regs < 2 ||
      cfg.word_bits < 8 || cfg.max_enclaves < 4) {
    rep.misuse = true;
    rep.misuse_detail =
        "lockstep harness needs va>=12 pa>=24 regs>=2 word>=8 enclaves>=4";
    return rep;
  }

  SplitMix64 rng(tt.seed);
  TrialPlan plan = make_plan(tt, rng);
  Side a, b;
  auto bad = setup_side(a, tt, plan, 0);
  if (!bad) bad = setup_side(b, tt, plan, 1);
  if (bad) {
    rep.misuse = true;
    rep.misuse_detail = *bad;
    return rep;
  }

  auto checkpoint = [&](uint64_t idx) -> bool {
    size_t before = rep.violations.size();
    check_invariants_into(a.st, idx, rep);
    for (size_t k = before; k < rep.violations.size(); k++)
      rep.violations[k].scenario = witness_doc(a);
    size_t mid = rep.violations.size();
    check_invariants_into(b.st, idx, rep);
    for (size_t k = mid; k < rep.violations.size(); k++)
      rep.violations[k].scenario = witness_doc(b);
    if (rep.violations.size() != before) return false;

    if (a.family.size() != b.family.size()) {
      rep.misuse = true;
      rep.misuse_detail = "harness: protected family sizes diverged";
      return false;
    }
    if (tt.mode == TwoTraceMode::Confidentiality) {
      for (size_t i = 0; i < a.family.size(); i++) {
        if (a.st.output[a.family[i].raw] != b.st.output[b.family[i].raw]) {
          rep.misuse = true;
          rep.misuse_detail =
              "harness: protected program output depends on the secret";
          return false;
        }
      }
      if (adversary_projection(a) != adversary_projection(b)) {
        rep.violations.push_back({"confidentiality", idx,
                                  "adversary projections diverged",
                                  pair_doc(a, b)});
        return false;
      }
    } else {
      bool meas = tt.mode == TwoTraceMode::Measurement;
      if (auto w = family_divergence(a, b, meas)) {
        rep.violations.push_back(
            {meas ? "measurement" : "integrity", idx, *w, pair_doc(a, b)});
        return false;
      }
    }
    rep.states_checked++;
    return true;
  };

  if (!checkpoint(0)) return rep;
  for (uint32_t i = 0; i < plan.events.size(); i++) {
    const Event& e = plan.events[i];
    apply_event(a, e);
    apply_event(b, e);
    if (e.k == Event::K::CloneProt) {
      if (a.last_clone.has_value() != b.last_clone.has_value()) {
        rep.misuse = true;
        rep.misuse_detail = "harness: clone results diverged";
        return rep;
      }
      if (a.last_clone) {
        auto [pa_, ca_] = *a.last_clone;
        auto [pb_, cb_] = *b.last_clone;
        if (a.st.md(ca_).measurement.canonical !=
                a.st.md(pa_).measurement.canonical ||
            b.st.md(cb_).measurement.canonical !=
                b.st.md(pb_).measurement.canonical) {
          rep.violations.push_back(
              {"clone-measurement-inheritance", i + 1,
               "clone measurement differs from its parent", pair_doc(a, b)});
          return rep;
        }
        if (tt.mode == TwoTraceMode::Measurement &&
            a.st.md(ca_).measurement.canonical !=
                b.st.md(cb_).measurement.canonical) {
          rep.violations.push_back({"measurement", i + 1,
                                    "clone measurements diverged across traces",
                                    pair_doc(a, b)});
          return rep;
        }
      }
    }
    if (!checkpoint(i + 1)) return rep;
  }
  return rep;
}

InvariantReport two_trace_suite(TwoTraceMode mode, const PlatformConfig& cfg,
                                uint64_t seed, uint64_t trials,
                                uint32_t events) {
  InvariantReport total;
  SplitMix64 seeder(seed);
  for (uint64_t t = 0; t < trials; t++) {
    TwoTraceConfig tt{mode, cfg, seeder.next(), events};
    InvariantReport r = run_two_trace(tt);
    total.trials++;
    total.states_checked += r.states_checked;
    if (!r.violations.empty() || r.misuse) {
      for (auto& v : r.violations) {
        v.witness = "trial " + std::to_string(t) + ": " + v.witness;
        total.violations.push_back(std::move(v));
      }
      total.misuse = r.misuse;
      total.misuse_detail = r.misuse_detail;
      break;
    }
  }
  return total;
}

}  // namespace tapc
