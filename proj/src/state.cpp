#include "tapc/state.hpp"

namespace tapc {

std::string perm_to_string(Perm p) {
  std::string s;
  if (p.read) s += 'r';
  if (p.write) s += 'w';
  if (p.execute) s += 'x';
  return s.empty() ? "-" : s;
}

bool perm_from_string(const std::string& s, Perm& out) {
  out = Perm{};
  if (s == "-" || s.empty()) return true;
  for (char c : s) {
    switch (c) {
      case 'r': out.read = true; break;
      case 'w': out.write = true; break;
      case 'x': out.execute = true; break;
      default: return false;
    }
  }
  return true;
}

EnclaveMetadata blank_metadata(const PlatformConfig& cfg) {
  EnclaveMetadata m;
  m.table.resize(cfg.n_va);
  m.ev.assign(cfg.n_va, 0);
  m.regs.assign(cfg.n_regs, 0);
  m.pa_free.assign(cfg.n_pa, 0);
  return m;
}

PlatformState initial_state(const PlatformConfig& cfg) {
  PlatformState st;
  st.cfg = cfg;
  st.regs.assign(cfg.n_regs, 0);
  st.mem.assign(cfg.n_pa, 0);
  st.active_table.resize(cfg.n_va);
  st.owner.assign(cfg.n_pa, EnclaveId::os());
  st.meta.assign(cfg.max_enclaves + 1, blank_metadata(cfg));
  st.input.resize(cfg.max_enclaves + 1);
  st.output.resize(cfg.max_enclaves + 1);
  return st;
}

bool is_active(const PlatformState& st, EnclaveId e) {
  return is_valid(e) && st.in_range(e) && st.md(e).active;
}

std::optional<std::vector<uint8_t>> protected_mask(const PlatformState& st,
                                                   EnclaveId e) {
  if (!is_valid(e) || !st.in_range(e)) return std::nullopt;
  std::vector<uint8_t> mask(st.cfg.n_pa, 0);
  EnclaveId rs = st.md(e).root_snapshot;
  bool has_rs = is_valid(rs) && st.in_range(rs);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (st.owner[p] == e || (has_rs && st.owner[p] == rs)) mask[p] = 1;
  }
  return mask;
}

std::optional<EnclaveStateView> project_enclave(const PlatformState& st,
                                                EnclaveId e) {
  if (!is_active(st, e)) return std::nullopt;
  const EnclaveMetadata& m = st.md(e);
  EnclaveStateView view;
  view.ep = m.ep;
  view.pc = m.pc;
  view.regs = m.regs;
  view.va.resize(st.cfg.n_va);
  for (uint32_t v = 0; v < st.cfg.n_va; v++) {
    VaView& out = view.va[v];
    out.mapped = m.table[v].mapped;
    out.perm = m.table[v].perm;
    out.ev = m.ev[v] != 0;
    if (out.ev && out.mapped) out.value = st.mem[m.table[v].pa];
  }
  return view;
}

std::optional<Observation> observe(const PlatformState& st, EnclaveId e) {
  auto mask = protected_mask(st, e);
  if (!mask) return std::nullopt;
  Observation obs;
  obs.view.resize(st.cfg.n_pa);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (!(*mask)[p] || st.cfg.mutations.observe_exposes_protected)
      obs.view[p] = st.mem[p];
  }
  return obs;
}

Observation observe_many(const PlatformState& st,
                         const std::vector<EnclaveId>& prot) {
  std::vector<uint8_t> blank(st.cfg.n_pa, 0);
  for (EnclaveId e : prot) {
    auto mask = protected_mask(st, e);
    if (!mask) continue;
    for (uint32_t p = 0; p < st.cfg.n_pa; p++)
      if ((*mask)[p]) blank[p] = 1;
  }
  Observation obs;
  obs.view.resize(st.cfg.n_pa);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (!blank[p] || st.cfg.mutations.observe_exposes_protected)
      obs.view[p] = st.mem[p];
  }
  return obs;
}

Observation observe_unowned(const PlatformState& st) {
  Observation obs;
  obs.view.resize(st.cfg.n_pa);
  for (uint32_t p = 0; p < st.cfg.n_pa; p++) {
    if (st.owner[p].is_os()) obs.view[p] = st.mem[p];
  }
  return obs;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  put_u32(out, uint32_t(v));
  put_u32(out, uint32_t(v >> 32));
}

void put_entry(std::vector<uint8_t>& out, const PageEntry& e) {
  out.push_back(e.mapped ? 1 : 0);
  put_u32(out, e.pa);
  out.push_back(uint8_t(e.perm.read) | uint8_t(e.perm.write) << 1 |
                uint8_t(e.perm.execute) << 2);
}

void put_words(std::vector<uint8_t>& out, const std::vector<Word>& ws) {
  put_u32(out, uint32_t(ws.size()));
  for (Word w : ws) put_u32(out, w);
}

}  // namespace

std::vector<uint8_t> serialize_state(const PlatformState& st) {
  std::vector<uint8_t> out;
  out.reserve(256);
  put_u32(out, st.cfg.n_va);
  put_u32(out, st.cfg.n_pa);
  put_u32(out, st.cfg.n_regs);
  put_u32(out, st.cfg.word_bits);
  put_u32(out, st.cfg.max_enclaves);
  put_u32(out, st.pc);
  put_words(out, st.regs);
  put_words(out, st.mem);
  for (const PageEntry& e : st.active_table) put_entry(out, e);
  put_u32(out, st.e_curr.raw);
  for (EnclaveId o : st.owner) put_u32(out, o.raw);
  for (const EnclaveMetadata& m : st.meta) {
    out.push_back(m.active ? 1 : 0);
    put_u32(out, m.ep);
    for (const PageEntry& e : m.table) put_entry(out, e);
    out.insert(out.end(), m.ev.begin(), m.ev.end());
    put_u32(out, m.pc);
    put_words(out, m.regs);
    out.push_back(m.paused ? 1 : 0);
    out.push_back(m.is_snapshot ? 1 : 0);
    put_u64(out, m.child_count);
    put_u32(out, m.root_snapshot.raw);
    out.insert(out.end(), m.pa_free.begin(), m.pa_free.end());
    put_u32(out, uint32_t(m.measurement.canonical.size()));
    out.insert(out.end(), m.measurement.canonical.begin(),
               m.measurement.canonical.end());
  }
  for (const Tape& t : st.input) {
    put_u64(out, t.pos);
    put_words(out, t.words);
  }
  for (const auto& o : st.output) put_words(out, o);
  return out;
}

uint64_t state_digest(const PlatformState& st) {
  return fnv1a64(serialize_state(st));
}

uint64_t state_digest2(const std::vector<uint8_t>& bytes) {
  // FNV-1 (multiply before xor) with a distinct basis.
  uint64_t h = 0xaf63bd4c8601b7dfull;
  for (uint8_t b : bytes) {
    h *= 0x100000001b3ull;
    h ^= b;
  }
  return h;
}

}  // namespace tapc
