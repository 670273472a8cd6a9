#include "tapc/measure.hpp"

#include "tapc/state.hpp"

namespace tapc {

uint64_t fnv1a64(const uint8_t* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; i++) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(const std::vector<uint8_t>& bytes) {
  return fnv1a64(bytes.data(), bytes.size());
}

bool is_initial_view(const EnclaveStateView& view) {
  if (view.pc != view.ep) return false;
  for (Word r : view.regs)
    if (r != 0) return false;
  return true;
}

static void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

static void put_word(std::vector<uint8_t>& out, Word w, uint32_t word_bits) {
  for (uint32_t b = 0; b < word_bits; b += 8) out.push_back(uint8_t(w >> b));
}

Measurement measure(const PlatformConfig& cfg, const EnclaveStateView& view) {
  Measurement m;
  put_u32(m.canonical, view.ep);
  for (uint32_t v = 0; v < cfg.n_va; v++) {
    const VaView& e = view.va[v];
    m.canonical.push_back(e.ev ? 1 : 0);
    m.canonical.push_back(uint8_t(e.perm.read) | uint8_t(e.perm.write) << 1 |
                          uint8_t(e.perm.execute) << 2);
    m.canonical.push_back(e.mapped ? 1 : 0);
    Word content = (e.ev && e.mapped) ? e.value.value_or(0) : 0;
    put_word(m.canonical, content, cfg.word_bits);
  }
  m.digest64 = fnv1a64(m.canonical);
  return m;
}

std::optional<Measurement> measure_checked(const PlatformConfig& cfg,
                                           const EnclaveStateView& view) {
  if (!is_initial_view(view)) return std::nullopt;
  return measure(cfg, view);
}

}  // namespace tapc
