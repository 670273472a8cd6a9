#include <doctest.h>

#include <set>

#include "rig.hpp"
#include "tapc/measure.hpp"
#include "tapc/state.hpp"

using namespace tapc;

TEST_CASE("fnv1a64 reference vectors") {
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ull);
  const uint8_t a[] = {'a'};
  CHECK(fnv1a64(a, 1) == 0xaf63dc4c8601ec8cull);
  const uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(fnv1a64(foobar, 6) == 0x85944171f73967e8ull);
}

static EnclaveStateView flat_view(const PlatformConfig& cfg) {
  EnclaveStateView v;
  v.regs.assign(cfg.n_regs, 0);
  v.va.resize(cfg.n_va);
  return v;
}

TEST_CASE("canonical encoding shape") {
  PlatformConfig cfg = tiny_cfg();
  EnclaveStateView v = flat_view(cfg);
  Measurement m = measure(cfg, v);
  CHECK(m.canonical.size() == 4 + cfg.n_va * (3 + cfg.word_bits / 8));
  CHECK(m.digest64 == fnv1a64(m.canonical));

  cfg.word_bits = 32;
  Measurement m32 = measure(cfg, flat_view(cfg));
  CHECK(m32.canonical.size() == 4 + cfg.n_va * (3 + 4));
}

TEST_CASE("measurement binds the initial view") {
  PlatformConfig cfg = tiny_cfg();
  EnclaveStateView base = flat_view(cfg);
  base.va[0] = {true, perm_rx(), true, Word{0x09}};
  base.va[1] = {true, perm_rw(), true, Word{0x00}};
  uint64_t d0 = measure(cfg, base).digest64;

  std::set<uint64_t> seen{d0};
  auto distinct = [&](EnclaveStateView v) {
    uint64_t d = measure(cfg, v).digest64;
    CHECK(!seen.count(d));
    seen.insert(d);
  };

  EnclaveStateView v = base;
  v.ep = 1;
  distinct(v);
  v = base;
  v.va[0].perm = perm_rwx();
  distinct(v);
  v = base;
  v.va[1].ev = false;
  distinct(v);
  v = base;
  v.va[1].mapped = false;
  distinct(v);
  v = base;
  v.va[0].value = Word{0x0a};
  distinct(v);
  v = base;
  v.va[2] = {true, perm_r(), false, std::nullopt};
  distinct(v);

  SUBCASE("identical views collide") {
    CHECK(measure(cfg, base) == measure(cfg, base));
  }

  SUBCASE("content behind non-private or unmapped VAs is ignored") {
    EnclaveStateView w = base;
    w.va[2] = {true, perm_r(), false, Word{0x77}};   // hand-built, not ev
    EnclaveStateView w2 = base;
    w2.va[2] = {true, perm_r(), false, Word{0x11}};
    CHECK(measure(cfg, w).canonical == measure(cfg, w2).canonical);
  }
}

TEST_CASE("measure_checked accepts exactly initial views") {
  PlatformConfig cfg = tiny_cfg();
  EnclaveStateView v = flat_view(cfg);
  v.ep = 2;
  v.pc = 2;
  CHECK(is_initial_view(v));
  CHECK(measure_checked(cfg, v));

  SUBCASE("advanced pc") {
    v.pc = 4;
    CHECK(!is_initial_view(v));
    CHECK(!measure_checked(cfg, v));
  }
  SUBCASE("dirty register") {
    v.regs[1] = 3;
    CHECK(!measure_checked(cfg, v));
  }
}

TEST_CASE("launch measurement matches the projected view") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::OUT, 0, 0}, {Opcode::EXIT, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, EnclaveId::enclave(1), 0, 4)}).ok());

  auto view = project_enclave(st, EnclaveId::enclave(1));
  REQUIRE(view);
  auto m = measure_checked(cfg, *view);
  REQUIRE(m);
  CHECK(*m == st.md(EnclaveId::enclave(1)).measurement);
}
