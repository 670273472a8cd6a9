#include <doctest.h>

#include "rig.hpp"
#include "tapc/state.hpp"

using namespace tapc;

TEST_CASE("initial state shape") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);

  CHECK(st.e_curr.is_os());
  CHECK(st.pc == 0);
  CHECK(st.regs == std::vector<Word>(cfg.n_regs, 0));
  CHECK(st.mem == std::vector<Word>(cfg.n_pa, 0));
  CHECK(st.active_table.size() == cfg.n_va);
  for (const auto& e : st.active_table) CHECK(!e.mapped);
  for (EnclaveId o : st.owner) CHECK(o.is_os());
  CHECK(st.meta.size() == cfg.max_enclaves + 1);
  for (const auto& m : st.meta) CHECK(m == blank_metadata(cfg));
  CHECK(st.input.size() == cfg.max_enclaves + 1);
  CHECK(st.output.size() == cfg.max_enclaves + 1);
}

TEST_CASE("digest is deterministic and sensitive") {
  PlatformState a = initial_state(tiny_cfg());
  PlatformState b = initial_state(tiny_cfg());
  CHECK(state_digest(a) == state_digest(b));
  CHECK(serialize_state(a) == serialize_state(b));

  SUBCASE("memory word") {
    b.mem[3] = 1;
    CHECK(state_digest(a) != state_digest(b));
  }
  SUBCASE("owner map") {
    b.owner[0] = EnclaveId::enclave(1);
    CHECK(state_digest(a) != state_digest(b));
  }
  SUBCASE("current context") {
    b.pc = 2;
    CHECK(state_digest(a) != state_digest(b));
  }
  SUBCASE("input tape position") {
    a.input[1].words = {4, 5};
    b.input[1].words = {4, 5};
    b.input[1].pos = 1;
    CHECK(state_digest(a) != state_digest(b));
  }
  SUBCASE("mutations are not state") {
    b.cfg.mutations.store_check_disabled = true;
    b.cfg.mutations.observe_exposes_protected = true;
    CHECK(state_digest(a) == state_digest(b));
  }
}

TEST_CASE("projection and observation") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  EnclaveId e1 = EnclaveId::enclave(1);

  CHECK(!project_enclave(st, EnclaveId::os()));
  CHECK(!project_enclave(st, EnclaveId::invalid()));
  CHECK(!project_enclave(st, EnclaveId::enclave(99)));
  CHECK(!project_enclave(st, e1));   // inactive
  CHECK(!observe(st, EnclaveId::os()));

  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  st.mem[2] = 0x5a;   // data page content
  REQUIRE(do_apply(st, Action{std_launch(cfg, e1, 0, 2)}).ok());

  auto view = project_enclave(st, e1);
  REQUIRE(view);
  CHECK(view->ep == 0);
  CHECK(view->pc == 0);
  CHECK(view->va[2].value == 0x5a);
  CHECK(view->va[3].mapped == false);
  CHECK(!view->va[3].value);

  SUBCASE("observe blanks exactly the protected pages") {
    st.mem[7] = 0x11;   // OS page
    auto obs = observe(st, e1);
    REQUIRE(obs);
    for (uint32_t p = 0; p < 3; p++) CHECK(!obs->view[p]);
    CHECK(obs->view[7] == 0x11);

    auto other = observe(st, EnclaveId::enclave(2));
    REQUIRE(other);
    CHECK(other->view[2] == 0x5a);   // e1 not protected for e2's run
  }

  SUBCASE("observe mutation exposes everything") {
    st.cfg.mutations.observe_exposes_protected = true;
    auto obs = observe(st, e1);
    REQUIRE(obs);
    CHECK(obs->view[2] == 0x5a);
  }

  SUBCASE("observe_unowned hides all enclave pages") {
    Observation obs = observe_unowned(st);
    for (uint32_t p = 0; p < 3; p++) CHECK(!obs.view[p]);
    CHECK(obs.view[7] == 0);
  }
}

TEST_CASE("views are placement independent") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  load_program(st, 8, {{Opcode::EXIT, 0, 0}});
  st.mem[2] = 0x33;
  st.mem[10] = 0x33;

  REQUIRE(do_apply(st, Action{std_launch(cfg, EnclaveId::enclave(1), 0, 2)}).ok());
  REQUIRE(do_apply(st, Action{std_launch(cfg, EnclaveId::enclave(2), 8, 2)}).ok());

  auto v1 = project_enclave(st, EnclaveId::enclave(1));
  auto v2 = project_enclave(st, EnclaveId::enclave(2));
  REQUIRE(v1);
  REQUIRE(v2);
  CHECK(*v1 == *v2);   // same logical content at different frames
  CHECK(st.md(EnclaveId::enclave(1)).measurement ==
        st.md(EnclaveId::enclave(2)).measurement);
}

TEST_CASE("protected mask covers the root snapshot") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  EnclaveId e1 = EnclaveId::enclave(1), e2 = EnclaveId::enclave(2);

  load_program(st, 0, {{Opcode::LOADI, 0, 5}, {Opcode::SNAP, 0, 0}});
  REQUIRE(do_apply(st, Action{std_launch(cfg, e1, 0, 4)}).ok());
  REQUIRE(do_apply(st, Action{EnterArgs{e1}}).ok());
  REQUIRE(do_apply(st, Action{StepArgs{}}).ok());
  REQUIRE(do_apply(st, Action{StepArgs{}}).step->kind ==
          StepOutcome::Kind::Snapshotted);
  REQUIRE(do_apply(st, Action{CloneArgs{e1, e2, {12}}}).ok());

  auto mask = protected_mask(st, e2);
  REQUIRE(mask);
  for (uint32_t p = 0; p <= 4; p++) CHECK((*mask)[p] == 1);   // e1's frames
  CHECK((*mask)[12] == 1);                                    // e2's reserve
  CHECK((*mask)[6] == 0);
}
