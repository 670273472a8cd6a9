#include <doctest.h>

#include "rig.hpp"
#include "tapc/ops.hpp"

using namespace tapc;

namespace {

const EnclaveId e1 = EnclaveId::enclave(1);
const EnclaveId e2 = EnclaveId::enclave(2);
const EnclaveId e3 = EnclaveId::enclave(3);

Err code(PlatformState& st, const Action& a) { return apply_mut(st, a).code; }

// Applies an action expected to fail and checks the failure changed nothing.
void check_rejected(const PlatformState& st, const Action& a, Err want) {
  auto [next, r] = apply(st, a);
  CHECK(r.code == want);
  CHECK(serialize_state(next) == serialize_state(st));
}

PlatformState snapshot_rig(const PlatformConfig& cfg) {
  // e1 launched with 4 code VAs + 1 data VA on frames 0..4, then frozen.
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOADI, 0, 5}, {Opcode::SNAP, 0, 0}});
  st.mem[4] = 0xaa;
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 4)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());
  REQUIRE(apply_mut(st, Action{StepArgs{}}).step->kind ==
          StepOutcome::Kind::Continued);
  REQUIRE(apply_mut(st, Action{StepArgs{}}).step->kind ==
          StepOutcome::Kind::Snapshotted);
  return st;
}

}  // namespace

TEST_CASE("launch validation") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  LaunchArgs good = std_launch(cfg, e1, 0, 2);

  SUBCASE("identifier checks") {
    LaunchArgs a = good;
    a.eid = EnclaveId::os();
    check_rejected(st, Action{a}, Err::InvalidId);
    a.eid = EnclaveId::invalid();
    check_rejected(st, Action{a}, Err::InvalidId);
    a.eid = EnclaveId::enclave(cfg.max_enclaves + 1);
    check_rejected(st, Action{a}, Err::BadArguments);
  }

  SUBCASE("range checks") {
    LaunchArgs a = good;
    a.ep = cfg.n_va;
    check_rejected(st, Action{a}, Err::BadArguments);
    a = good;
    a.map.push_back({cfg.n_va, 0, perm_r()});
    check_rejected(st, Action{a}, Err::BadArguments);
    a = good;
    a.map.push_back({3, cfg.n_pa, perm_r()});
    check_rejected(st, Action{a}, Err::BadArguments);
    a = good;
    a.ev.push_back(cfg.n_va);
    check_rejected(st, Action{a}, Err::BadArguments);
    a = good;
    a.pages.push_back(cfg.n_pa);
    check_rejected(st, Action{a}, Err::BadArguments);
  }

  SUBCASE("duplicate mapping") {
    LaunchArgs a = good;
    a.map.push_back({0, 5, perm_r()});
    check_rejected(st, Action{a}, Err::BadArguments);
  }

  SUBCASE("private pages must be granted, injectively") {
    LaunchArgs a = good;
    a.pages.pop_back();   // drop the data frame but keep it mapped private
    check_rejected(st, Action{a}, Err::BadArguments);

    a = good;   // two private VAs on one frame
    a.map[2].pa = a.map[0].pa;
    a.pages.pop_back();
    check_rejected(st, Action{a}, Err::BadArguments);
  }

  SUBCASE("entrypoint must be mapped, private and executable") {
    LaunchArgs a = good;
    a.ep = 3;   // unmapped
    check_rejected(st, Action{a}, Err::BadArguments);
    a = good;
    a.map[0].perm = perm_rw();
    check_rejected(st, Action{a}, Err::BadArguments);
    a = good;
    a.ev.erase(a.ev.begin());   // entrypoint not private
    check_rejected(st, Action{a}, Err::BadArguments);
  }

  SUBCASE("ownership transfer and double launch") {
    REQUIRE(code(st, Action{good}) == Err::Ok);
    CHECK(st.owner[0] == e1);
    CHECK(st.owner[2] == e1);
    CHECK(st.md(e1).active);
    CHECK(st.md(e1).pc == 0);
    CHECK(!st.md(e1).paused);
    CHECK(st.md(e1).root_snapshot.is_invalid());

    check_rejected(st, Action{good}, Err::AlreadyActive);

    LaunchArgs overlap = std_launch(cfg, e2, 2, 2);   // frame 2 now e1's
    check_rejected(st, Action{overlap}, Err::PageNotOSOwned);
  }

  SUBCASE("only the OS launches") {
    REQUIRE(code(st, Action{good}) == Err::Ok);
    REQUIRE(code(st, Action{EnterArgs{e1}}) == Err::Ok);
    LaunchArgs other = std_launch(cfg, e2, 8, 2);
    CHECK(code(st, Action{other}) == Err::NotOS);
  }
}

TEST_CASE("enter, pause, resume, exit") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOADI, 0, 7}, {Opcode::LOADI, 1, 9}});
  REQUIRE(code(st, Action{std_launch(cfg, e1, 0, 4)}) == Err::Ok);

  check_rejected(st, Action{EnterArgs{e2}}, Err::NotActive);
  check_rejected(st, Action{ResumeArgs{e1}}, Err::NotPaused);
  check_rejected(st, Action{ExitArgs{}}, Err::NotEnclave);
  check_rejected(st, Action{PauseArgs{}}, Err::NotEnclave);
  check_rejected(st, Action{SnapshotArgs{}}, Err::NotEnclave);

  st.pc = 0x42;   // give the OS context something to restore
  REQUIRE(code(st, Action{EnterArgs{e1}}) == Err::Ok);
  CHECK(st.e_curr == e1);
  CHECK(st.pc == 0);
  CHECK(st.regs == std::vector<Word>{0, 0});
  CHECK(code(st, Action{EnterArgs{e1}}) == Err::NotOS);

  REQUIRE(apply_mut(st, Action{StepArgs{}}).step->kind ==
          StepOutcome::Kind::Continued);
  CHECK(st.regs[0] == 7);

  SUBCASE("pause saves the continuation, resume restores it") {
    REQUIRE(code(st, Action{PauseArgs{}}) == Err::Ok);
    CHECK(st.e_curr.is_os());
    CHECK(st.pc == 0x42);
    CHECK(st.md(e1).paused);
    CHECK(st.md(e1).pc == 2);
    CHECK(st.md(e1).regs == std::vector<Word>{7, 0});

    check_rejected(st, Action{EnterArgs{e1}}, Err::BadArguments);

    REQUIRE(code(st, Action{ResumeArgs{e1}}) == Err::Ok);
    CHECK(st.pc == 2);
    CHECK(st.regs == std::vector<Word>{7, 0});
    REQUIRE(apply_mut(st, Action{StepArgs{}}).step->kind ==
            StepOutcome::Kind::Continued);
    CHECK(st.regs[1] == 9);
  }

  SUBCASE("exit drops the continuation") {
    REQUIRE(code(st, Action{ExitArgs{}}) == Err::Ok);
    CHECK(st.e_curr.is_os());
    CHECK(st.pc == 0x42);
    CHECK(!st.md(e1).paused);
    CHECK(st.md(e1).pc == 0);   // untouched since launch
    CHECK(st.md(e1).regs == std::vector<Word>{0, 0});

    REQUIRE(code(st, Action{EnterArgs{e1}}) == Err::Ok);
    CHECK(st.pc == 0);   // back at the entrypoint
    CHECK(st.regs == std::vector<Word>{0, 0});
  }
}

TEST_CASE("destroy") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOADI, 0, 3}, {Opcode::OUT, 0, 0}});
  REQUIRE(code(st, Action{std_launch(cfg, e1, 0, 4)}) == Err::Ok);
  REQUIRE(code(st, Action{EnterArgs{e1}}) == Err::Ok);
  REQUIRE(code(st, Action{StepArgs{}}) == Err::Ok);
  REQUIRE(code(st, Action{StepArgs{}}) == Err::Ok);
  REQUIRE(code(st, Action{PauseArgs{}}) == Err::Ok);
  st.input[e1.raw].words = {1, 2};

  check_rejected(st, Action{DestroyArgs{e2}}, Err::NotActive);
  check_rejected(st, Action{DestroyArgs{EnclaveId::os()}}, Err::InvalidId);

  REQUIRE(code(st, Action{DestroyArgs{e1}}) == Err::Ok);
  CHECK(st.md(e1) == blank_metadata(cfg));
  for (uint32_t p = 0; p <= 4; p++) {
    CHECK(st.owner[p].is_os());
    CHECK(st.mem[p] == 0);   // zeroed on release
  }
  CHECK(st.input[e1.raw].words.empty());
  CHECK(st.output[e1.raw].empty());

  // The slot is reusable.
  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  CHECK(code(st, Action{std_launch(cfg, e1, 0, 2)}) == Err::Ok);
}

TEST_CASE("destroy mutations leak exactly what they claim") {
  PlatformConfig cfg = tiny_cfg();
  cfg.mutations.destroy_skip_zeroing = true;
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  st.mem[2] = 0x5e;
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 2)}).ok());
  REQUIRE(apply_mut(st, Action{DestroyArgs{e1}}).ok());
  CHECK(st.owner[2].is_os());
  CHECK(st.mem[2] == 0x5e);   // the leak the checker must catch
}

TEST_CASE("snapshot and clone") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = snapshot_rig(cfg);

  CHECK(st.e_curr.is_os());
  const EnclaveMetadata& m1 = st.md(e1);
  CHECK(m1.is_snapshot);
  CHECK(m1.paused);
  CHECK(m1.pc == 4);   // continuation after the SNAP
  CHECK(m1.regs == std::vector<Word>{5, 0});
  CHECK(m1.child_count == 0);

  check_rejected(st, Action{EnterArgs{e1}}, Err::IsSnapshot);
  check_rejected(st, Action{ResumeArgs{e1}}, Err::IsSnapshot);

  SUBCASE("clone validation") {
    check_rejected(st, Action{CloneArgs{EnclaveId::os(), e2, {}}}, Err::InvalidId);
    check_rejected(st, Action{CloneArgs{e1, EnclaveId::invalid(), {}}},
                   Err::InvalidId);
    check_rejected(st, Action{CloneArgs{e2, e2, {}}}, Err::SelfClone);
    check_rejected(st, Action{CloneArgs{e2, e3, {}}}, Err::NotActive);
    check_rejected(st, Action{CloneArgs{e1, e1, {}}}, Err::SelfClone);
    check_rejected(st, Action{CloneArgs{e1, e2, {cfg.n_pa}}}, Err::BadArguments);
    check_rejected(st, Action{CloneArgs{e1, e2, {0}}}, Err::PageNotOSOwned);
  }

  SUBCASE("clone of a snapshot shares every frame") {
    CloneStats stats;
    REQUIRE(op_clone(st, CloneArgs{e1, e2, {12}}, &stats).ok());
    CHECK(stats.pages_copied == 0);
    CHECK(st.md(e1).child_count == 1);

    const EnclaveMetadata& m2 = st.md(e2);
    CHECK(m2.root_snapshot == e1);
    CHECK(m2.table == st.md(e1).table);
    CHECK(m2.pc == 4);
    CHECK(m2.regs == std::vector<Word>{5, 0});
    CHECK(m2.paused);
    CHECK(m2.measurement == st.md(e1).measurement);
    CHECK(st.owner[12] == e2);
    CHECK(m2.pa_free[12] == 1);

    auto v1 = project_enclave(st, e1);
    auto v2 = project_enclave(st, e2);
    CHECK(*v1 == *v2);

    SUBCASE("destroy order is children first") {
      check_rejected(st, Action{DestroyArgs{e1}}, Err::SnapshotHasChildren);
      REQUIRE(code(st, Action{DestroyArgs{e2}}) == Err::Ok);
      CHECK(st.md(e1).child_count == 0);
      CHECK(st.owner[12].is_os());
      REQUIRE(code(st, Action{DestroyArgs{e1}}) == Err::Ok);
    }

    SUBCASE("second clone, from the same root") {
      REQUIRE(code(st, Action{CloneArgs{e2, e3, {13}}}) == Err::Ok);
      CHECK(st.md(e3).root_snapshot == e1);   // sharing stays one level deep
      CHECK(st.md(e1).child_count == 2);
      CHECK(st.md(e2).child_count == 0);
    }

    SUBCASE("snapshot of a clone is refused") {
      REQUIRE(code(st, Action{ResumeArgs{e2}}) == Err::Ok);
      CHECK(apply_mut(st, Action{SnapshotArgs{}}).code == Err::HasRootSnapshot);
    }
  }

  SUBCASE("insufficient reserve for a diverged clone") {
    REQUIRE(code(st, Action{CloneArgs{e1, e2, {12, 13}}}) == Err::Ok);
    REQUIRE(code(st, Action{ResumeArgs{e2}}) == Err::Ok);
    // Diverge one page, then clone the diverged child with an empty grant.
    REQUIRE(op_cow_fault(st, e2, 4).ok());
    REQUIRE(code(st, Action{PauseArgs{}}) == Err::Ok);
    CHECK(required_copy_count(st, e2) == 1);
    CHECK(!sufficient_mem(st, e2, {}));
    CHECK(sufficient_mem(st, e2, {14}));
    check_rejected(st, Action{CloneArgs{e2, e3, {}}}, Err::InsufficientMemory);

    CloneStats stats;
    REQUIRE(op_clone(st, CloneArgs{e2, e3, {14}}, &stats).ok());
    CHECK(stats.pages_copied == 1);
    CHECK(st.md(e3).root_snapshot == e1);
    CHECK(st.md(e1).child_count == 2);
    CHECK(st.mem[14] == st.mem[12]);   // the diverged word travelled
    CHECK(*project_enclave(st, e3) == *project_enclave(st, e2));
  }
}

TEST_CASE("clone of a plain enclave is a full copy") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOADI, 0, 5}, {Opcode::SNAP, 0, 0}});
  st.mem[4] = 0x21;
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 4)}).ok());

  CHECK(required_copy_count(st, e1) == 5);
  check_rejected(st, Action{CloneArgs{e1, e2, {8, 9, 10, 11}}},
                 Err::InsufficientMemory);
  check_rejected(st, Action{CloneArgs{e1, e2, {8, 8, 9, 9, 10}}},
                 Err::InsufficientMemory);   // duplicates collapse

  CloneStats stats;
  REQUIRE(op_clone(st, CloneArgs{e1, e2, {8, 9, 10, 11, 12}}, &stats).ok());
  CHECK(stats.pages_copied == 5);
  CHECK(st.md(e2).root_snapshot.is_invalid());
  CHECK(st.md(e1).child_count == 0);
  for (uint32_t v = 0; v <= 4; v++) {
    CHECK(st.md(e2).table[v].pa == 8 + v);   // lowest frames, VA order
    CHECK(st.mem[8 + v] == st.mem[v]);
  }
  CHECK(*project_enclave(st, e2) == *project_enclave(st, e1));
  for (uint32_t p = 8; p <= 12; p++) CHECK(st.md(e2).pa_free[p] == 0);

  // Both copies are independently destroyable.
  REQUIRE(apply_mut(st, Action{DestroyArgs{e1}}).ok());
  REQUIRE(apply_mut(st, Action{DestroyArgs{e2}}).ok());
}

TEST_CASE("apply leaves the input state intact") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = snapshot_rig(cfg);
  auto before = serialize_state(st);

  auto [next, r] = apply(st, Action{CloneArgs{e1, e2, {12}}});
  CHECK(r.ok());
  CHECK(serialize_state(st) == before);
  CHECK(serialize_state(next) != before);
  CHECK(is_active(next, e2));
  CHECK(!is_active(st, e2));
}
