#include <doctest.h>

#include "rig.hpp"
#include "tapc/machine.hpp"
#include "tapc/ops.hpp"

using namespace tapc;

namespace {

const EnclaveId e1 = EnclaveId::enclave(1);
const EnclaveId e2 = EnclaveId::enclave(2);
const EnclaveId e3 = EnclaveId::enclave(3);

StepOutcome step(PlatformState& st) {
  OpResult r = apply_mut(st, Action{StepArgs{}});
  REQUIRE(r.ok());
  REQUIRE(r.step);
  return *r.step;
}

}  // namespace

TEST_CASE("encode/decode round-trips every valid instruction") {
  PlatformConfig cfg = tiny_cfg();
  int count = 0;
  for (uint32_t op = 0x01; op <= 0x09; op++) {
    for (uint32_t a = 0; a < 16; a++) {
      for (uint32_t b = 0; b < 16; b++) {
        Instruction ins{Opcode(op), a, b};
        auto enc = encode(cfg, ins);
        if (!enc) continue;
        auto dec = decode(cfg, enc->first, enc->second);
        REQUIRE(dec);
        CHECK(*dec == ins);
        count++;
      }
    }
  }
  // LOADI 2x16, LOAD/STORE/JNZ 2x8 each, ADD 2x2, IN/OUT 2 each, SNAP/EXIT.
  CHECK(count == 32 + 3 * 16 + 4 + 2 * 2 + 2);
}

TEST_CASE("decode rejects junk") {
  PlatformConfig cfg = tiny_cfg();
  CHECK(!decode(cfg, 0x00, 0));
  CHECK(!decode(cfg, 0x0a, 0));
  CHECK(!decode(cfg, 0xff, 0));
  CHECK(!decode(cfg, Word(Opcode::LOADI), 0x02));    // register 2 of 2
  CHECK(!decode(cfg, Word(Opcode::LOAD), 0x80));     // va 8 of 8
  CHECK(!decode(cfg, Word(Opcode::ADD), 0x21));      // second reg oob
  CHECK(decode(cfg, Word(Opcode::IN), 0xf0));        // high field ignored
  CHECK(!encode(cfg, {Opcode::LOADI, 2, 0}));
  CHECK(!encode(cfg, {Opcode::LOADI, 0, 16}));       // immediate over half-word
  CHECK(!encode(cfg, {Opcode::JNZ, 0, 8}));
  CHECK(!encode(cfg, {Opcode::EXIT, 1, 0}));
}

TEST_CASE("straight-line program with io") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::IN, 0, 0},
                       {Opcode::ADD, 0, 0},
                       {Opcode::OUT, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 6)}).ok());
  st.input[e1.raw].words = {5};
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());

  CHECK(step(st).kind == StepOutcome::Kind::Continued);
  CHECK(st.regs[0] == 5);
  CHECK(st.input[e1.raw].pos == 1);
  CHECK(step(st).kind == StepOutcome::Kind::Continued);
  CHECK(st.regs[0] == 10);
  StepOutcome out = step(st);
  CHECK(out.kind == StepOutcome::Kind::Output);
  CHECK(out.output == 10);
  CHECK(st.output[e1.raw] == std::vector<Word>{10});

  SUBCASE("running off the code faults and pauses") {
    StepOutcome f = step(st);   // pc=6, the data page, rw but not executable
    CHECK(f.kind == StepOutcome::Kind::Faulted);
    CHECK(f.fault == StepFault::PermDenied);
    CHECK(st.e_curr.is_os());
    CHECK(st.md(e1).paused);
    CHECK(st.md(e1).pc == 6);
    CHECK(st.md(e1).regs == std::vector<Word>{10, 0});
  }
}

TEST_CASE("arithmetic masks to the word size") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::IN, 0, 0},
                       {Opcode::ADD, 0, 0},
                       {Opcode::OUT, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 6)}).ok());
  st.input[e1.raw].words = {0x1ff};   // wider than a word
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());

  step(st);
  CHECK(st.regs[0] == 0xff);   // input masked on the way in
  step(st);
  CHECK(st.regs[0] == 0xfe);   // 0x1fe wrapped at 8 bits
  CHECK(step(st).output == 0xfe);
}

TEST_CASE("jnz loops") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  // r0 = input; loop: out r0, jnz r1 -> 0 with r1 = 0 falls through.
  load_program(st, 0, {{Opcode::LOADI, 0, 1}, {Opcode::JNZ, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 4)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());

  CHECK(step(st).kind == StepOutcome::Kind::Continued);
  CHECK(st.pc == 2);
  CHECK(step(st).kind == StepOutcome::Kind::Continued);
  CHECK(st.pc == 0);   // taken
  step(st);
  CHECK(st.pc == 2);

  SUBCASE("not taken falls through") {
    st.regs[0] = 0;
    CHECK(step(st).kind == StepOutcome::Kind::Continued);
    CHECK(st.pc == 4);
  }
}

TEST_CASE("input exhaustion faults, refill and resume recovers") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::IN, 0, 0}, {Opcode::OUT, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 4)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());

  PlatformState before = st;
  StepOutcome f = step(st);
  CHECK(f.kind == StepOutcome::Kind::Faulted);
  CHECK(f.fault == StepFault::InputExhausted);
  CHECK(st.e_curr.is_os());
  CHECK(st.md(e1).pc == 0);   // the faulting instruction, not past it

  // A fault is exactly "revert the step, then pause".
  PlatformState expect = before;
  REQUIRE(op_pause(expect).ok());
  CHECK(serialize_state(st) == serialize_state(expect));

  st.input[e1.raw].words = {9};
  REQUIRE(apply_mut(st, Action{ResumeArgs{e1}}).ok());
  CHECK(step(st).kind == StepOutcome::Kind::Continued);
  CHECK(st.regs[0] == 9);
  CHECK(step(st).output == 9);
}

TEST_CASE("load obeys the window rule") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOAD, 0, 6}, {Opcode::LOAD, 1, 7}});
  st.mem[10] = 0x2a;   // stays OS-owned, read through the window at va 6
  LaunchArgs a = std_launch(cfg, e1, 0, 4, /*with_data=*/false);
  a.map.push_back({6, 10, perm_r()});         // window: mapped, not private
  a.map.push_back({7, 11, Perm{}});           // mapped, no read permission
  REQUIRE(apply_mut(st, Action{a}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());

  CHECK(step(st).kind == StepOutcome::Kind::Continued);
  CHECK(st.regs[0] == 0x2a);

  SUBCASE("no read permission") {
    CHECK(step(st).fault == StepFault::PermDenied);
  }

  SUBCASE("window onto an enclave frame is refused") {
    // Once another enclave owns frame 10 the window goes dark.
    st.owner[10] = e2;   // hand the frame over directly
    st.pc = 0;           // re-run the window load
    CHECK(step(st).fault == StepFault::PermDenied);
  }

  SUBCASE("load from an unmapped va") {
    st.mem[1] = 0x40;   // rewrite the operand: LOAD r0, va 4 (unmapped)
    st.pc = 0;
    CHECK(step(st).fault == StepFault::Unmapped);
  }
}

TEST_CASE("store writes own frames and copies shared ones") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  // LOADI r0 5; SNAP; STORE r0 6
  load_program(st, 0, {{Opcode::LOADI, 0, 5},
                       {Opcode::SNAP, 0, 0},
                       {Opcode::STORE, 0, 6}});
  st.mem[6] = 0xaa;
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 6)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());
  step(st);
  REQUIRE(step(st).kind == StepOutcome::Kind::Snapshotted);
  REQUIRE(apply_mut(st, Action{CloneArgs{e1, e2, {8}}}).ok());
  REQUIRE(apply_mut(st, Action{ResumeArgs{e2}}).ok());
  REQUIRE(st.pc == 4);

  SUBCASE("store on a shared frame diverges only the writer") {
    CHECK(step(st).kind == StepOutcome::Kind::Continued);
    CHECK(st.mem[6] == 0xaa);            // snapshot frame untouched
    CHECK(st.mem[8] == 5);               // copy got the new value
    CHECK(st.md(e2).table[6].pa == 8);
    CHECK(st.active_table[6].pa == 8);   // live table remapped too
    CHECK(st.md(e2).pa_free[8] == 0);
    CHECK(st.owner[8] == e2);
    CHECK(project_enclave(st, e1)->va[6].value == 0xaa);
    CHECK(project_enclave(st, e2)->va[6].value == 5);

    SUBCASE("second store hits the private copy directly") {
      st.pc = 4;
      st.regs[0] = 7;
      CHECK(step(st).kind == StepOutcome::Kind::Continued);
      CHECK(st.mem[8] == 7);
      CHECK(st.mem[6] == 0xaa);
    }
  }

  SUBCASE("store with an empty reserve faults with oom") {
    st.md(e2).pa_free[8] = 0;   // burn the reserve
    StepOutcome f = step(st);
    CHECK(f.kind == StepOutcome::Kind::Faulted);
    CHECK(f.fault == StepFault::OOM);
    CHECK(st.mem[6] == 0xaa);
    CHECK(st.md(e2).table[6].pa == 6);   // no divergence happened
    CHECK(st.md(e2).paused);
    CHECK(st.md(e2).pc == 4);
  }

  SUBCASE("store mutations punch the expected holes") {
    st.cfg.mutations.cow_write_through = true;
    CHECK(step(st).kind == StepOutcome::Kind::Continued);
    CHECK(st.mem[6] == 5);    // snapshot corrupted in place
    CHECK(st.md(e2).table[6].pa == 6);
    CHECK(project_enclave(st, e1)->va[6].value == 5);   // visible to the root
  }
}

TEST_CASE("store respects permissions and privacy") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::STORE, 0, 6}, {Opcode::STORE, 0, 7}});
  LaunchArgs a = std_launch(cfg, e1, 0, 4);
  a.map.push_back({6, 10, perm_rw()});   // writable window, not private
  a.map.push_back({7, 11, perm_r()});    // read-only
  REQUIRE(apply_mut(st, Action{a}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());
  st.regs[0] = 3;

  SUBCASE("window store is denied") {
    CHECK(step(st).fault == StepFault::PermDenied);
    CHECK(st.mem[10] == 0);
  }
  SUBCASE("read-only store is denied") {
    st.pc = 2;
    CHECK(step(st).fault == StepFault::PermDenied);
  }
  SUBCASE("disabled store check writes through the window") {
    st.cfg.mutations.store_check_disabled = true;
    CHECK(step(st).kind == StepOutcome::Kind::Continued);
    CHECK(st.mem[10] == 3);   // landed on the os frame
  }
}

TEST_CASE("snap freezes, a second snap attempt keeps the enclave running") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOADI, 0, 5},
                       {Opcode::SNAP, 0, 0},
                       {Opcode::SNAP, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 6)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());
  step(st);
  REQUIRE(step(st).kind == StepOutcome::Kind::Snapshotted);
  REQUIRE(apply_mut(st, Action{CloneArgs{e1, e2, {8}}}).ok());
  REQUIRE(apply_mut(st, Action{ResumeArgs{e2}}).ok());

  PlatformState before = st;
  StepOutcome f = step(st);   // SNAP with a root snapshot already set
  CHECK(f.kind == StepOutcome::Kind::Faulted);
  CHECK(f.fault == StepFault::BadInstr);
  CHECK(st.e_curr == e2);           // control retained
  CHECK(st.pc == 4);                // still at the snap
  CHECK(!st.md(e2).paused);
  CHECK(serialize_state(st) == serialize_state(before));
}

TEST_CASE("exit returns to the os immediately") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 2)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());
  CHECK(step(st).kind == StepOutcome::Kind::Exited);
  CHECK(st.e_curr.is_os());
  CHECK(!st.md(e1).paused);
}

TEST_CASE("fetch faults") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::EXIT, 0, 0}});
  LaunchArgs a = std_launch(cfg, e1, 0, 2);
  a.map[1].perm = perm_r();   // second instruction word not executable
  REQUIRE(apply_mut(st, Action{a}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());

  SUBCASE("non-executable instruction word") {
    CHECK(step(st).fault == StepFault::PermDenied);
  }
  SUBCASE("pc at the edge of the address space") {
    st.pc = cfg.n_va - 1;
    CHECK(step(st).fault == StepFault::Unmapped);
  }
  SUBCASE("undecodable word") {
    st.active_table[1].perm = perm_rx();
    st.md(e1).table[1].perm = perm_rx();
    st.mem[0] = 0x42;   // not an opcode
    CHECK(step(st).fault == StepFault::BadInstr);
  }
}

TEST_CASE("direct cow faults for instrumentation") {
  PlatformConfig cfg = tiny_cfg();
  PlatformState st = initial_state(cfg);
  load_program(st, 0, {{Opcode::LOADI, 0, 5}, {Opcode::SNAP, 0, 0}});
  st.mem[4] = 0x77;
  REQUIRE(apply_mut(st, Action{std_launch(cfg, e1, 0, 4)}).ok());
  REQUIRE(apply_mut(st, Action{EnterArgs{e1}}).ok());
  step(st);
  REQUIRE(step(st).kind == StepOutcome::Kind::Snapshotted);
  REQUIRE(apply_mut(st, Action{CloneArgs{e1, e2, {8, 9}}}).ok());

  CHECK(op_cow_fault(st, e2, 4).code == Err::NotEnclave);   // os running
  REQUIRE(apply_mut(st, Action{ResumeArgs{e2}}).ok());
  CHECK(op_cow_fault(st, e3, 4).code == Err::NotEnclave);
  CHECK(op_cow_fault(st, e2, 7).code == Err::BadArguments);   // unmapped
  REQUIRE(op_cow_fault(st, e2, 4).ok());
  CHECK(st.mem[8] == 0x77);
  CHECK(st.md(e2).table[4].pa == 8);
  CHECK(op_cow_fault(st, e2, 4).code == Err::BadArguments);   // already private
  REQUIRE(op_cow_fault(st, e2, 0).ok());   // diverge the code page too
  CHECK(st.md(e2).table[0].pa == 9);
  CHECK(op_cow_fault(st, e2, 1).code == Err::InsufficientMemory);
}
