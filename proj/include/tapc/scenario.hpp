#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tapc/action.hpp"
#include "tapc/result.hpp"
#include "tapc/state.hpp"

namespace tapc {

// Line-oriented scenario text. `#` starts a comment, numbers are decimal
// or 0x-hex, and a `config` line must precede everything else:
//
//   config va=8 pa=16 regs=2 word=8 enclaves=4
//   oswrite pa=2 off=0 words=1,7
//   launch id=1 ep=0 map=0:2:rx,1:3:rw ev=0,1 pages=2,3
//   enter id=1
//   step n=3
//   expect fault=PermDenied
//   input id=1 words=5,6
//   adversary protected=1 tamper pa=9 value=1
//   adversary call enter id=2
//   clone parent=1 child=2 pages=4,5
//
// The printer emits a normalized form (decimal numbers, sorted lists,
// `step n=k` exploded into k lines, empty lists omitted); parsing then
// printing normalized text is the identity.
struct Directive {
  enum class Kind {
    OsWrite, Launch, Enter, Resume, Pause, Exit, Snapshot, Clone, Destroy,
    Step, Input, Adversary, Expect
  };
  Kind kind = Kind::Step;
  uint32_t line = 0;          // source line, 0 when synthesized

  PhysAddr pa = 0;            // oswrite
  uint32_t off = 0;           // oswrite
  std::vector<Word> words;    // oswrite / input
  LaunchArgs launch;          // launch
  EnclaveId eid;              // enter / resume / destroy / input
  CloneArgs clone;            // clone
  AdversaryArgs adv;          // adversary
  std::string expect;         // canonical result string, e.g. "err:SelfClone"
};

struct Scenario {
  PlatformConfig cfg;
  std::vector<Directive> dirs;
};

struct ScenarioError {
  enum class Kind { Parse, UnknownDirective, Range };
  Kind kind = Kind::Parse;
  uint32_t line = 0;
  uint32_t col = 0;
  std::string message;

  std::string to_text() const;
};

std::variant<Scenario, ScenarioError> parse_scenario(const std::string& text);

std::string print_directive(const Directive& d);
std::string print_scenario(const Scenario& sc);

// Every platform action renders as one directive (and back through the
// runner to the same op), which is how violation witnesses are emitted.
Directive directive_from_action(const Action& a);

struct TraceRecord {
  uint64_t step = 0;
  std::string action;     // normalized directive text
  std::string result;
  uint64_t digest = 0;    // state digest after the directive
};

struct ScenarioRun {
  bool ok = true;
  std::string error;          // first expect mismatch, with the actual result
  uint64_t failed_step = 0;
  PlatformState final_state;
  std::vector<TraceRecord> trace;
};

// Executes directives in order against a fresh platform. oswrite lowers to
// per-word OS memory writes (stopping at the first refusal), input appends
// to an enclave's tape, expect compares against the previous directive's
// result and fails the run on mismatch. Execution always continues past op
// errors; only expect mismatches stop it.
ScenarioRun run_scenario(const Scenario& sc);

// Witness helper: a scenario whose directives replay `dirs` on `cfg`.
std::string scenario_text(const PlatformConfig& cfg,
                          const std::vector<Directive>& dirs);

// scenario_text plus a trailing "# final digest 0x…" comment; replaying the
// witness must end on exactly that digest.
std::string witness_text(const PlatformConfig& cfg,
                         const std::vector<Directive>& dirs, uint64_t digest);

// The digest recorded by witness_text (the last such comment), if any.
std::optional<uint64_t> witness_digest(const std::string& text);

}  // namespace tapc
