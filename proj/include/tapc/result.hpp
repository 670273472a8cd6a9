#pragma once

#include <optional>
#include <string>

#include "tapc/state.hpp"
#include "tapc/types.hpp"

namespace tapc {

enum class Err : uint8_t {
  Ok = 0,
  NotOS,
  NotEnclave,
  InvalidId,
  NotActive,
  AlreadyActive,
  AlreadySnapshot,
  HasRootSnapshot,
  IsSnapshot,
  NotPaused,
  PageNotOSOwned,
  InsufficientMemory,
  SelfClone,
  SnapshotHasChildren,
  BadArguments,
  ProtectedTarget,
};

const char* err_name(Err e);
bool err_from_name(const std::string& s, Err& out);

enum class StepFault : uint8_t {
  PermDenied,
  Unmapped,
  OOM,
  BadInstr,
  InputExhausted,
};

const char* fault_name(StepFault f);
bool fault_from_name(const std::string& s, StepFault& out);

// Result of one compute step. A fault normally reverts the step and hands
// control back to the OS via the pause path; the one exception is SNAP
// failing its success condition, which reverts the step but leaves the
// enclave running (Fault(BadInstr) with the state untouched).
struct StepOutcome {
  enum class Kind : uint8_t { Continued, Output, Exited, Snapshotted, Faulted };
  Kind kind = Kind::Continued;
  Word output = 0;                       // for Kind::Output
  StepFault fault = StepFault::PermDenied;  // for Kind::Faulted

  static StepOutcome continued() { return {}; }
  static StepOutcome out(Word w) { return {Kind::Output, w, StepFault::PermDenied}; }
  static StepOutcome exited() { return {Kind::Exited, 0, StepFault::PermDenied}; }
  static StepOutcome snapshotted() { return {Kind::Snapshotted, 0, StepFault::PermDenied}; }
  static StepOutcome faulted(StepFault f) { return {Kind::Faulted, 0, f}; }

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

// Result channel for applying one action: the lifecycle code plus, where
// the action was a compute step or an observation, that payload.
struct OpResult {
  Err code = Err::Ok;
  std::optional<StepOutcome> step;
  std::optional<Observation> observation;

  bool ok() const { return code == Err::Ok; }

  static OpResult success() { return {}; }
  static OpResult err(Err e) { return {e, std::nullopt, std::nullopt}; }

  friend bool operator==(const OpResult&, const OpResult&) = default;
};

// Scenario/trace rendering: "ok", "err:NotActive", "fault:OOM",
// "output:7", "exited", "snapshotted".
std::string result_to_string(const OpResult& r);

}  // namespace tapc
