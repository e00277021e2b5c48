#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sortcell/classify.hpp"
#include "sortcell/garment.hpp"
#include "sortcell/grasp.hpp"

namespace sortcell::orchestrator {

enum class CellState {
  Init,
  RecordBaselines,
  FindCandidateA,
  CheckReach,
  Pick,
  VerifyGrasp,
  ShakeSpread,
  PlaceB,
  Retract,
  Classify,
  FindCandidateB,
  PickB,
  PlaceC,
  QuickCheckB,
  Shutdown,
};

const char* to_string(CellState s);
std::optional<CellState> state_from_string(std::string_view s);

enum class EventKind {
  StageComplete,  // linear step finished (motion, baseline capture)
  CandidateFound,
  NoCandidate,
  Reachable,
  Unreachable,
  GraspOk,
  GraspFail,
  Classified,
  ZoneBOccupied,
  ZoneBEmpty,
  ServiceTimeout,
  BudgetExhausted,
};

const char* to_string(EventKind k);
std::optional<EventKind> event_from_string(std::string_view s);

struct Event {
  EventKind kind = EventKind::StageComplete;
  std::optional<grasp::GraspCandidate> candidate;  // CandidateFound
  std::optional<classify::ParsedLabel> label;      // Classified

  static Event simple(EventKind k) { return {k, std::nullopt, std::nullopt}; }
  static Event candidate_found(grasp::GraspCandidate c) {
    return {EventKind::CandidateFound, std::move(c), std::nullopt};
  }
  static Event classified(classify::ParsedLabel l) {
    return {EventKind::Classified, std::nullopt, std::move(l)};
  }
};

enum class ActionKind {
  MoveToSafe,
  RecordBaselines,
  RequestCandidateA,
  ComputeReachability,
  ExecutePick,
  ReadTactile,
  ShakeAndSpread,
  PlaceInZoneB,
  ExportTwinSnapshot,
  RetractArm,
  CallClassifier,
  RequestCandidateB,
  ExecutePickB,
  PlaceInBin,
  EmitCycleReport,
  QuickOccupancyCheck,
  HaltCell,
};

struct Action {
  ActionKind kind;
  std::optional<GarmentClass> bin;  // PlaceInBin destination
};

struct Budgets {
  int candidate_attempts = 5;  // total attempts per episode (1 + 4 retries)
  int pick_retries = 3;        // consecutive grasp failures tolerated
};

struct BudgetCounters {
  int candidate_attempts = 0;  // consecutive empty/timeout results
  int pick_retries = 0;        // consecutive grasp failures
};

// Counter bookkeeping shared by the run loop and the log replayer. Must be
// applied to the counters before step() sees the event.
void note_event(BudgetCounters& counters, CellState state, const Event& event);

struct StepContext {
  Budgets budgets;
  BudgetCounters counters;
  GarmentClass destination_bin = GarmentClass::Other;
};

struct StepResult {
  CellState next = CellState::Shutdown;
  std::vector<Action> actions;
};

// Pure transition function over the inspection flow. Throws
// ProtocolViolation for a (state, event) pair outside the table.
StepResult step(CellState state, const Event& event, const StepContext& ctx);

// Invalid or hallucinated labels are contained in the `other` bin.
GarmentClass route_label(const classify::ParsedLabel& label);

// Static (state, event-kind) edges, for reachability checks and docs. The
// budget-dependent Shutdown alternative is listed separately.
struct TableEdge {
  CellState state;
  EventKind event;
  CellState next;
  bool budget_shutdown;  // exhausted budget diverts this edge to Shutdown
};
const std::vector<TableEdge>& transition_table();

// Entry actions for the initial state (the loop starts before any event).
std::vector<Action> initial_actions();

}  // namespace sortcell::orchestrator
