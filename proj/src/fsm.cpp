#include "sortcell/fsm.hpp"

#include "sortcell/errors.hpp"

namespace sortcell::orchestrator {

const char* to_string(CellState s) {
  switch (s) {
    case CellState::Init: return "Init";
    case CellState::RecordBaselines: return "RecordBaselines";
    case CellState::FindCandidateA: return "FindCandidateA";
    case CellState::CheckReach: return "CheckReach";
    case CellState::Pick: return "Pick";
    case CellState::VerifyGrasp: return "VerifyGrasp";
    case CellState::ShakeSpread: return "ShakeSpread";
    case CellState::PlaceB: return "PlaceB";
    case CellState::Retract: return "Retract";
    case CellState::Classify: return "Classify";
    case CellState::FindCandidateB: return "FindCandidateB";
    case CellState::PickB: return "PickB";
    case CellState::PlaceC: return "PlaceC";
    case CellState::QuickCheckB: return "QuickCheckB";
    case CellState::Shutdown: return "Shutdown";
  }
  return "?";
}

std::optional<CellState> state_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(CellState::Shutdown); ++i) {
    const auto state = static_cast<CellState>(i);
    if (s == to_string(state)) return state;
  }
  return std::nullopt;
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::StageComplete: return "stage_complete";
    case EventKind::CandidateFound: return "candidate_found";
    case EventKind::NoCandidate: return "no_candidate";
    case EventKind::Reachable: return "reachable";
    case EventKind::Unreachable: return "unreachable";
    case EventKind::GraspOk: return "grasp_ok";
    case EventKind::GraspFail: return "grasp_fail";
    case EventKind::Classified: return "classified";
    case EventKind::ZoneBOccupied: return "zone_b_occupied";
    case EventKind::ZoneBEmpty: return "zone_b_empty";
    case EventKind::ServiceTimeout: return "service_timeout";
    case EventKind::BudgetExhausted: return "budget_exhausted";
  }
  return "?";
}

std::optional<EventKind> event_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(EventKind::BudgetExhausted); ++i) {
    const auto kind = static_cast<EventKind>(i);
    if (s == to_string(kind)) return kind;
  }
  return std::nullopt;
}

void note_event(BudgetCounters& counters, CellState state, const Event& event) {
  switch (event.kind) {
    case EventKind::NoCandidate:
    case EventKind::ServiceTimeout:
      if (state == CellState::FindCandidateA || state == CellState::FindCandidateB ||
          state == CellState::QuickCheckB || state == CellState::Classify)
        counters.candidate_attempts += 1;
      break;
    case EventKind::CandidateFound:
    case EventKind::ZoneBOccupied:
    case EventKind::ZoneBEmpty:
      counters.candidate_attempts = 0;
      break;
    case EventKind::GraspFail:
      counters.pick_retries += 1;
      break;
    case EventKind::GraspOk:
      counters.pick_retries = 0;
      break;
    case EventKind::Classified:
      counters.candidate_attempts = 0;
      break;
    default:
      break;
  }
}

GarmentClass route_label(const classify::ParsedLabel& label) {
  return label.valid() ? *label.label : GarmentClass::Other;
}

namespace {

Action act(ActionKind k) { return {k, std::nullopt}; }

StepResult result(CellState next, std::initializer_list<Action> actions) {
  return {next, std::vector<Action>(actions)};
}

[[noreturn]] void violation(CellState state, const Event& event) {
  throw ProtocolViolation(std::string("undefined transition: (") +
                          to_string(state) + ", " + to_string(event.kind) + ")");
}

}  // namespace

StepResult step(CellState state, const Event& event, const StepContext& ctx) {
  const bool candidates_exhausted =
      ctx.counters.candidate_attempts >= ctx.budgets.candidate_attempts;
  const bool picks_exhausted = ctx.counters.pick_retries > ctx.budgets.pick_retries;

  switch (state) {
    case CellState::Init:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::RecordBaselines, {act(ActionKind::RecordBaselines)});
      break;

    case CellState::RecordBaselines:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::FindCandidateA, {act(ActionKind::RequestCandidateA)});
      break;

    case CellState::FindCandidateA:
      switch (event.kind) {
        case EventKind::CandidateFound:
          return result(CellState::CheckReach, {act(ActionKind::ComputeReachability)});
        case EventKind::NoCandidate:
        case EventKind::ServiceTimeout:
          if (candidates_exhausted)
            return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
          return result(CellState::FindCandidateA, {act(ActionKind::RequestCandidateA)});
        case EventKind::BudgetExhausted:
          return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
        default:
          break;
      }
      break;

    case CellState::CheckReach:
      if (event.kind == EventKind::Reachable)
        return result(CellState::Pick, {act(ActionKind::ExecutePick)});
      if (event.kind == EventKind::Unreachable)
        return result(CellState::FindCandidateA, {act(ActionKind::RequestCandidateA)});
      break;

    case CellState::Pick:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::VerifyGrasp, {act(ActionKind::ReadTactile)});
      break;

    case CellState::VerifyGrasp:
      if (event.kind == EventKind::GraspOk)
        return result(CellState::ShakeSpread, {act(ActionKind::ShakeAndSpread)});
      if (event.kind == EventKind::GraspFail) {
        if (picks_exhausted)
          return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
        return result(CellState::FindCandidateA, {act(ActionKind::RequestCandidateA)});
      }
      if (event.kind == EventKind::BudgetExhausted)
        return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
      break;

    case CellState::ShakeSpread:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::PlaceB, {act(ActionKind::PlaceInZoneB),
                                          act(ActionKind::ExportTwinSnapshot)});
      break;

    case CellState::PlaceB:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::Retract, {act(ActionKind::RetractArm)});
      break;

    case CellState::Retract:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::Classify, {act(ActionKind::CallClassifier)});
      break;

    case CellState::Classify:
      if (event.kind == EventKind::Classified)
        return result(CellState::FindCandidateB, {act(ActionKind::RequestCandidateB)});
      if (event.kind == EventKind::ServiceTimeout)
        // Conservative containment, same as an invalid response: the run
        // loop routes the item to the `other` bin.
        return result(CellState::FindCandidateB, {act(ActionKind::RequestCandidateB)});
      break;

    case CellState::FindCandidateB:
      switch (event.kind) {
        case EventKind::CandidateFound:
          return result(CellState::PickB, {act(ActionKind::ExecutePickB),
                                           act(ActionKind::ReadTactile)});
        case EventKind::NoCandidate:
        case EventKind::ServiceTimeout:
          if (candidates_exhausted)
            return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
          return result(CellState::FindCandidateB, {act(ActionKind::RequestCandidateB)});
        case EventKind::BudgetExhausted:
          return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
        default:
          break;
      }
      break;

    case CellState::PickB:
      if (event.kind == EventKind::GraspOk)
        return result(CellState::PlaceC,
                      {Action{ActionKind::PlaceInBin, ctx.destination_bin},
                       act(ActionKind::ExportTwinSnapshot),
                       act(ActionKind::EmitCycleReport)});
      if (event.kind == EventKind::GraspFail) {
        if (picks_exhausted)
          return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
        return result(CellState::FindCandidateB, {act(ActionKind::RequestCandidateB)});
      }
      if (event.kind == EventKind::BudgetExhausted)
        return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
      break;

    case CellState::PlaceC:
      if (event.kind == EventKind::StageComplete)
        return result(CellState::QuickCheckB, {act(ActionKind::QuickOccupancyCheck)});
      break;

    case CellState::QuickCheckB:
      if (event.kind == EventKind::ZoneBOccupied)
        return result(CellState::Classify, {act(ActionKind::CallClassifier)});
      if (event.kind == EventKind::ZoneBEmpty)
        return result(CellState::FindCandidateA, {act(ActionKind::RequestCandidateA)});
      if (event.kind == EventKind::ServiceTimeout) {
        if (candidates_exhausted)
          return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
        return result(CellState::QuickCheckB, {act(ActionKind::QuickOccupancyCheck)});
      }
      if (event.kind == EventKind::BudgetExhausted)
        return result(CellState::Shutdown, {act(ActionKind::HaltCell)});
      break;

    case CellState::Shutdown:
      break;  // terminal
  }
  violation(state, event);
}

const std::vector<TableEdge>& transition_table() {
  static const std::vector<TableEdge> kTable = {
      {CellState::Init, EventKind::StageComplete, CellState::RecordBaselines, false},
      {CellState::RecordBaselines, EventKind::StageComplete, CellState::FindCandidateA, false},
      {CellState::FindCandidateA, EventKind::CandidateFound, CellState::CheckReach, false},
      {CellState::FindCandidateA, EventKind::NoCandidate, CellState::FindCandidateA, true},
      {CellState::FindCandidateA, EventKind::ServiceTimeout, CellState::FindCandidateA, true},
      {CellState::FindCandidateA, EventKind::BudgetExhausted, CellState::Shutdown, false},
      {CellState::CheckReach, EventKind::Reachable, CellState::Pick, false},
      {CellState::CheckReach, EventKind::Unreachable, CellState::FindCandidateA, false},
      {CellState::Pick, EventKind::StageComplete, CellState::VerifyGrasp, false},
      {CellState::VerifyGrasp, EventKind::GraspOk, CellState::ShakeSpread, false},
      {CellState::VerifyGrasp, EventKind::GraspFail, CellState::FindCandidateA, true},
      {CellState::VerifyGrasp, EventKind::BudgetExhausted, CellState::Shutdown, false},
      {CellState::ShakeSpread, EventKind::StageComplete, CellState::PlaceB, false},
      {CellState::PlaceB, EventKind::StageComplete, CellState::Retract, false},
      {CellState::Retract, EventKind::StageComplete, CellState::Classify, false},
      {CellState::Classify, EventKind::Classified, CellState::FindCandidateB, false},
      {CellState::Classify, EventKind::ServiceTimeout, CellState::FindCandidateB, false},
      {CellState::FindCandidateB, EventKind::CandidateFound, CellState::PickB, false},
      {CellState::FindCandidateB, EventKind::NoCandidate, CellState::FindCandidateB, true},
      {CellState::FindCandidateB, EventKind::ServiceTimeout, CellState::FindCandidateB, true},
      {CellState::FindCandidateB, EventKind::BudgetExhausted, CellState::Shutdown, false},
      {CellState::PickB, EventKind::GraspOk, CellState::PlaceC, false},
      {CellState::PickB, EventKind::GraspFail, CellState::FindCandidateB, true},
      {CellState::PickB, EventKind::BudgetExhausted, CellState::Shutdown, false},
      {CellState::PlaceC, EventKind::StageComplete, CellState::QuickCheckB, false},
      {CellState::QuickCheckB, EventKind::ZoneBOccupied, CellState::Classify, false},
      {CellState::QuickCheckB, EventKind::ZoneBEmpty, CellState::FindCandidateA, false},
      {CellState::QuickCheckB, EventKind::ServiceTimeout, CellState::QuickCheckB, true},
      {CellState::QuickCheckB, EventKind::BudgetExhausted, CellState::Shutdown, false},
  };
  return kTable;
}

std::vector<Action> initial_actions() { return {act(ActionKind::MoveToSafe)}; }

}  // namespace sortcell::orchestrator
