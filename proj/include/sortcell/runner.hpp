#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sortcell/backends.hpp"
#include "sortcell/fsm.hpp"
#include "sortcell/segmentation.hpp"
#include "sortcell/service_bus.hpp"
#include "sortcell/world.hpp"

namespace sortcell::orchestrator {

struct RunConfig {
  cellsim::SceneSpec scene;
  cellsim::CellLayout layout = cellsim::CellLayout::standard();
  grasp::RobotModel alice{grasp::RobotId::Alice, {600, 250, 400}, 120, 1500, 0.0};
  grasp::RobotModel bob{grasp::RobotId::Bob, {2000, 250, 400}, 120, 1500, 0.0};
  std::vector<Aabb> obstacles;

  segmentation::SegThresholds seg_thresholds;
  grasp::GraspPredictorParams predictor;
  // Zone B is a bare table, so a flatter cutoff is safe there; a spread
  // garment can drop below the basket-side threshold.
  grasp::GraspPredictorParams predictor_b{2.0, 120.0};
  grasp::TactileConfig tactile;
  Budgets budgets;
  classify::BackendDescriptor backend;

  double pick_failure_rate = 0.0;
  bool pick_failure_applies_in_b = false;  // flat re-grasp in B is the easy case
  double spread_factor = 1.8;
  int baseline_frames = 5;
  double service_timeout_s = 30.0;
  int bbox_margin_px = 5;
  classify::ParseOptions parse;

  std::string out_dir;  // empty: nothing written to disk
};

struct RunRecord {
  int64_t tick = 0;  // strictly increasing record index
  CellState state = CellState::Init;
  EventKind event = EventKind::StageComplete;
  std::optional<std::string> item_id;
  std::optional<std::string> label;  // ParsedLabel string form
  std::optional<double> latency_s;
  std::optional<std::string> twin_ref;
};

struct CycleReport {
  std::string item_id;
  GarmentClass true_class = GarmentClass::Other;
  classify::ParsedLabel predicted;
  GarmentClass destination_bin = GarmentClass::Other;
  int candidate_retries = 0;
  int pick_retries = 0;
};

struct RunResult {
  std::vector<RunRecord> log;
  std::vector<CycleReport> cycles;
  cellsim::WorldState final_world;
  int zone_a_candidate_requests = 0;
  bool clean_shutdown = false;
  bool aborted = false;
  std::string abort_reason;
};

// Executes the full inspection flow: init, baselines, pick-inspect-classify-
// sort cycles, shutdown once the basket stays empty for a full candidate
// budget. Deterministic for a fixed (config, seed) with mock/replay backends.
RunResult run_until_empty(const RunConfig& config, uint64_t seed);

std::string run_log_to_jsonl(const std::vector<RunRecord>& log);
std::vector<RunRecord> run_log_from_jsonl(const std::string& text);

// Replays the logged state sequence through step(); throws ProtocolViolation
// on any divergence. The final transition must land in Shutdown.
void validate_run_log(const std::vector<RunRecord>& log, const Budgets& budgets);

// Twin scene document: robot bases, zones, obstacles, current cloud
// reference. Written once per PlaceB and PlaceC.
nlohmann::json export_twin_snapshot(const cellsim::WorldState& world,
                                    const std::vector<grasp::RobotModel>& robots,
                                    const std::vector<Aabb>& obstacles,
                                    const std::string& cloud_ply_ref,
                                    size_t cloud_points);

}  // namespace sortcell::orchestrator
