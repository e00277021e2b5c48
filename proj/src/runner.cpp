#include "sortcell/runner.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "sortcell/errors.hpp"
#include "sortcell/image_io.hpp"
#include "sortcell/render.hpp"
#include "sortcell/rng.hpp"

namespace sortcell::orchestrator {

using cellsim::WorldState;
using classify::ParsedLabel;
using grasp::GraspCandidate;
using grasp::PickOutcome;
using nlohmann::json;

namespace {

std::string format_id(const char* prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06d", prefix, n);
  return buf;
}

json candidate_to_json(const GraspCandidate& c) {
  json j;
  j["u"] = c.u;
  j["v"] = c.v;
  j["depth_mm"] = c.depth_mm;
  j["world"] = json::array({c.world_pos.x, c.world_pos.y, c.world_pos.z});
  j["yaw_rad"] = c.yaw_rad;
  j["score"] = c.score;
  return j;
}

GraspCandidate candidate_from_json(const json& j) {
  GraspCandidate c;
  c.u = j.at("u").get<int>();
  c.v = j.at("v").get<int>();
  c.depth_mm = j.at("depth_mm").get<double>();
  c.world_pos = {j.at("world").at(0).get<double>(), j.at("world").at(1).get<double>(),
                 j.at("world").at(2).get<double>()};
  c.yaw_rad = j.at("yaw_rad").get<double>();
  c.score = j.at("score").get<double>();
  return c;
}

// Everything run_until_empty tracks while driving the state machine.
struct Loop {
  const RunConfig& cfg;
  uint64_t seed;

  WorldState world;
  ServiceBus bus{ServiceBus::Clock::Logical};
  std::unique_ptr<classify::ClassifierBackend> backend;
  grasp::TactileBaseline tactile_baseline;
  segmentation::SegBaseline seg_baseline;
  RngStream pick_rng;

  StepContext ctx;
  std::optional<GraspCandidate> candidate;
  std::optional<PickOutcome> outcome;
  std::string current_item;   // item being cycled (set once gripped)
  std::string classify_item;  // item standing in zone B at classify time
  ParsedLabel last_label;
  std::optional<double> last_latency;
  std::optional<std::string> last_twin_ref;

  int corr_serial = 0;
  int classify_serial = 0;
  int snapshot_serial = 0;
  int cycle_candidate_retries = 0;
  int cycle_pick_retries = 0;

  RunResult result;

  explicit Loop(const RunConfig& config, uint64_t run_seed)
      : cfg(config),
        seed(run_seed),
        world(cellsim::spawn_scene(config.scene, run_seed, config.layout)),
        pick_rng(RngStream(run_seed).split("pick")) {
    ctx.budgets = cfg.budgets;
    backend = classify::make_backend(cfg.backend);
    register_services();
  }

  std::string next_corr() { return format_id("c", corr_serial++); }

  const CameraModel& camera(CameraId id) const {
    return world.layout.cameras.at(id);
  }

  void register_services() {
    bus.register_handler("grasp.predict", [this](const json& req) {
      const std::string zone = req.at("zone").get<std::string>();
      json payload;
      std::optional<GraspCandidate> c;
      if (zone == "A") {
        RgbdFrame frame = cellsim::render_camera(world, CameraId::Cam1);
        const BoundingBox roi = cellsim::compute_basket_bbox(
            frame, world.layout.basket_rim_color, cfg.bbox_margin_px);
        frame = cellsim::apply_bounding_box(frame, roi, world.layout.table_color,
                                            static_cast<float>(camera(CameraId::Cam1).table_depth_mm));
        c = grasp::predict_grasp(frame, roi, camera(CameraId::Cam1), cfg.predictor);
      } else {
        const RgbdFrame frame = cellsim::render_camera(world, CameraId::Cam2);
        const BoundingBox roi = cellsim::project_zone_roi(
            camera(CameraId::Cam2), world.layout.zones.at(cellsim::ZoneId::B).rect_world);
        c = grasp::predict_grasp(frame, roi, camera(CameraId::Cam2), cfg.predictor_b);
      }
      payload["found"] = c.has_value();
      if (c) payload["candidate"] = candidate_to_json(*c);
      return ServiceReply{payload, 0.15};  // grasp prediction runs in ~150 ms
    });

    bus.register_handler("classify.image", [this](const json& req) {
      classify::ImagePayload payload;
      payload.request_id = req.at("id").get<std::string>();
      payload.declared_class = req.at("declared_class").get<std::string>();
      if (cfg.backend.kind == classify::BackendDescriptor::Kind::LiveHttp) {
        const RgbdFrame frame = cellsim::render_camera(world, CameraId::Cam2);
        payload.png_bytes = encode_png_rgb(frame.width, frame.height, frame.rgb);
      }
      classify::ChatRequest request = classify::build_prompt();
      request.model_name = backend->model_name();
      const classify::RawResponse resp = backend->classify(payload, request);
      json out;
      out["text"] = resp.text;
      return ServiceReply{out, resp.latency_s};
    });

    bus.register_handler("seg.segment", [this](const json&) {
      const RgbdFrame frame = cellsim::render_camera(world, CameraId::Cam2);
      const auto cloud =
          segmentation::segment(frame, seg_baseline, cfg.seg_thresholds,
                                camera(CameraId::Cam2));
      std::string ref;
      if (!cfg.out_dir.empty()) {
        const auto dir = std::filesystem::path(cfg.out_dir) / "snapshots";
        std::filesystem::create_directories(dir);
        ref = "snapshots/" + format_id("cloud_", snapshot_serial) + ".ply";
        segmentation::export_cloud(cloud, std::filesystem::path(cfg.out_dir) / ref);
      }
      json out;
      out["points"] = cloud.points.size();
      out["ply"] = ref;
      return ServiceReply{out, 0.05};
    });
  }

  ServiceOutcome call(const std::string& service, json request) {
    return bus.call_service(
        {service, std::move(request), cfg.service_timeout_s, next_corr()});
  }

  // Performs one state's entry actions; returns the event they produce.
  Event perform(const std::vector<Action>& actions) {
    Event event = Event::simple(EventKind::StageComplete);
    last_latency.reset();
    last_twin_ref.reset();
    for (const Action& action : actions) event = perform_one(action, event);
    return event;
  }

  Event perform_one(const Action& action, Event event) {
    switch (action.kind) {
      case ActionKind::MoveToSafe:
      case ActionKind::RetractArm:
        return Event::simple(EventKind::StageComplete);

      case ActionKind::RecordBaselines: {
        tactile_baseline = grasp::record_tactile_baseline(cfg.tactile);
        std::vector<RgbdFrame> frames;
        for (int i = 0; i < std::max(1, cfg.baseline_frames); ++i)
          frames.push_back(cellsim::render_camera(world, CameraId::Cam2));
        seg_baseline = segmentation::capture_baseline(frames);
        if (!cfg.out_dir.empty())
          segmentation::save_baseline(seg_baseline,
                                      std::filesystem::path(cfg.out_dir) / "baseline");
        return Event::simple(EventKind::StageComplete);
      }

      case ActionKind::RequestCandidateA: {
        result.zone_a_candidate_requests += 1;
        const ServiceOutcome out = call("grasp.predict", json{{"zone", "A"}});
        last_latency = 0.15;
        if (out.timed_out) return Event::simple(EventKind::ServiceTimeout);
        if (!out.reply.payload.at("found").get<bool>()) {
          cycle_candidate_retries += 1;
          return Event::simple(EventKind::NoCandidate);
        }
        candidate = candidate_from_json(out.reply.payload.at("candidate"));
        return Event::candidate_found(*candidate);
      }

      case ActionKind::ComputeReachability: {
        const bool ok =
            grasp::check_reachability(candidate->world_pos, cfg.alice, cfg.obstacles);
        return Event::simple(ok ? EventKind::Reachable : EventKind::Unreachable);
      }

      case ActionKind::ExecutePick: {
        grasp::RobotModel robot = cfg.alice;
        robot.pick_failure_rate = cfg.pick_failure_rate;
        auto [next_world, pick] =
            grasp::execute_pick(world, robot, *candidate, pick_rng, cfg.tactile,
                                tactile_baseline);
        world = std::move(next_world);
        outcome = std::move(pick);
        if (outcome->grasped_item) current_item = *outcome->grasped_item;
        return Event::simple(EventKind::StageComplete);
      }

      case ActionKind::ExecutePickB: {
        grasp::RobotModel robot = cfg.alice;
        robot.pick_failure_rate =
            cfg.pick_failure_applies_in_b ? cfg.pick_failure_rate : 0.0;
        auto [next_world, pick] =
            grasp::execute_pick(world, robot, *candidate, pick_rng, cfg.tactile,
                                tactile_baseline);
        world = std::move(next_world);
        outcome = std::move(pick);
        if (outcome->grasped_item) current_item = *outcome->grasped_item;
        return event;  // ReadTactile decides
      }

      case ActionKind::ReadTactile: {
        const bool ok = grasp::verify_grasp(outcome->reading, tactile_baseline,
                                            cfg.tactile.min_delta);
        if (!ok) cycle_pick_retries += 1;
        return Event::simple(ok ? EventKind::GraspOk : EventKind::GraspFail);
      }

      case ActionKind::ShakeAndSpread:
        world = grasp::shake_and_spread(world, cfg.alice, *outcome, cfg.spread_factor);
        return Event::simple(EventKind::StageComplete);

      case ActionKind::PlaceInZoneB:
        world = cellsim::move_item(world, current_item, {cellsim::ZoneId::B, {}, {}, {}});
        return Event::simple(EventKind::StageComplete);

      case ActionKind::ExportTwinSnapshot: {
        write_twin_snapshot();
        return event;
      }

      case ActionKind::CallClassifier: {
        const auto in_b = world.items_in("B");
        classify_item = in_b.empty() ? "" : in_b.back();
        std::string declared = "empty";
        if (!classify_item.empty()) {
          declared =
              std::string(sortcell::to_string(world.item_or_throw(classify_item).true_class));
        }
        const std::string req_id = format_id("req", classify_serial++);
        ServiceOutcome out;
        try {
          out = call("classify.image",
                     json{{"id", req_id}, {"declared_class", declared}});
        } catch (const TimeoutError&) {
          out.timed_out = true;  // live backend missed its wire deadline
        }
        if (out.timed_out) {
          ctx.destination_bin = GarmentClass::Other;
          last_latency = cfg.service_timeout_s;
          return Event::simple(EventKind::ServiceTimeout);
        }
        classify::RawResponse resp;
        resp.text = out.reply.payload.at("text").get<std::string>();
        resp.latency_s = out.reply.latency_s;
        last_label = classify::parse_response(resp, cfg.parse);
        last_latency = resp.latency_s;
        ctx.destination_bin = route_label(last_label);
        return Event::classified(last_label);
      }

      case ActionKind::RequestCandidateB: {
        const ServiceOutcome out = call("grasp.predict", json{{"zone", "B"}});
        last_latency = 0.15;
        if (out.timed_out) return Event::simple(EventKind::ServiceTimeout);
        if (!out.reply.payload.at("found").get<bool>()) {
          cycle_candidate_retries += 1;
          return Event::simple(EventKind::NoCandidate);
        }
        candidate = candidate_from_json(out.reply.payload.at("candidate"));
        return Event::candidate_found(*candidate);
      }

      case ActionKind::PlaceInBin: {
        const GarmentClass bin = action.bin.value_or(GarmentClass::Other);
        // Deterministic shelf positions inside the bin so items do not at
        // least nominally stack on one spot.
        const int count = bin_counts[class_index(bin)]++;
        const auto& rect =
            world.layout.zones.at(cellsim::ZoneId::C).bins.at(bin);
        cellsim::Placement placement{cellsim::ZoneId::C, bin, {}, {}};
        placement.x_mm = rect.cx() + ((count % 3) - 1) * 25.0;
        placement.y_mm = rect.cy() + (((count / 3) % 3) - 1) * 25.0;
        world = cellsim::move_item(world, current_item, placement);
        return Event::simple(EventKind::StageComplete);
      }

      case ActionKind::EmitCycleReport: {
        CycleReport report;
        report.item_id = current_item;
        report.true_class = world.item_or_throw(current_item).true_class;
        report.predicted = last_label;
        report.destination_bin = ctx.destination_bin;
        report.candidate_retries = cycle_candidate_retries;
        report.pick_retries = cycle_pick_retries;
        result.cycles.push_back(report);
        cycle_candidate_retries = 0;
        cycle_pick_retries = 0;
        current_item.clear();
        return event;
      }

      case ActionKind::QuickOccupancyCheck: {
        const ServiceOutcome out =
            call("grasp.predict", json{{"zone", "B"}, {"quick", true}});
        last_latency = 0.15;
        if (out.timed_out) return Event::simple(EventKind::ServiceTimeout);
        const bool occupied = out.reply.payload.at("found").get<bool>();
        return Event::simple(occupied ? EventKind::ZoneBOccupied
                                      : EventKind::ZoneBEmpty);
      }

      case ActionKind::HaltCell:
        return event;
    }
    return event;
  }

  void write_twin_snapshot() {
    const ServiceOutcome out = call("seg.segment", json::object());
    if (out.timed_out) return;
    const std::string ply_ref = out.reply.payload.at("ply").get<std::string>();
    const size_t points = out.reply.payload.at("points").get<size_t>();
    const json doc = export_twin_snapshot(world, {cfg.alice, cfg.bob},
                                          cfg.obstacles, ply_ref, points);
    if (!cfg.out_dir.empty()) {
      const auto dir = std::filesystem::path(cfg.out_dir) / "snapshots";
      std::filesystem::create_directories(dir);
      const std::string name = format_id("twin_", snapshot_serial) + ".json";
      std::ofstream f(dir / name);
      f << doc.dump(2) << "\n";
      last_twin_ref = "snapshots/" + name;
    }
    snapshot_serial += 1;
  }

  std::array<int, kClassCount> bin_counts{};

  void append_record(CellState state, const Event& event) {
    RunRecord rec;
    rec.tick = static_cast<int64_t>(result.log.size());
    rec.state = state;
    rec.event = event.kind;
    if (!current_item.empty()) rec.item_id = current_item;
    if (event.kind == EventKind::Classified && event.label)
      rec.label = event.label->to_string();
    rec.latency_s = last_latency;
    rec.twin_ref = last_twin_ref;
    result.log.push_back(std::move(rec));
  }

  RunResult run() {
    CellState state = CellState::Init;
    std::vector<Action> pending = initial_actions();
    try {
      while (state != CellState::Shutdown) {
        const Event event = perform(pending);
        note_event(ctx.counters, state, event);
        append_record(state, event);
        StepResult next = step(state, event, ctx);
        state = next.next;
        pending = std::move(next.actions);
        if (state == CellState::Shutdown) result.clean_shutdown = true;
      }
    } catch (const TransportError& e) {
      result.aborted = true;
      result.abort_reason = e.what();
    }
    result.final_world = world;
    if (!cfg.out_dir.empty()) write_outputs();
    return std::move(result);
  }

  void write_outputs() {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    {
      std::ofstream f(dir / "run_log.jsonl", std::ios::binary);
      f << run_log_to_jsonl(result.log);
    }
    {
      json cycles = json::array();
      for (const CycleReport& c : result.cycles) {
        json j;
        j["item"] = c.item_id;
        j["true_class"] = std::string(sortcell::to_string(c.true_class));
        j["predicted"] = c.predicted.to_string();
        j["bin"] = std::string(sortcell::to_string(c.destination_bin));
        j["candidate_retries"] = c.candidate_retries;
        j["pick_retries"] = c.pick_retries;
        cycles.push_back(j);
      }
      std::ofstream f(dir / "cycle_reports.json");
      f << cycles.dump(2) << "\n";
    }
    {
      json bins;
      for (const GarmentClass cls : kClassOrder) {
        json members = json::array();
        for (const CycleReport& c : result.cycles)
          if (c.destination_bin == cls) members.push_back(c.item_id);
        bins[std::string(sortcell::to_string(cls))] = members;
      }
      json summary;
      summary["bins"] = bins;
      summary["remaining_in_basket"] = result.final_world.items_in("A").size();
      summary["clean_shutdown"] = result.clean_shutdown;
      std::ofstream f(dir / "bins_summary.json");
      f << summary.dump(2) << "\n";
    }
    {
      std::ofstream f(dir / "world_final.json", std::ios::binary);
      f << cellsim::world_to_json(result.final_world);
    }
  }
};

}  // namespace

RunResult run_until_empty(const RunConfig& config, uint64_t seed) {
  Loop loop(config, seed);
  return loop.run();
}

std::string run_log_to_jsonl(const std::vector<RunRecord>& log) {
  std::string out;
  for (const RunRecord& rec : log) {
    json j;
    j["tick"] = rec.tick;
    j["state"] = to_string(rec.state);
    j["event"] = to_string(rec.event);
    if (rec.item_id) j["item"] = *rec.item_id;
    if (rec.label) j["label"] = *rec.label;
    if (rec.latency_s) j["latency_s"] = *rec.latency_s;
    if (rec.twin_ref) j["twin"] = *rec.twin_ref;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<RunRecord> run_log_from_jsonl(const std::string& text) {
  std::vector<RunRecord> log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    RunRecord rec;
    rec.tick = j.at("tick").get<int64_t>();
    const auto state = state_from_string(j.at("state").get<std::string>());
    const auto event = event_from_string(j.at("event").get<std::string>());
    if (!state || !event) throw Error("run log contains unknown state or event");
    rec.state = *state;
    rec.event = *event;
    if (j.contains("item")) rec.item_id = j.at("item").get<std::string>();
    if (j.contains("label")) rec.label = j.at("label").get<std::string>();
    if (j.contains("latency_s")) rec.latency_s = j.at("latency_s").get<double>();
    if (j.contains("twin")) rec.twin_ref = j.at("twin").get<std::string>();
    log.push_back(std::move(rec));
  }
  return log;
}

void validate_run_log(const std::vector<RunRecord>& log, const Budgets& budgets) {
  if (log.empty()) throw ProtocolViolation("empty run log");
  if (log.front().state != CellState::Init)
    throw ProtocolViolation("run log does not start in Init");

  StepContext ctx;
  ctx.budgets = budgets;
  int64_t last_tick = -1;
  for (size_t i = 0; i < log.size(); ++i) {
    const RunRecord& rec = log[i];
    if (rec.tick <= last_tick) throw ProtocolViolation("run log ticks not increasing");
    last_tick = rec.tick;

    Event event = Event::simple(rec.event);
    if (rec.event == EventKind::Classified) {
      const auto label =
          rec.label ? classify::ParsedLabel::from_string(*rec.label) : std::nullopt;
      if (!label) throw ProtocolViolation("classified record without a valid label");
      event = Event::classified(*label);
      ctx.destination_bin = route_label(*label);
    }
    note_event(ctx.counters, rec.state, event);
    const StepResult next = step(rec.state, event, ctx);
    const CellState expected =
        i + 1 < log.size() ? log[i + 1].state : CellState::Shutdown;
    if (next.next != expected) {
      std::ostringstream msg;
      msg << "run log diverges at record " << i << ": step(" << to_string(rec.state)
          << ", " << to_string(rec.event) << ") -> " << to_string(next.next)
          << " but log shows " << to_string(expected);
      throw ProtocolViolation(msg.str());
    }
  }
}

nlohmann::json export_twin_snapshot(const cellsim::WorldState& world,
                                    const std::vector<grasp::RobotModel>& robots,
                                    const std::vector<Aabb>& obstacles,
                                    const std::string& cloud_ply_ref,
                                    size_t cloud_points) {
  json doc;
  doc["tick"] = world.tick;

  json robots_json = json::array();
  for (const grasp::RobotModel& r : robots) {
    json j;
    j["id"] = grasp::to_string(r.id);
    j["base"] = json::array({r.base_position.x, r.base_position.y, r.base_position.z});
    j["reach_min_mm"] = r.reach_min_mm;
    j["reach_max_mm"] = r.reach_max_mm;
    robots_json.push_back(j);
  }
  doc["robots"] = robots_json;

  json zones = json::array();
  for (const auto& [id, zone] : world.layout.zones) {
    json j;
    j["id"] = cellsim::to_string(id);
    j["rect"] = json::array({zone.rect_world.x0, zone.rect_world.y0,
                             zone.rect_world.x1, zone.rect_world.y1});
    zones.push_back(j);
  }
  doc["zones"] = zones;

  json boxes = json::array();
  for (const Aabb& b : obstacles) {
    json j;
    j["min"] = json::array({b.min.x, b.min.y, b.min.z});
    j["max"] = json::array({b.max.x, b.max.y, b.max.z});
    boxes.push_back(j);
  }
  doc["obstacles"] = boxes;

  doc["cloud_ply"] = cloud_ply_ref;
  doc["cloud_points"] = cloud_points;
  return doc;
}

}  // namespace sortcell::orchestrator
