#include "sortcell/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>

namespace sortcell::grasp {

using cellsim::GridCell;
using cellsim::Item;
using cellsim::WorldState;

namespace {

struct Region {
  std::vector<std::pair<int, int>> pixels;  // (u, v)
  float peak_height = 0;
  int peak_u = 0, peak_v = 0;
};

}  // namespace

std::optional<GraspCandidate> predict_grasp(const RgbdFrame& frame,
                                            const BoundingBox& roi,
                                            const CameraModel& camera,
                                            const GraspPredictorParams& params) {
  require_valid(roi, frame);
  const float table = static_cast<float>(camera.table_depth_mm);
  const float cutoff = table - static_cast<float>(params.min_height_mm);

  const int rw = roi.u_max - roi.u_min + 1;
  const int rh = roi.v_max - roi.v_min + 1;
  const auto mask_at = [&](int u, int v) {
    return frame.depth_at(u, v) < cutoff;
  };

  // 4-connected components over the above-threshold mask.
  std::vector<int> label(static_cast<size_t>(rw) * rh, -1);
  const auto lidx = [&](int u, int v) {
    return static_cast<size_t>(v - roi.v_min) * rw + (u - roi.u_min);
  };
  std::vector<Region> regions;
  for (int v = roi.v_min; v <= roi.v_max; ++v) {
    for (int u = roi.u_min; u <= roi.u_max; ++u) {
      if (!mask_at(u, v) || label[lidx(u, v)] >= 0) continue;
      const int id = static_cast<int>(regions.size());
      regions.emplace_back();
      std::deque<std::pair<int, int>> queue{{u, v}};
      label[lidx(u, v)] = id;
      while (!queue.empty()) {
        const auto [cu, cv] = queue.front();
        queue.pop_front();
        Region& r = regions[id];
        r.pixels.emplace_back(cu, cv);
        const float h = table - frame.depth_at(cu, cv);
        if (h > r.peak_height) {
          r.peak_height = h;
          r.peak_u = cu;
          r.peak_v = cv;
        }
        const int du[4] = {1, -1, 0, 0};
        const int dv[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nu = cu + du[k], nv = cv + dv[k];
          if (nu < roi.u_min || nu > roi.u_max || nv < roi.v_min || nv > roi.v_max)
            continue;
          if (!mask_at(nu, nv) || label[lidx(nu, nv)] >= 0) continue;
          label[lidx(nu, nv)] = id;
          queue.emplace_back(nu, nv);
        }
      }
    }
  }
  if (regions.empty()) return std::nullopt;

  // Tallest region wins; ties broken by earliest peak in scan order.
  const Region* best = &regions[0];
  for (const Region& r : regions) {
    if (r.peak_height > best->peak_height ||
        (r.peak_height == best->peak_height &&
         std::pair(r.peak_v, r.peak_u) < std::pair(best->peak_v, best->peak_u)))
      best = &r;
  }

  double su = 0, sv = 0;
  for (const auto& [pu, pv] : best->pixels) {
    su += pu;
    sv += pv;
  }
  const double n = static_cast<double>(best->pixels.size());
  int cu = static_cast<int>(std::lround(su / n));
  int cv = static_cast<int>(std::lround(sv / n));
  // A concave region can put the centroid outside the mask; snap to the
  // nearest region pixel so the grasp lands on material.
  if (!mask_at(cu, cv)) {
    double best_d = 1e30;
    int bu = best->peak_u, bv = best->peak_v;
    for (const auto& [pu, pv] : best->pixels) {
      const double d = (pu - cu) * double(pu - cu) + (pv - cv) * double(pv - cv);
      if (d < best_d) {
        best_d = d;
        bu = pu;
        bv = pv;
      }
    }
    cu = bu;
    cv = bv;
  }

  // Principal axis of the region's second moments gives the gripper yaw.
  double sxx = 0, syy = 0, sxy = 0;
  const double mu = su / n, mv = sv / n;
  for (const auto& [pu, pv] : best->pixels) {
    sxx += (pu - mu) * (pu - mu);
    syy += (pv - mv) * (pv - mv);
    sxy += (pu - mu) * (pv - mv);
  }
  const double yaw = 0.5 * std::atan2(2 * sxy, sxx - syy);

  GraspCandidate cand;
  cand.u = cu;
  cand.v = cv;
  cand.depth_mm = frame.depth_at(cu, cv);
  cand.world_pos = pixel_to_world(cu, cv, cand.depth_mm, camera);
  cand.yaw_rad = yaw;
  cand.score = std::clamp(
      (best->peak_height - params.min_height_mm) /
          (params.max_height_mm - params.min_height_mm),
      0.0, 1.0);
  return cand;
}

std::optional<GraspCandidate> request_candidate_with_retry(
    const std::function<std::optional<GraspCandidate>()>& source,
    int max_total_attempts) {
  if (max_total_attempts < 1)
    throw std::invalid_argument("max_total_attempts must be >= 1");
  for (int attempt = 0; attempt < max_total_attempts; ++attempt) {
    auto result = source();
    if (result.has_value()) return result;
  }
  return std::nullopt;
}

Vec3 pixel_to_world(double u, double v, double depth_mm, const CameraModel& camera) {
  if (depth_mm <= 0) throw std::invalid_argument("depth must be positive");
  return camera.backproject(u, v, depth_mm);
}

bool check_reachability(const Vec3& pose, const RobotModel& robot,
                        const std::vector<Aabb>& obstacles) {
  const Vec3 delta = pose - robot.base_position;
  const double dist = delta.norm();
  if (dist < robot.reach_min_mm || dist > robot.reach_max_mm) return false;
  if (obstacles.empty() || dist == 0) return obstacles.empty();

  // Sample the straight base->pose segment at 1 mm steps.
  const int steps = static_cast<int>(std::ceil(dist));
  for (int i = 0; i <= steps; ++i) {
    const double t = std::min(1.0, static_cast<double>(i) / dist);
    const Vec3 p = robot.base_position + delta * t;
    for (const Aabb& box : obstacles)
      if (box.contains(p)) return false;
  }
  return true;
}

TactileBaseline record_tactile_baseline(const TactileConfig& tactile) {
  TactileBaseline base;
  base.normal.assign(static_cast<size_t>(tactile.channels), 0.0);
  base.shear.assign(static_cast<size_t>(tactile.channels), 0.0);
  return base;
}

namespace {

TactileReading synthesize_reading(const TactileBaseline& baseline,
                                  const TactileConfig& cfg, double thickness_mm) {
  TactileReading r;
  r.normal = baseline.normal;
  r.shear = baseline.shear;
  // Spacers keep the empty gripper off the sensors, so thickness 0 reads as
  // the baseline itself.
  for (double& f : r.normal) f += cfg.gain_per_mm * thickness_mm;
  for (double& f : r.shear) f += 0.2 * cfg.gain_per_mm * thickness_mm;
  return r;
}

// Topmost item (stacking order) whose footprint covers the world cell under
// the candidate.
const Item* item_under(const WorldState& world, const Vec3& world_pos) {
  const GridCell cell{cellsim::to_cell(world_pos.x), cellsim::to_cell(world_pos.y)};
  const Item* hit = nullptr;
  for (const std::string& id : world.stacking) {  // bottom -> top
    const auto loc = world.item_location.find(id);
    if (loc == world.item_location.end() || loc->second == cellsim::kLocGripped)
      continue;
    const Item* item = world.find_item(id);
    if (!item) continue;
    if (std::find(item->cells.begin(), item->cells.end(), cell) != item->cells.end())
      hit = item;
  }
  return hit;
}

}  // namespace

std::pair<WorldState, PickOutcome> execute_pick(const WorldState& world,
                                                const RobotModel& robot,
                                                const GraspCandidate& candidate,
                                                RngStream& rng,
                                                const TactileConfig& tactile,
                                                const TactileBaseline& baseline) {
  PickOutcome outcome;
  const double draw = rng.uniform01();
  const bool success = draw >= robot.pick_failure_rate;
  const Item* target = item_under(world, candidate.world_pos);

  if (!success || !target) {
    outcome.reading = synthesize_reading(baseline, tactile, 0.0);
    return {world, outcome};
  }

  WorldState next = world;
  next.item_location[target->id] = cellsim::kLocGripped;
  outcome.grasped_item = target->id;
  outcome.reading = synthesize_reading(baseline, tactile, target->thickness_mm);

  if (target->entangled_with) {
    const auto partner_loc = next.item_location.find(*target->entangled_with);
    if (partner_loc != next.item_location.end() && partner_loc->second == "A") {
      next.item_location[*target->entangled_with] = cellsim::kLocGripped;
      outcome.bycatch.push_back(*target->entangled_with);
    }
  }
  next.tick += 1;
  return {next, outcome};
}

bool verify_grasp(const TactileReading& reading, const TactileBaseline& baseline,
                  double min_delta) {
  if (reading.normal.size() != baseline.normal.size())
    throw std::invalid_argument("tactile channel count mismatch");
  double max_delta = -1e300;
  for (size_t c = 0; c < reading.normal.size(); ++c)
    max_delta = std::max(max_delta, reading.normal[c] - baseline.normal[c]);
  return max_delta >= min_delta;
}

namespace {

// Grow the footprint by ring dilation to exactly `target` cells,
// deterministic order (distance, then y, then x).
void dilate_to(Item& item, size_t target) {
  std::set<GridCell> occupied(item.cells.begin(), item.cells.end());
  std::map<GridCell, size_t> parent;  // new cell -> index of source cell
  while (occupied.size() < target) {
    std::vector<std::pair<GridCell, size_t>> ring;
    for (size_t k = 0; k < item.cells.size(); ++k) {
      const GridCell& c = item.cells[k];
      const GridCell candidates[4] = {
          {c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (const GridCell& n : candidates)
        if (!occupied.count(n)) ring.emplace_back(n, k);
    }
    std::sort(ring.begin(), ring.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [cell, src] : ring) {
      if (occupied.size() >= target) return;
      if (!occupied.insert(cell).second) continue;
      item.cells.push_back(cell);
      item.height_mm.push_back(item.height_mm[src]);
      item.color_rgb.push_back(item.color_rgb[src]);
    }
  }
}

}  // namespace

WorldState shake_and_spread(const WorldState& world, const RobotModel& robot,
                            const PickOutcome& outcome, double spread_factor) {
  (void)robot;
  if (!outcome.grasped_item)
    throw std::invalid_argument("shake_and_spread requires a grasped item");
  if (spread_factor < 1.0)
    throw std::invalid_argument("spread factor must be >= 1");

  WorldState next = world;

  // Drop bycatch above the basket and break the entanglement.
  for (const std::string& id : outcome.bycatch) {
    next.item_location[id] = "A";
    Item* partner = next.find_item(id);
    if (partner && partner->entangled_with) {
      Item* other = next.find_item(*partner->entangled_with);
      if (other) other->entangled_with.reset();
      partner->entangled_with.reset();
    }
    next.tick += 1;
  }

  Item* item = next.find_item(*outcome.grasped_item);
  if (!item) throw std::invalid_argument("grasped item not in world");

  const size_t target =
      static_cast<size_t>(std::llround(spread_factor * static_cast<double>(item->area_cells())));
  if (target > item->area_cells()) {
    const double volume = item->volume();
    dilate_to(*item, target);
    const double flat = volume / static_cast<double>(item->area_cells());
    std::fill(item->height_mm.begin(), item->height_mm.end(), flat);
    next.tick += 1;
  }
  return next;
}

bool quick_occupancy_check(const RgbdFrame& frame, const BoundingBox& zone_b_roi,
                           const CameraModel& camera,
                           const GraspPredictorParams& params) {
  return predict_grasp(frame, zone_b_roi, camera, params).has_value();
}

}  // namespace sortcell::grasp
