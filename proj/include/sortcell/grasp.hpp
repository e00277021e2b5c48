#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sortcell/frame.hpp"
#include "sortcell/geometry.hpp"
#include "sortcell/rng.hpp"
#include "sortcell/world.hpp"

namespace sortcell::grasp {

struct GraspCandidate {
  int u = 0, v = 0;
  double depth_mm = 0;
  Vec3 world_pos;
  double yaw_rad = 0;
  double score = 0;  // normalized region prominence, [0,1]
};

enum class RobotId { Alice, Bob };

constexpr const char* to_string(RobotId id) {
  return id == RobotId::Alice ? "alice" : "bob";
}

struct RobotModel {
  RobotId id = RobotId::Alice;
  Vec3 base_position;
  double reach_min_mm = 120;
  double reach_max_mm = 1500;
  double pick_failure_rate = 0.0;
};

struct TactileBaseline {
  std::vector<double> normal;
  std::vector<double> shear;
};

struct TactileReading {
  std::vector<double> normal;
  std::vector<double> shear;
};

struct TactileConfig {
  int channels = 4;
  double gain_per_mm = 0.5;  // force delta per mm of grasped thickness
  double min_delta = 1.0;    // grasp-success threshold, inclusive
};

struct PickOutcome {
  std::optional<std::string> grasped_item;
  TactileReading reading;
  std::vector<std::string> bycatch;
};

struct GraspPredictorParams {
  double min_height_mm = 5.0;   // anything closer to the table is not graspable
  double max_height_mm = 120.0; // score normalization ceiling
};

// Height-prominence heuristic: centroid of the tallest connected region
// above the threshold inside the ROI. Deterministic; absence is a result,
// not an error.
std::optional<GraspCandidate> predict_grasp(const RgbdFrame& frame,
                                            const BoundingBox& roi,
                                            const CameraModel& camera,
                                            const GraspPredictorParams& params = {});

// First non-empty result wins; gives up after max_total_attempts consecutive
// empty results.
std::optional<GraspCandidate> request_candidate_with_retry(
    const std::function<std::optional<GraspCandidate>()>& source,
    int max_total_attempts = 5);

// Pinhole back-projection into the world frame.
Vec3 pixel_to_world(double u, double v, double depth_mm, const CameraModel& camera);

// Radial reach band plus straight-segment obstacle check (1 mm sampling).
bool check_reachability(const Vec3& pose, const RobotModel& robot,
                        const std::vector<Aabb>& obstacles);

// Pick attempt against the simulated world. Success is drawn from the
// robot's failure rate via the seeded stream; the topmost item covering the
// candidate becomes "gripped" and an entangled partner still in the basket
// joins the bycatch. Tactile reading is synthesized from item thickness.
std::pair<cellsim::WorldState, PickOutcome> execute_pick(
    const cellsim::WorldState& world, const RobotModel& robot,
    const GraspCandidate& candidate, RngStream& rng,
    const TactileConfig& tactile, const TactileBaseline& baseline);

TactileBaseline record_tactile_baseline(const TactileConfig& tactile);

// True iff any channel's normal-force delta reaches min_delta (inclusive).
// Throws std::invalid_argument on channel-count mismatch.
bool verify_grasp(const TactileReading& reading, const TactileBaseline& baseline,
                  double min_delta);

// Shake off bycatch (returned to zone A, links broken) and re-lay the
// grasped footprint flattened: area grows to round(spread_factor * area),
// height drops to conserve volume exactly. Factor 1 is the identity.
cellsim::WorldState shake_and_spread(const cellsim::WorldState& world,
                                     const RobotModel& robot,
                                     const PickOutcome& outcome,
                                     double spread_factor);

// Fast zone-B occupancy via the grasp predictor.
bool quick_occupancy_check(const RgbdFrame& frame, const BoundingBox& zone_b_roi,
                           const CameraModel& camera,
                           const GraspPredictorParams& params = {});

}  // namespace sortcell::grasp
