#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sortcell/frame.hpp"
#include "sortcell/garment.hpp"
#include "sortcell/geometry.hpp"

namespace sortcell::cellsim {

// World footprints live on a coarse millimeter grid.
inline constexpr double kCellSizeMm = 5.0;

struct GridCell {
  int x = 0, y = 0;
  bool operator==(const GridCell&) const = default;
  auto operator<=>(const GridCell&) const = default;
};

inline int to_cell(double mm) {
  return static_cast<int>(std::floor(mm / kCellSizeMm));
}

// One simulated garment or foreign object. cells/height_mm/color_rgb are
// parallel arrays (one entry per covered grid cell).
struct Item {
  std::string id;
  GarmentClass true_class = GarmentClass::Other;
  std::vector<GridCell> cells;
  std::vector<double> height_mm;
  std::vector<Rgb8> color_rgb;
  double thickness_mm = 3.0;
  std::optional<std::string> entangled_with;
  bool foreign = false;

  size_t area_cells() const { return cells.size(); }
  double volume() const;                 // sum of per-cell heights (cell area factored out)
  double mean_height() const;
  void centroid_cells(double& x, double& y) const;
  void translate(int dx_cells, int dy_cells);
};

enum class ZoneId { A, B, C };

constexpr const char* to_string(ZoneId z) {
  switch (z) {
    case ZoneId::A: return "A";
    case ZoneId::B: return "B";
    case ZoneId::C: return "C";
  }
  return "?";
}

struct Zone {
  ZoneId id = ZoneId::A;
  RectMM rect_world;
  std::map<GarmentClass, RectMM> bins;  // populated for zone C only
};

// Item location: a zone, or lifted by the gripper.
inline constexpr const char* kLocGripped = "gripped";

// Static cell geometry: zones, basket, cameras, table appearance.
struct CellLayout {
  std::map<ZoneId, Zone> zones;
  RectMM basket_rect_world;
  double basket_rim_mm = 10.0;
  Rgb8 table_color{128, 128, 128};
  Rgb8 basket_rim_color{255, 0, 255};  // reserved color key
  std::map<CameraId, CameraModel> cameras;
  double stacking_factor = 3.0;  // basket capacity multiplier

  static CellLayout standard();
};

struct SceneSpec {
  std::map<GarmentClass, int> counts;  // garment classes only (never Empty)
  int foreign_count = 0;
  double entangle_p = 0.0;
  std::optional<int> entangled_pairs;  // exact pair count; overrides entangle_p

  int total_items() const;
};

struct WorldState {
  CellLayout layout;
  std::vector<Item> items;                             // spawn order
  std::map<std::string, std::string> item_location;    // id -> "A"|"B"|"C"|"gripped"
  std::vector<std::string> stacking;                   // bottom -> top
  uint64_t rng_seed = 0;
  int64_t tick = 0;

  const Item* find_item(const std::string& id) const;
  Item* find_item(const std::string& id);
  const Item& item_or_throw(const std::string& id) const;
  std::vector<std::string> items_in(const std::string& location) const;
};

// Placement target for move_item.
struct Placement {
  ZoneId zone = ZoneId::A;
  std::optional<GarmentClass> bin;  // zone C sub-rectangle
  std::optional<double> x_mm, y_mm; // desired footprint center; default = target rect center
};

// Seeded scene construction. Identical (spec, seed) gives an identical world.
// Throws std::invalid_argument when the footprint area exceeds basket
// capacity (area * stacking_factor).
WorldState spawn_scene(const SceneSpec& spec, uint64_t seed,
                       const CellLayout& layout = CellLayout::standard());

// Translates the item footprint into the destination rectangle, updates its
// location and stacking position, bumps the tick.
WorldState move_item(WorldState world, const std::string& item_id,
                     const Placement& dest);

// Lift / return helpers used by the pick pipeline.
WorldState set_location(WorldState world, const std::string& item_id,
                        const std::string& location);

// JSON (de)serialization for twin export and golden-file tests.
std::string world_to_json(const WorldState& world);
WorldState world_from_json(const std::string& text);

}  // namespace sortcell::cellsim
