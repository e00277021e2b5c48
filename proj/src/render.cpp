#include "sortcell/render.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "sortcell/errors.hpp"
#include "sortcell/rng.hpp"

namespace sortcell::cellsim {

namespace {

uint64_t cell_key(int x, int y) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(x)) << 32) |
         static_cast<uint32_t>(y);
}

struct CellSample {
  float max_height = 0;  // depth uses the tallest covering item
  Rgb8 color;            // color uses the stacking-topmost covering item
};

// One pass in stacking order (bottom to top): max for height, overwrite for
// color. Gripped items are off the table and skipped.
std::unordered_map<uint64_t, CellSample> build_cell_map(const WorldState& world) {
  std::unordered_map<uint64_t, CellSample> map;
  for (const std::string& id : world.stacking) {
    const auto loc = world.item_location.find(id);
    if (loc == world.item_location.end() || loc->second == kLocGripped) continue;
    const Item* item = world.find_item(id);
    if (!item) continue;
    for (size_t k = 0; k < item->cells.size(); ++k) {
      CellSample& s = map[cell_key(item->cells[k].x, item->cells[k].y)];
      s.max_height = std::max(s.max_height, static_cast<float>(item->height_mm[k]));
      s.color = item->color_rgb[k];
    }
  }
  return map;
}

}  // namespace

RgbdFrame render_camera(const WorldState& world, CameraId camera_id,
                        const RenderOptions& opts) {
  const auto cam_it = world.layout.cameras.find(camera_id);
  if (cam_it == world.layout.cameras.end())
    throw std::invalid_argument("camera not present in layout");
  const CameraModel& cam = cam_it->second;

  RgbdFrame frame = RgbdFrame::blank(camera_id, cam.width, cam.height,
                                     world.layout.table_color,
                                     static_cast<float>(cam.table_depth_mm));
  frame.timestamp = world.tick;

  const auto cells = build_cell_map(world);
  const RectMM& basket = world.layout.basket_rect_world;
  const double rim = world.layout.basket_rim_mm;
  const RectMM basket_interior{basket.x0 + rim, basket.y0 + rim,
                               basket.x1 - rim, basket.y1 - rim};

  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      // Ray through the pixel intersected with the table plane.
      const Vec3 on_table = cam.backproject(u, v, cam.table_depth_mm);
      const auto hit = cells.find(cell_key(to_cell(on_table.x), to_cell(on_table.y)));
      if (hit != cells.end()) {
        frame.set_depth(u, v, static_cast<float>(cam.table_depth_mm) - hit->second.max_height);
        frame.set_color(u, v, hit->second.color);
      } else if (basket.contains(on_table.x, on_table.y) &&
                 !basket_interior.contains(on_table.x, on_table.y)) {
        // Transparent basket: rim carries the color key, depth stays table.
        frame.set_color(u, v, world.layout.basket_rim_color);
      }
    }
  }

  if (opts.depth_noise_sigma_mm > 0) {
    RngStream noise = RngStream(world.rng_seed)
                          .split("render-noise")
                          .split(to_string(camera_id))
                          .split(std::to_string(world.tick));
    for (float& d : frame.depth_mm) {
      // Box-Muller
      const double u1 = std::max(noise.uniform01(), 1e-12);
      const double u2 = noise.uniform01();
      const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
      d = static_cast<float>(std::clamp(
          static_cast<double>(d) + g * opts.depth_noise_sigma_mm, 1.0,
          cam.table_depth_mm));
    }
  }
  return frame;
}

BoundingBox compute_basket_bbox(const RgbdFrame& frame, Rgb8 basket_color_key,
                                int margin_px) {
  int u_min = frame.width, v_min = frame.height, u_max = -1, v_max = -1;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      if (frame.color_at(u, v) == basket_color_key) {
        u_min = std::min(u_min, u);
        u_max = std::max(u_max, u);
        v_min = std::min(v_min, v);
        v_max = std::max(v_max, v);
      }
    }
  }
  if (u_max < 0) throw Error("basket absent");
  BoundingBox box{u_min - margin_px, v_min - margin_px, u_max + margin_px,
                  v_max + margin_px};
  box.u_min = std::max(box.u_min, 0);
  box.v_min = std::max(box.v_min, 0);
  box.u_max = std::min(box.u_max, frame.width - 1);
  box.v_max = std::min(box.v_max, frame.height - 1);
  return box;
}

RgbdFrame apply_bounding_box(const RgbdFrame& frame, const BoundingBox& bbox,
                             Rgb8 table_color, float table_depth_mm) {
  require_valid(bbox, frame);
  RgbdFrame out = frame;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      if (!bbox.contains(u, v)) {
        out.set_color(u, v, table_color);
        out.set_depth(u, v, table_depth_mm);
      }
    }
  }
  return out;
}

BoundingBox project_zone_roi(const CameraModel& camera, const RectMM& zone_rect) {
  double u0 = 0, v0 = 0, u1 = 0, v1 = 0, d = 0;
  const Vec3 c0{zone_rect.x0, zone_rect.y0, 0};
  const Vec3 c1{zone_rect.x1, zone_rect.y1, 0};
  camera.project(c0, u0, v0, d);
  camera.project(c1, u1, v1, d);
  BoundingBox box;
  box.u_min = std::max(0, static_cast<int>(std::floor(std::min(u0, u1))));
  box.v_min = std::max(0, static_cast<int>(std::floor(std::min(v0, v1))));
  box.u_max = std::min(camera.width - 1, static_cast<int>(std::ceil(std::max(u0, u1))));
  box.v_max = std::min(camera.height - 1, static_cast<int>(std::ceil(std::max(v0, v1))));
  return box;
}

}  // namespace sortcell::cellsim
