#pragma once

#include <optional>

#include "sortcell/frame.hpp"
#include "sortcell/world.hpp"

namespace sortcell::cellsim {

struct RenderOptions {
  // Depth noise hook; 0 disables it (default). When > 0, gaussian noise with
  // this sigma is added per pixel from a stream keyed by (seed, tick, camera).
  double depth_noise_sigma_mm = 0.0;
};

// Pure top-down render: depth = table_depth - max covering item height,
// rgb = topmost covering item cell color (stacking order), basket rim pixels
// carry the reserved color key.
RgbdFrame render_camera(const WorldState& world, CameraId camera_id,
                        const RenderOptions& opts = {});

// Smallest pixel rectangle containing all basket-rim pixels, expanded by
// margin and clipped to the frame. Throws Error("basket absent") when the
// frame shows no rim pixel.
BoundingBox compute_basket_bbox(const RgbdFrame& frame, Rgb8 basket_color_key,
                                int margin_px = 0);

// Pixels outside the box are reset to bare table (table color, table depth).
RgbdFrame apply_bounding_box(const RgbdFrame& frame, const BoundingBox& bbox,
                             Rgb8 table_color, float table_depth_mm);

// Zone rectangle projected into the camera image, clipped to frame bounds.
BoundingBox project_zone_roi(const CameraModel& camera, const RectMM& zone_rect);

}  // namespace sortcell::cellsim
