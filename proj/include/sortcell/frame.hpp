#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sortcell/geometry.hpp"

namespace sortcell {

// Registered color + depth raster from one camera. Depth is distance along
// the optical axis in millimeters, in (0, table_depth_mm].
struct RgbdFrame {
  CameraId camera_id = CameraId::Cam1;
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;    // width*height*3, row-major
  std::vector<float> depth_mm; // width*height, row-major
  int64_t timestamp = 0;

  size_t idx(int u, int v) const { return static_cast<size_t>(v) * width + u; }

  Rgb8 color_at(int u, int v) const {
    const size_t i = idx(u, v) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set_color(int u, int v, Rgb8 c) {
    const size_t i = idx(u, v) * 3;
    rgb[i] = c.r;
    rgb[i + 1] = c.g;
    rgb[i + 2] = c.b;
  }
  float depth_at(int u, int v) const { return depth_mm[idx(u, v)]; }
  void set_depth(int u, int v, float d) { depth_mm[idx(u, v)] = d; }

  static RgbdFrame blank(CameraId id, int width, int height, Rgb8 fill,
                         float depth) {
    RgbdFrame f;
    f.camera_id = id;
    f.width = width;
    f.height = height;
    f.rgb.assign(static_cast<size_t>(width) * height * 3, 0);
    f.depth_mm.assign(static_cast<size_t>(width) * height, depth);
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u) f.set_color(u, v, fill);
    return f;
  }
};

// Pixel-space region of interest, inclusive corners.
struct BoundingBox {
  int u_min = 0, v_min = 0, u_max = 0, v_max = 0;

  bool contains(int u, int v) const {
    return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  }

  bool valid_for(const RgbdFrame& f) const {
    return u_min < u_max && v_min < v_max && u_min >= 0 && v_min >= 0 &&
           u_max < f.width && v_max < f.height;
  }

  static BoundingBox full(const RgbdFrame& f) {
    return {0, 0, f.width - 1, f.height - 1};
  }
};

inline void require_valid(const BoundingBox& b, const RgbdFrame& f) {
  if (!b.valid_for(f)) throw std::invalid_argument("bounding box invalid for frame");
}

}  // namespace sortcell
