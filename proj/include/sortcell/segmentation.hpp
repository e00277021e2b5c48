#pragma once

#include <filesystem>
#include <vector>

#include "sortcell/frame.hpp"
#include "sortcell/geometry.hpp"

namespace sortcell::segmentation {

struct SegThresholds {
  double depth_delta_mm = 5.0;  // strict >, boundary is background
  int rgb_delta = 15;           // strict >, any channel
};

struct SegBaseline {
  CameraId camera_id = CameraId::Cam2;
  int width = 0, height = 0;
  std::vector<float> depth_mm;
  std::vector<uint8_t> rgb;
  int frame_count_used = 0;
};

struct ColoredPoint {
  float x = 0, y = 0, z = 0;
  uint8_t r = 0, g = 0, b = 0;
};

struct ColoredPointCloud {
  std::vector<ColoredPoint> points;
  int64_t source_tick = 0;
};

// Per-pixel median over the frames (lower median for even counts). Throws on
// an empty list or mixed cameras.
SegBaseline capture_baseline(const std::vector<RgbdFrame>& frames);

// Background subtraction with fixed strict thresholds; each foreground pixel
// back-projects into one colored point, row-major order.
ColoredPointCloud segment(const RgbdFrame& frame, const SegBaseline& baseline,
                          const SegThresholds& thr, const CameraModel& camera);

// ASCII PLY with per-vertex color.
void export_cloud(const ColoredPointCloud& cloud, const std::filesystem::path& path);
std::string cloud_to_ply(const ColoredPointCloud& cloud);

// Baseline persistence: PNG+PGM frame pair plus a JSON sidecar.
void save_baseline(const SegBaseline& baseline, const std::filesystem::path& dir);
SegBaseline load_baseline(const std::filesystem::path& dir);

}  // namespace sortcell::segmentation
