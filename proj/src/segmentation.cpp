#include "sortcell/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sortcell/image_io.hpp"

namespace sortcell::segmentation {

SegBaseline capture_baseline(const std::vector<RgbdFrame>& frames) {
  if (frames.empty()) throw std::invalid_argument("no baseline frames");
  const RgbdFrame& first = frames.front();
  for (const RgbdFrame& f : frames) {
    if (f.camera_id != first.camera_id)
      throw std::invalid_argument("baseline frames from mixed cameras");
    if (f.width != first.width || f.height != first.height)
      throw std::invalid_argument("baseline frame dimensions differ");
  }

  SegBaseline base;
  base.camera_id = first.camera_id;
  base.width = first.width;
  base.height = first.height;
  base.frame_count_used = static_cast<int>(frames.size());
  const size_t n_px = static_cast<size_t>(base.width) * base.height;
  base.depth_mm.resize(n_px);
  base.rgb.resize(n_px * 3);

  // Lower median: element (n-1)/2 of the sorted sample.
  const size_t mid = (frames.size() - 1) / 2;
  std::vector<float> dvals(frames.size());
  std::vector<uint8_t> cvals(frames.size());
  for (size_t p = 0; p < n_px; ++p) {
    for (size_t f = 0; f < frames.size(); ++f) dvals[f] = frames[f].depth_mm[p];
    std::nth_element(dvals.begin(), dvals.begin() + mid, dvals.end());
    base.depth_mm[p] = dvals[mid];
    for (size_t ch = 0; ch < 3; ++ch) {
      for (size_t f = 0; f < frames.size(); ++f) cvals[f] = frames[f].rgb[p * 3 + ch];
      std::nth_element(cvals.begin(), cvals.begin() + mid, cvals.end());
      base.rgb[p * 3 + ch] = cvals[mid];
    }
  }
  return base;
}

ColoredPointCloud segment(const RgbdFrame& frame, const SegBaseline& baseline,
                          const SegThresholds& thr, const CameraModel& camera) {
  if (frame.width != baseline.width || frame.height != baseline.height)
    throw std::invalid_argument("frame/baseline dimension mismatch");
  if (thr.depth_delta_mm <= 0 || thr.rgb_delta <= 0)
    throw std::invalid_argument("thresholds must be positive");

  ColoredPointCloud cloud;
  cloud.source_tick = frame.timestamp;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const size_t p = frame.idx(u, v);
      const double ddelta =
          std::abs(static_cast<double>(frame.depth_mm[p]) - baseline.depth_mm[p]);
      bool fg = ddelta > thr.depth_delta_mm;
      if (!fg) {
        for (size_t ch = 0; ch < 3 && !fg; ++ch) {
          const int cdelta = std::abs(static_cast<int>(frame.rgb[p * 3 + ch]) -
                                      static_cast<int>(baseline.rgb[p * 3 + ch]));
          fg = cdelta > thr.rgb_delta;
        }
      }
      if (!fg) continue;
      const Vec3 w = camera.backproject(u, v, frame.depth_mm[p]);
      cloud.points.push_back({static_cast<float>(w.x), static_cast<float>(w.y),
                              static_cast<float>(w.z), frame.rgb[p * 3],
                              frame.rgb[p * 3 + 1], frame.rgb[p * 3 + 2]});
    }
  }
  return cloud;
}

namespace {

// %.9g keeps float32 exact through a text round-trip and still prints whole
// numbers without a decimal point.
void append_coord(std::string& out, float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  out += buf;
}

}  // namespace

std::string cloud_to_ply(const ColoredPointCloud& cloud) {
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.points.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (const ColoredPoint& p : cloud.points) {
    append_coord(out, p.x);
    out += ' ';
    append_coord(out, p.y);
    out += ' ';
    append_coord(out, p.z);
    out += ' ';
    out += std::to_string(p.r) + " " + std::to_string(p.g) + " " +
           std::to_string(p.b) + "\n";
  }
  return out;
}

void export_cloud(const ColoredPointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  const std::string text = cloud_to_ply(cloud);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

void save_baseline(const SegBaseline& baseline, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_png_rgb(dir / "baseline_rgb.png", baseline.width, baseline.height, baseline.rgb);
  write_pgm16_depth(dir / "baseline_depth.pgm", baseline.width, baseline.height,
                    baseline.depth_mm);
  nlohmann::json meta;
  meta["camera"] = to_string(baseline.camera_id);
  meta["frame_count_used"] = baseline.frame_count_used;
  std::ofstream f(dir / "baseline.json");
  f << meta.dump(2) << "\n";
}

SegBaseline load_baseline(const std::filesystem::path& dir) {
  std::ifstream f(dir / "baseline.json");
  if (!f) throw std::runtime_error("missing baseline.json in " + dir.string());
  nlohmann::json meta = nlohmann::json::parse(f);
  const CameraId id =
      meta.at("camera").get<std::string>() == "cam1" ? CameraId::Cam1 : CameraId::Cam2;
  const RgbdFrame frame =
      import_frame(id, dir / "baseline_rgb.png", dir / "baseline_depth.pgm");
  SegBaseline base;
  base.camera_id = id;
  base.width = frame.width;
  base.height = frame.height;
  base.depth_mm = frame.depth_mm;
  base.rgb = frame.rgb;
  base.frame_count_used = meta.at("frame_count_used").get<int>();
  return base;
}

}  // namespace sortcell::segmentation
