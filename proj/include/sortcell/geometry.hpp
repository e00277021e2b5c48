#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sortcell {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

struct Rgb8 {
  uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
};

// Axis-aligned rectangle in world millimeters, [x0,x1) x [y0,y1).
struct RectMM {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  bool contains(double x, double y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  bool intersects(const RectMM& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
};

// Axis-aligned box in world millimeters (twin obstacles).
struct Aabb {
  Vec3 min, max;

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }
};

enum class CameraId { Cam1, Cam2 };

constexpr const char* to_string(CameraId id) {
  return id == CameraId::Cam1 ? "cam1" : "cam2";
}

// Pinhole camera with a rigid world pose. rot_w2c rows map world axes into
// the camera frame (x right, y down, z along the optical axis).
struct CameraModel {
  CameraId id = CameraId::Cam1;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double table_depth_mm = 0;
  std::array<double, 9> rot_w2c = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 position;  // camera origin in world mm

  Vec3 world_to_camera(const Vec3& p) const {
    const Vec3 d = p - position;
    return {rot_w2c[0] * d.x + rot_w2c[1] * d.y + rot_w2c[2] * d.z,
            rot_w2c[3] * d.x + rot_w2c[4] * d.y + rot_w2c[5] * d.z,
            rot_w2c[6] * d.x + rot_w2c[7] * d.y + rot_w2c[8] * d.z};
  }

  Vec3 camera_to_world(const Vec3& p) const {
    // rotation transpose, then translate
    return {rot_w2c[0] * p.x + rot_w2c[3] * p.y + rot_w2c[6] * p.z + position.x,
            rot_w2c[1] * p.x + rot_w2c[4] * p.y + rot_w2c[7] * p.z + position.y,
            rot_w2c[2] * p.x + rot_w2c[5] * p.y + rot_w2c[8] * p.z + position.z};
  }

  // World point -> pixel (u, v) and depth along the optical axis.
  // False when the point is behind the camera.
  bool project(const Vec3& world, double& u, double& v, double& depth) const {
    const Vec3 c = world_to_camera(world);
    if (c.z <= 0) return false;
    u = fx * c.x / c.z + cx;
    v = fy * c.y / c.z + cy;
    depth = c.z;
    return true;
  }

  // Pixel + depth -> world point (pinhole back-projection).
  Vec3 backproject(double u, double v, double depth_mm) const {
    const Vec3 cam{(u - cx) * depth_mm / fx, (v - cy) * depth_mm / fy, depth_mm};
    return camera_to_world(cam);
  }

  // Camera mounted straight above `at`, optical axis pointing down, image
  // u axis along world +x.
  static CameraModel top_down(CameraId id, double at_x, double at_y,
                              double height_mm, double fx, double fy, int width,
                              int height) {
    CameraModel m;
    m.id = id;
    m.fx = fx;
    m.fy = fy;
    m.cx = (width - 1) * 0.5;
    m.cy = (height - 1) * 0.5;
    m.width = width;
    m.height = height;
    m.table_depth_mm = height_mm;
    m.position = {at_x, at_y, height_mm};
    // x_cam = +x_world, y_cam = -y_world, z_cam = -z_world
    m.rot_w2c = {1, 0, 0, 0, -1, 0, 0, 0, -1};
    return m;
  }
};

}  // namespace sortcell
