#pragma once

#include "ait/errors.hpp"
#include "ait/geometry.hpp"
#include "ait/json_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ait::perception {

struct Intrinsics {
  int width = 640;
  int height = 480;
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;

  void validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("camera", "image size must be positive");
    if (!(fx > 0.0 && fy > 0.0)) throw ValidationError("camera", "focal lengths must be positive");
  }

  /// Same field of view at a different resolution.
  Intrinsics scaled(double s) const {
    Intrinsics k;
    k.width = static_cast<int>(std::lround(width * s));
    k.height = static_cast<int>(std::lround(height * s));
    k.fx = fx * s;
    k.fy = fy * s;
    k.cx = (cx + 0.5) * s - 0.5;
    k.cy = (cy + 0.5) * s - 0.5;
    return k;
  }
};

/// Camera pose is world-from-camera; the camera looks along +z with +x right and +y down.
struct Camera {
  Pose pose;
  Intrinsics k;

  /// Unnormalized ray direction in the camera frame with unit z.
  Vec3 ray_camera(double u, double v) const { return Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0); }

  Vec3 back_project(double u, double v, double depth) const { return pose.transform_point(ray_camera(u, v) * depth); }

  /// Pixel coordinates and z-depth of a world point; depth <= 0 means behind the camera.
  Eigen::Vector3d project(const Vec3& world) const {
    const Vec3 c = inverse(pose).transform_point(world);
    return {k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy, c.z()};
  }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Intrinsics& k, const Vec3& up = Vec3::UnitZ()) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {Pose(eye, Quat(r)), k};
  }
};

inline Camera default_camera() {
  return Camera::look_at(Vec3(1.25, 0.0, 0.8), Vec3(0.45, 0.0, 0.0), Intrinsics{});
}

inline constexpr float kNoReturn = std::numeric_limits<float>::quiet_NaN();

struct DepthImage {
  Intrinsics k;
  std::vector<float> data;  // row-major z-depth in metres, NaN for no return

  DepthImage() = default;
  explicit DepthImage(const Intrinsics& in) : k(in), data(static_cast<std::size_t>(in.width) * in.height, kNoReturn) {}

  int width() const { return k.width; }
  int height() const { return k.height; }
  float& at(int u, int v) { return data[static_cast<std::size_t>(v) * k.width + u]; }
  float at(int u, int v) const { return data[static_cast<std::size_t>(v) * k.width + u]; }
  bool valid(int u, int v) const { return std::isfinite(at(u, v)); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (float d : data) n += std::isfinite(d) ? 1 : 0;
    return n;
  }
};

// ---------------------------------------------------------------------------
// PFM + JSON sidecar

inline json intrinsics_to_json(const Intrinsics& k) {
  return {{"width", k.width}, {"height", k.height}, {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

inline Intrinsics intrinsics_from(const JsonCursor& c) {
  Intrinsics k;
  k.width = static_cast<int>(c.at("width").integer());
  k.height = static_cast<int>(c.at("height").integer());
  k.fx = c.number("fx");
  k.fy = c.number("fy");
  k.cx = c.number("cx");
  k.cy = c.number("cy");
  k.validate();
  return k;
}

/// Writes a single-channel little-endian PFM. Rows are stored bottom to top.
inline void write_pfm(const std::string& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "Pf\n" << img.width() << " " << img.height() << "\n-1.0\n";
  for (int v = img.height() - 1; v >= 0; --v)
    out.write(reinterpret_cast<const char*>(&img.data[static_cast<std::size_t>(v) * img.width()]),
              static_cast<std::streamsize>(sizeof(float) * img.width()));
}

inline DepthImage read_pfm(const std::string& path, const Intrinsics& k) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open");
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "Pf") throw ParseError(path, "not a single-channel PFM");
  if (w != k.width || h != k.height) throw ParseError(path, "size does not match sidecar intrinsics");
  if (scale >= 0.0) throw ParseError(path, "big-endian PFM not supported");
  DepthImage img(k);
  for (int v = h - 1; v >= 0; --v)
    in.read(reinterpret_cast<char*>(&img.data[static_cast<std::size_t>(v) * w]), static_cast<std::streamsize>(sizeof(float) * w));
  if (!in) throw ParseError(path, "truncated pixel data");
  return img;
}

/// Writes `<stem>.pfm` and `<stem>.json`.
inline void save_depth(const std::string& stem, const DepthImage& img, const Pose& camera_pose) {
  write_pfm(stem + ".pfm", img);
  json side = {{"intrinsics", intrinsics_to_json(img.k)}, {"camera_pose", to_json_pose(camera_pose)}, {"units", "m"}};
  std::ofstream(stem + ".json") << side.dump(2) << "\n";
}

struct LoadedDepth {
  DepthImage image;
  Pose camera_pose;
};

inline LoadedDepth load_depth(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw ParseError(stem + ".json", "cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(stem + ".json", e.what());
  }
  const JsonCursor c(doc, "");
  const Intrinsics k = intrinsics_from(c.at("intrinsics"));
  return {read_pfm(stem + ".pfm", k), pose_from(c.at("camera_pose"), "camera_pose")};
}

}  // namespace ait::perception
