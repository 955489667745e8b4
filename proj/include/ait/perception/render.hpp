#pragma once

#include "ait/arm/kinematics.hpp"
#include "ait/perception/camera.hpp"
#include "ait/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ait::perception {

/// Finite horizontal table top.
struct TablePlane {
  double z = 0.0;
  Eigen::Vector2d min = Eigen::Vector2d(-0.4, -0.9);
  Eigen::Vector2d max = Eigen::Vector2d(1.4, 0.9);
};

struct RenderItem {
  Shape shape;
  Pose pose;
  std::string tag;  // object instance id, informational
};

/// Link of the arm approximated as a capsule.
struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.05;
};

/// Capsules along consecutive distinct frame origins, ending at the tool point.
inline std::vector<Capsule> arm_capsules(const arm::ArmModel& m, const arm::Vec7& q, double link_radius = 0.055,
                                         double hand_radius = 0.05) {
  const arm::FkResult f = arm::fk_full(m, q);
  std::vector<Vec3> pts;
  for (const auto& o : f.origins)
    if (pts.empty() || (o - pts.back()).norm() > 1e-6) pts.push_back(o);
  std::vector<Capsule> caps;
  for (std::size_t i = 1; i < pts.size(); ++i) caps.push_back({pts[i - 1], pts[i], link_radius});
  caps.push_back({pts.back(), f.ee.position + f.ee.rotate(Vec3(0, 0, -0.03)), hand_radius});
  return caps;
}

/// Nearest non-negative ray parameter hitting the capsule (d need not be unit).
inline std::optional<double> ray_capsule(const Capsule& c, const Vec3& o, const Vec3& d) {
  double best = std::numeric_limits<double>::infinity();
  const Vec3 ba = c.b - c.a;
  const double len2 = ba.squaredNorm();
  // cylinder body
  if (len2 > 1e-12) {
    const Vec3 axis = ba / std::sqrt(len2);
    const Vec3 oc = o - c.a;
    const Vec3 dp = d - d.dot(axis) * axis;
    const Vec3 op = oc - oc.dot(axis) * axis;
    const double A = dp.squaredNorm(), B = op.dot(dp), C = op.squaredNorm() - c.radius * c.radius;
    const double disc = B * B - A * C;
    if (A > 1e-15 && disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-B - sq) / A, (-B + sq) / A}) {
        if (t < 0.0) continue;
        const double s = (oc + t * d).dot(axis);
        if (s >= 0.0 && s * s <= len2 && t < best) best = t;
      }
    }
  }
  // end caps
  for (const Vec3& center : {c.a, c.b}) {
    const Vec3 oc = o - center;
    const double A = d.squaredNorm(), B = oc.dot(d), C = oc.squaredNorm() - c.radius * c.radius;
    const double disc = B * B - A * C;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    for (double t : {(-B - sq) / A, (-B + sq) / A})
      if (t >= 0.0 && t < best) best = t;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

struct PixelBox {
  int u0 = 0, v0 = 0, u1 = -1, v1 = -1;  // inclusive
  bool empty() const { return u1 < u0 || v1 < v0; }
};

/// Image-space bounds of a world sphere, clipped to the image. Whole image when
/// the sphere reaches behind the camera.
inline PixelBox sphere_bounds(const Camera& cam, const Vec3& center, double radius) {
  const Vec3 c = inverse(cam.pose).transform_point(center);
  const int w = cam.k.width, h = cam.k.height;
  if (c.z() - radius <= 1e-3) {
    if (c.z() + radius <= 0.0) return {};
    return {0, 0, w - 1, h - 1};
  }
  // conservative: project the bounding cube's extremes at the nearest depth
  const double zn = c.z() - radius;
  const double umin = cam.k.fx * (std::min((c.x() - radius) / zn, (c.x() - radius) / (c.z() + radius))) + cam.k.cx;
  const double umax = cam.k.fx * (std::max((c.x() + radius) / zn, (c.x() + radius) / (c.z() + radius))) + cam.k.cx;
  const double vmin = cam.k.fy * (std::min((c.y() - radius) / zn, (c.y() - radius) / (c.z() + radius))) + cam.k.cy;
  const double vmax = cam.k.fy * (std::max((c.y() + radius) / zn, (c.y() + radius) / (c.z() + radius))) + cam.k.cy;
  PixelBox b;
  b.u0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
  b.v0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
  b.u1 = std::min(w - 1, static_cast<int>(std::ceil(umax)) + 1);
  b.v1 = std::min(h - 1, static_cast<int>(std::ceil(vmax)) + 1);
  return b;
}

inline PixelBox capsule_bounds(const Camera& cam, const Capsule& c) {
  return sphere_bounds(cam, 0.5 * (c.a + c.b), 0.5 * (c.b - c.a).norm() + c.radius);
}

struct RenderOptions {
  double noise_sigma = 0.0;  // metres, zero-mean Gaussian per pixel
  std::uint64_t seed = 0;
  bool draw_table = true;
};

/// Writes the z-depth of `item` into `img` wherever it is nearer than the current value.
inline void render_item(DepthImage& img, const Camera& cam, const RenderItem& item, std::vector<std::uint8_t>* hit_mask = nullptr) {
  const PixelBox box = sphere_bounds(cam, item.pose.position, bounding_radius(item.shape));
  if (box.empty()) return;
  const Pose world_to_obj = inverse(item.pose);
  const Vec3 o_local = world_to_obj.transform_point(cam.pose.position);
  const Mat3 r = (world_to_obj.orientation * cam.pose.orientation).toRotationMatrix();
  for (int v = box.v0; v <= box.v1; ++v) {
    for (int u = box.u0; u <= box.u1; ++u) {
      const Vec3 rc = cam.ray_camera(u, v);  // z component 1, so ray parameter = z-depth
      const auto t = ray_intersect(item.shape, o_local, r * rc);
      if (!t || *t <= 0.0) continue;
      float& px = img.at(u, v);
      const float depth = static_cast<float>(*t);
      if (!std::isfinite(px) || depth < px) {
        px = depth;
        if (hit_mask) (*hit_mask)[static_cast<std::size_t>(v) * img.width() + u] = 1;
      }
    }
  }
}

inline void render_table(DepthImage& img, const Camera& cam, const TablePlane& table) {
  const Vec3 o = cam.pose.position;
  const Mat3 r = cam.pose.rotation_matrix();
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Vec3 d = r * cam.ray_camera(u, v);
      if (std::abs(d.z()) < 1e-12) continue;
      const double t = (table.z - o.z()) / d.z();
      if (t <= 0.0) continue;
      const Vec3 p = o + t * d;
      if (p.x() < table.min.x() || p.x() > table.max.x() || p.y() < table.min.y() || p.y() > table.max.y()) continue;
      float& px = img.at(u, v);
      if (!std::isfinite(px) || t < px) px = static_cast<float>(t);
    }
  }
}

inline void render_capsules(DepthImage& img, const Camera& cam, const std::vector<Capsule>& caps) {
  const Mat3 r = cam.pose.rotation_matrix();
  for (const auto& c : caps) {
    const PixelBox box = capsule_bounds(cam, c);
    if (box.empty()) continue;
    for (int v = box.v0; v <= box.v1; ++v)
      for (int u = box.u0; u <= box.u1; ++u) {
        const auto t = ray_capsule(c, cam.pose.position, r * cam.ray_camera(u, v));
        if (!t || *t <= 0.0) continue;
        float& px = img.at(u, v);
        if (!std::isfinite(px) || *t < px) px = static_cast<float>(*t);
      }
  }
}

inline void add_noise(DepthImage& img, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (float& d : img.data)
    if (std::isfinite(d)) d = static_cast<float>(std::max(1e-4, d + n(rng)));
}

/// Exact ray-primitive depth image of the scene; nearest surface wins.
inline DepthImage render_depth(const std::vector<RenderItem>& scene, const Camera& cam,
                               const std::optional<TablePlane>& table, const RenderOptions& opt = {},
                               const std::vector<Capsule>& arm = {}) {
  cam.k.validate();
  DepthImage img(cam.k);
  if (table && opt.draw_table) render_table(img, cam, *table);
  for (const auto& item : scene) render_item(img, cam, item);
  render_capsules(img, cam, arm);
  add_noise(img, opt.noise_sigma, opt.seed);
  return img;
}

}  // namespace ait::perception
