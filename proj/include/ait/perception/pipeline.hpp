#pragma once

#include "ait/perception/render.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace ait::perception {

class PerceptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Support plane removal

struct PlaneConfig {
  int iterations = 200;      // upper bound; stops early once the confidence below is reached
  int min_iterations = 20;
  double confidence = 0.999;
  double inlier_threshold = 0.01;
  double min_inlier_ratio = 0.1;
  std::size_t max_scoring_points = 4000;
  std::uint64_t seed = 7;
};

struct PlaneResult {
  bool found = false;
  Eigen::Vector4d plane = Eigen::Vector4d::Zero();  // n.x + d = 0 with |n| = 1
  double inlier_ratio = 0.0;
  std::size_t removed = 0;
  DepthImage image;
};

/// Least-squares plane through the points (smallest principal direction).
inline Eigen::Vector4d fit_plane(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  Vec3 n = es.eigenvectors().col(0).normalized();
  if (n.z() < 0.0 || (n.z() == 0.0 && n.y() < 0.0)) n = -n;
  Eigen::Vector4d out;
  out << n, -n.dot(mean);
  return out;
}

inline double plane_distance(const Eigen::Vector4d& pl, const Vec3& p) { return std::abs(pl.head<3>().dot(p) + pl[3]); }

/// RANSAC plane in camera coordinates; inliers are marked no-return.
inline PlaneResult remove_plane(const DepthImage& img, const PlaneConfig& cfg) {
  const Camera cam{Pose::identity(), img.k};
  std::vector<int> idx;
  std::vector<Vec3> pts;
  idx.reserve(img.data.size());
  pts.reserve(img.data.size());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const int i = v * img.width() + u;
      const float d = img.data[static_cast<std::size_t>(i)];
      if (!std::isfinite(d)) continue;
      idx.push_back(i);
      pts.push_back(cam.ray_camera(u, v) * d);
    }
  if (pts.size() < 3) throw PerceptionError("remove_plane: fewer than 3 valid pixels");

  const std::size_t stride = std::max<std::size_t>(1, pts.size() / cfg.max_scoring_points);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  Eigen::Vector4d best = Eigen::Vector4d::Zero();
  std::size_t best_count = 0;
  const std::size_t scored = (pts.size() + stride - 1) / stride;
  int needed = cfg.iterations;
  for (int it = 0; it < std::min(needed, cfg.iterations); ++it) {
    const Vec3& a = pts[pick(rng)];
    const Vec3& b = pts[pick(rng)];
    const Vec3& c = pts[pick(rng)];
    Vec3 n = (b - a).cross(c - a);
    if (n.norm() < 1e-12) continue;
    n.normalize();
    Eigen::Vector4d pl;
    pl << n, -n.dot(a);
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); i += stride) count += plane_distance(pl, pts[i]) <= cfg.inlier_threshold;
    if (count > best_count) {
      best_count = count;
      best = pl;
      // iterations for `confidence` of drawing an all-inlier triple at this inlier ratio
      const double w = static_cast<double>(count) / static_cast<double>(scored);
      const double miss = 1.0 - w * w * w;
      if (miss <= 0.0) needed = cfg.min_iterations;
      else needed = std::max(cfg.min_iterations, static_cast<int>(std::ceil(std::log(1.0 - cfg.confidence) / std::log(miss))));
    }
  }

  PlaneResult res;
  res.image = img;
  if (best_count == 0) return res;
  // refit on inliers, then reclassify every pixel
  std::vector<Vec3> inliers;
  for (std::size_t i = 0; i < pts.size(); i += stride)
    if (plane_distance(best, pts[i]) <= cfg.inlier_threshold) inliers.push_back(pts[i]);
  if (inliers.size() >= 3) best = fit_plane(inliers);
  std::size_t removed = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) removed += plane_distance(best, pts[i]) <= cfg.inlier_threshold;
  res.inlier_ratio = static_cast<double>(removed) / static_cast<double>(pts.size());
  res.plane = best;
  if (res.inlier_ratio < cfg.min_inlier_ratio) return res;
  res.found = true;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (plane_distance(best, pts[i]) <= cfg.inlier_threshold) res.image.data[idx[i]] = kNoReturn;
  res.removed = removed;
  return res;
}

// ---------------------------------------------------------------------------
// Masking of known geometry (arm links)

/// Pixels whose ray meets any capsule.
inline std::vector<std::uint8_t> capsule_silhouette(const Camera& cam, const std::vector<Capsule>& caps) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cam.k.width) * cam.k.height, 0);
  const Mat3 r = cam.pose.rotation_matrix();
  for (const auto& c : caps) {
    const PixelBox box = capsule_bounds(cam, c);
    if (box.empty()) continue;
    for (int v = box.v0; v <= box.v1; ++v)
      for (int u = box.u0; u <= box.u1; ++u)
        if (ray_capsule(c, cam.pose.position, r * cam.ray_camera(u, v)))
          mask[static_cast<std::size_t>(v) * cam.k.width + u] = 1;
  }
  return mask;
}

inline std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& mask, int w, int h, int radius) {
  if (radius <= 0) return mask;
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!mask[static_cast<std::size_t>(v) * w + u]) continue;
      for (int dv = -radius; dv <= radius; ++dv)
        for (int du = -radius; du <= radius; ++du) {
          if (du * du + dv * dv > radius * radius) continue;
          const int uu = u + du, vv = v + dv;
          if (uu >= 0 && uu < w && vv >= 0 && vv < h) out[static_cast<std::size_t>(vv) * w + uu] = 1;
        }
    }
  return out;
}

inline DepthImage apply_mask(const DepthImage& img, const std::vector<std::uint8_t>& mask) {
  DepthImage out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (mask[i]) out.data[i] = kNoReturn;
  return out;
}

/// Removes pixels within `dilation_px` of the arm's capsule silhouette.
inline DepthImage mask_arm(const DepthImage& img, const arm::ArmModel& model, const arm::Vec7& q, const Camera& cam,
                           int dilation_px = 3) {
  const auto sil = capsule_silhouette(cam, arm_capsules(model, q));
  return apply_mask(img, dilate(sil, img.width(), img.height(), dilation_px));
}

/// Removes pixels explained by known scenery: `known` holds the depth of the
/// known geometry alone, rendered with the same camera.
inline DepthImage mask_known(const DepthImage& img, const DepthImage& known, double tolerance = 0.005, int dilation_px = 1) {
  std::vector<std::uint8_t> hit(img.data.size(), 0);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    if (std::isfinite(known.data[i]) && std::isfinite(img.data[i]) && std::abs(img.data[i] - known.data[i]) < tolerance)
      hit[i] = 1;
  return apply_mask(img, dilate(hit, img.width(), img.height(), dilation_px));
}

// ---------------------------------------------------------------------------
// Segmentation

struct Region {
  std::vector<int> pixels;  // linear indices, raster order of discovery
};

struct SegmentConfig {
  double jump_threshold = 0.02;
  std::size_t min_pixels = 30;
};

/// 8-connected components of valid pixels; neighbours join when their depths
/// differ by less than the jump threshold.
inline std::vector<Region> segment(const DepthImage& img, const SegmentConfig& cfg) {
  const int w = img.width(), h = img.height();
  std::vector<int> label(img.data.size(), -1);
  std::vector<Region> out;
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < w * h; ++start) {
    if (label[start] >= 0 || !std::isfinite(img.data[start])) continue;
    Region r;
    label[start] = next;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      r.pixels.push_back(p);
      const int u = p % w, v = p / w;
      const float d = img.data[p];
      for (int dv = -1; dv <= 1; ++dv)
        for (int du = -1; du <= 1; ++du) {
          const int uu = u + du, vv = v + dv;
          if ((du == 0 && dv == 0) || uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
          const int q = vv * w + uu;
          if (label[q] >= 0 || !std::isfinite(img.data[q])) continue;
          if (std::abs(img.data[q] - d) >= cfg.jump_threshold) continue;
          label[q] = next;
          stack.push_back(q);
        }
    }
    ++next;
    if (r.pixels.size() >= cfg.min_pixels) {
      std::sort(r.pixels.begin(), r.pixels.end());
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::vector<Vec3> region_points(const DepthImage& img, const Region& r, const Camera& cam) {
  std::vector<Vec3> pts;
  pts.reserve(r.pixels.size());
  for (int p : r.pixels) pts.push_back(cam.back_project(p % img.width(), p / img.width(), img.data[p]));
  return pts;
}

}  // namespace ait::perception
