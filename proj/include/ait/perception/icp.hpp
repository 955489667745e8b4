#pragma once

#include "ait/geometry.hpp"
#include "ait/shapes.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <vector>

namespace ait::perception {

struct IcpConfig {
  int max_iters = 40;
  double tolerance = 1e-7;          // stop when the residual improves by less than this (m)
  double planar_thickness = 0.004;  // point sets thinner than this are planar
};

struct IcpResult {
  Pose pose;
  double residual = 0.0;  // RMS point-to-surface distance, m
  int iterations = 0;
  bool diverged = false;
  bool under_constrained = false;
  std::vector<double> history;  // residual before each alignment step, then the final one
};

inline double surface_rms(const std::vector<Vec3>& pts, const Shape& shape, const Pose& pose) {
  const Pose inv = inverse(pose);
  double s = 0.0;
  for (const auto& p : pts) {
    const Vec3 local = inv.transform_point(p);
    s += (closest_surface_point(shape, local) - local).squaredNorm();
  }
  return std::sqrt(s / static_cast<double>(pts.size()));
}

/// Rigid transform T minimizing sum |T a_i - b_i|^2.
inline Pose kabsch(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) h += (a[i] - ca) * (b[i] - cb).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return {cb - r * ca, Quat(r)};
}

/// True when the points lie (nearly) in a plane, leaving in-plane motion unobservable.
inline bool planar_point_set(const std::vector<Vec3>& pts, double thickness) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  return std::sqrt(std::max(0.0, es.eigenvalues()[0])) < thickness;
}

/// Point-to-closest-surface-point ICP against a primitive.
inline IcpResult icp_refine(const std::vector<Vec3>& pts, const Shape& shape, const Pose& init, const IcpConfig& cfg = {}) {
  if (pts.size() < 10) throw std::invalid_argument("icp_refine: need at least 10 points");
  IcpResult res;
  res.under_constrained = planar_point_set(pts, cfg.planar_thickness);
  Pose pose = init;
  Pose best = init;
  double best_res = surface_rms(pts, shape, init);
  res.history.push_back(best_res);
  std::vector<Vec3> model(pts.size());
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Pose inv = inverse(pose);
    for (std::size_t i = 0; i < pts.size(); ++i) model[i] = closest_surface_point(shape, inv.transform_point(pts[i]));
    pose = kabsch(model, pts);
    const double r = surface_rms(pts, shape, pose);
    res.history.push_back(r);
    res.iterations = it + 1;
    if (r > best_res + 1e-12) {
      res.diverged = true;
      break;
    }
    const double gain = best_res - r;
    best_res = r;
    best = pose;
    if (gain < cfg.tolerance) break;
  }
  res.pose = best;
  res.residual = best_res;
  return res;
}

}  // namespace ait::perception
