#pragma once

#include "ait/geometry.hpp"

#include <array>
#include <cmath>

namespace ait::arm {

inline constexpr int kJoints = 7;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat67 = Eigen::Matrix<double, 6, 7>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

/// Standard Denavit-Hartenberg row: T = Rz(theta) Tz(d) Tx(a) Rx(alpha).
struct DhRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

/// Seven-joint anthropomorphic chain with WAM-like link lengths.
struct ArmModel {
  std::array<DhRow, kJoints> dh{{
      {0.0, -kPi / 2, 0.0, 0.0},
      {0.0, kPi / 2, 0.0, 0.0},
      {0.045, -kPi / 2, 0.55, 0.0},
      {-0.045, kPi / 2, 0.0, 0.0},
      {0.0, -kPi / 2, 0.3, 0.0},
      {0.0, kPi / 2, 0.0, 0.0},
      {0.0, 0.0, 0.06, 0.0},
  }};
  Pose base = Pose::translation(0.0, 0.0, 0.35);
  double tool_length = 0.15;  // flange to tool centre point along flange z
  Vec7 q_min = (Vec7() << -2.6, -2.0, -2.8, -0.9, -4.76, -1.6, -3.0).finished();
  Vec7 q_max = (Vec7() << 2.6, 2.0, 2.8, 3.1, 1.24, 1.6, 3.0).finished();
  Vec7 qd_max = Vec7::Constant(2.0);
  int elbow_frame = 3;  // index into FkResult::origins
};

struct FkResult {
  Pose ee;
  std::array<Vec3, kJoints + 1> origins;  // frame origins 0..7 in world
  std::array<Vec3, kJoints> axes;         // joint i rotates about axes[i] through origins[i]
  Vec3 elbow() const { return origins[3]; }
};

inline Eigen::Isometry3d dh_transform(const DhRow& r, double q) {
  const double th = q + r.theta_offset;
  const double ct = std::cos(th), st = std::sin(th), ca = std::cos(r.alpha), sa = std::sin(r.alpha);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, r.a * ct,
       st, ct * ca, -ct * sa, r.a * st,
       0.0, sa, ca, r.d,
       0.0, 0.0, 0.0, 1.0;
  return Eigen::Isometry3d(m);
}

inline FkResult fk_full(const ArmModel& m, const Vec7& q) {
  FkResult out;
  Eigen::Isometry3d t = m.base.isometry();
  for (int i = 0; i < kJoints; ++i) {
    out.origins[i] = t.translation();
    out.axes[i] = t.linear().col(2);
    t = t * dh_transform(m.dh[i], q[i]);
  }
  out.origins[kJoints] = t.translation();
  t = t * Eigen::Translation3d(0.0, 0.0, m.tool_length);
  out.ee = Pose(t.translation(), Quat(t.linear()));
  return out;
}

inline Pose fk(const ArmModel& m, const Vec7& q) { return fk_full(m, q).ee; }

inline Vec3 elbow_position(const ArmModel& m, const Vec7& q) { return fk_full(m, q).elbow(); }

/// Geometric Jacobian at the tool centre point; rows are (linear, angular).
inline Mat67 jacobian(const ArmModel& m, const FkResult& f) {
  Mat67 j;
  for (int i = 0; i < kJoints; ++i) {
    j.block<3, 1>(0, i) = f.axes[i].cross(f.ee.position - f.origins[i]);
    j.block<3, 1>(3, i) = f.axes[i];
  }
  (void)m;
  return j;
}

inline Mat67 jacobian(const ArmModel& m, const Vec7& q) { return jacobian(m, fk_full(m, q)); }

/// Jacobian of the elbow point's position (only joints before the elbow contribute).
inline Eigen::Matrix<double, 3, 7> elbow_jacobian(const ArmModel& m, const FkResult& f) {
  Eigen::Matrix<double, 3, 7> j = Eigen::Matrix<double, 3, 7>::Zero();
  const Vec3 p = f.origins[m.elbow_frame];
  for (int i = 0; i < m.elbow_frame; ++i) j.col(i) = f.axes[i].cross(p - f.origins[i]);
  return j;
}

inline Vec7 clamp_to_limits(const ArmModel& m, const Vec7& q) { return q.cwiseMax(m.q_min).cwiseMin(m.q_max); }

}  // namespace ait::arm
