#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ait {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Rigid transform. The orientation is kept unit-norm by every operation here.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& p, const Quat& q) : position(p), orientation(q.normalized()) {}

  static Pose identity() { return {}; }
  static Pose translation(double x, double y, double z) { return {Vec3(x, y, z), Quat::Identity()}; }
  static Pose rotation(const Quat& q) { return {Vec3::Zero(), q}; }

  Mat3 rotation_matrix() const { return orientation.toRotationMatrix(); }
  Vec3 transform_point(const Vec3& p) const { return orientation * p + position; }
  Vec3 rotate(const Vec3& v) const { return orientation * v; }

  Eigen::Isometry3d isometry() const {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = rotation_matrix();
    t.translation() = position;
    return t;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  return {a.position + a.orientation * b.position, (a.orientation * b.orientation).normalized()};
}

inline Pose inverse(const Pose& p) {
  const Quat qi = p.orientation.conjugate();
  return {-(qi * p.position), qi};
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// |q1 . q2|, so q and -q compare as the same orientation.
inline double quat_abs_dot(const Quat& a, const Quat& b) {
  return std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
}

/// Rotation angle between two orientations in [0, pi].
inline double angular_distance(const Quat& a, const Quat& b) {
  const Quat rel = a.normalized().conjugate() * b.normalized();
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

/// Shortest-arc slerp; endpoints are returned exactly.
inline Quat slerp_shortest(const Quat& a, const Quat& b, double w) {
  if (w <= 0.0) return a.normalized();
  if (w >= 1.0) return b.normalized();
  Quat bb = b;
  if (a.dot(b) < 0.0) bb.coeffs() = -b.coeffs();
  return a.slerp(w, bb).normalized();
}

inline Pose interpolate_pose(const Pose& a, const Pose& b, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("interpolate_pose: weight outside [0,1]");
  if (w == 0.0) return a;
  if (w == 1.0) return b;
  return {(1.0 - w) * a.position + w * b.position, slerp_shortest(a.orientation, b.orientation, w)};
}

/// Rotation vector (axis * angle) of the rotation taking `from` to `to`, in world frame.
inline Vec3 rotation_error(const Quat& from, const Quat& to) {
  Quat rel = to * from.conjugate();
  if (rel.w() < 0.0) rel.coeffs() = -rel.coeffs();
  Eigen::AngleAxisd aa(rel.normalized());
  return aa.axis() * aa.angle();
}

inline Quat quat_from_rotvec(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-15) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(angle, rv / angle));
}

/// Angle between two vectors in [0, pi]; zero if either is (near) zero.
inline double angle_between(const Vec3& a, const Vec3& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  bool finite() const { return linear.allFinite() && angular.allFinite(); }
};

/// Scales each part down uniformly so its magnitude does not exceed the limit.
inline Twist clamp_twist(const Twist& t, double max_linear, double max_angular) {
  Twist out = t;
  if (!out.finite()) return Twist{};
  const double ln = out.linear.norm();
  if (ln > max_linear) out.linear *= max_linear / ln;
  const double an = out.angular.norm();
  if (an > max_angular) out.angular *= max_angular / an;
  return out;
}

struct TrajectorySample {
  double time = 0.0;
  Pose pose;
};

/// Timed pose sequence with strictly increasing timestamps.
class Trajectory {
 public:
  void push(double time, const Pose& pose) {
    if (!samples_.empty() && !(time > samples_.back().time))
      throw std::invalid_argument("Trajectory: timestamps must be strictly increasing");
    samples_.push_back({time, pose});
  }

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  const TrajectorySample& front() const { return samples_.front(); }
  const TrajectorySample& back() const { return samples_.back(); }

 private:
  std::vector<TrajectorySample> samples_;
};

/// Sum of consecutive position distances.
inline double path_length(const Trajectory& t) {
  if (t.empty()) throw std::invalid_argument("path_length: empty trajectory");
  double len = 0.0;
  const auto& s = t.samples();
  for (std::size_t i = 1; i < s.size(); ++i) len += (s[i].pose.position - s[i - 1].pose.position).norm();
  return len;
}

}  // namespace ait
