#pragma once

#include "ait/arm/kinematics.hpp"
#include "ait/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace ait::arm {

struct ServoConfig {
  double gain = 50.0;              // 1/s on the pose error twist
  double max_linear_speed = 0.35;  // m/s clamp on the error twist
  double max_angular_speed = 1.5;  // rad/s
  double damping = 0.05;           // lambda of damped least squares
  double nullspace_gain = 0.5;
  double elbow_clearance = 0.15;   // metres above the table
  double elbow_penalty_gain = 200.0;
  double table_z = 0.0;
  Vec7 preferred = (Vec7() << 0.0, 0.45, 0.0, 2.0, 0.0, 0.7, 0.0).finished();
  Vec3 workspace_min = Vec3(-0.2, -0.75, 0.0);
  Vec3 workspace_max = Vec3(1.0, 0.75, 0.9);
  double compliance_gain = 0.01;   // rad per N*m
  double stall_integral_threshold = 0.2;
  double torque_rampdown_rate = 2.0;  // torque scale per second

  void validate() const {
    if (!(damping > 0.0)) throw ValidationError("servo", "damping must be positive");
    if (!(elbow_clearance > 0.0)) throw ValidationError("servo", "elbow_clearance must be positive");
    if (!(gain > 0.0)) throw ValidationError("servo", "gain must be positive");
    if (!((workspace_max - workspace_min).array() > 0.0).all())
      throw ValidationError("servo", "workspace box is degenerate");
    if (!(stall_integral_threshold > 0.0)) throw ValidationError("servo", "stall_integral_threshold must be positive");
    if (!(torque_rampdown_rate > 0.0)) throw ValidationError("servo", "torque_rampdown_rate must be positive");
  }
};

inline Vec3 clamp_to_workspace(const Vec3& p, const ServoConfig& cfg) {
  return p.cwiseMax(cfg.workspace_min).cwiseMin(cfg.workspace_max);
}

/// Error twist from the current pose to the desired pose, before gain.
inline Vec6 pose_error(const Pose& current, const Pose& desired) {
  Vec6 e;
  e.head<3>() = desired.position - current.position;
  e.tail<3>() = rotation_error(current.orientation, desired.orientation);
  return e;
}

/// Minimizer of |J qd - e|^2 + lambda^2 |qd|^2.
inline Vec7 damped_least_squares(const Mat67& j, const Vec6& e, double lambda) {
  const Eigen::Matrix<double, 6, 6> jjt = j * j.transpose() + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
  return j.transpose() * jjt.ldlt().solve(e);
}

inline Eigen::Matrix<double, 7, 6> pseudo_inverse(const Mat67& j) {
  Eigen::JacobiSVD<Mat67> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double tol = 1e-10 * std::max(1.0, s(0));
  Eigen::Matrix<double, 7, 6> sinv = Eigen::Matrix<double, 7, 6>::Zero();
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol) sinv(i, i) = 1.0 / s(i);
  return svd.matrixV() * sinv * svd.matrixU().transpose();
}

inline Mat7 nullspace_projector(const Mat67& j) { return Mat7::Identity() - pseudo_inverse(j) * j; }

/// Secondary objective: posture bias plus a quadratic hinge on elbow height.
inline double posture_cost(const ArmModel& m, const FkResult& f, const Vec7& q, const ServoConfig& cfg) {
  (void)m;
  const double gap = std::max(0.0, cfg.elbow_clearance - (f.elbow().z() - cfg.table_z));
  return cfg.nullspace_gain * (q - cfg.preferred).squaredNorm() + cfg.elbow_penalty_gain * gap * gap;
}

/// Gradient of posture_cost. The elbow term only acts on joints 1 to 4.
inline Vec7 posture_gradient(const ArmModel& m, const FkResult& f, const Vec7& q, const ServoConfig& cfg) {
  Vec7 g = 2.0 * cfg.nullspace_gain * (q - cfg.preferred);
  const double gap = std::max(0.0, cfg.elbow_clearance - (f.elbow().z() - cfg.table_z));
  if (gap > 0.0) {
    const Vec7 dz = elbow_jacobian(m, f).row(2).transpose();
    Vec7 elbow = -2.0 * cfg.elbow_penalty_gain * gap * dz;
    elbow.tail<3>().setZero();
    g += elbow;
  }
  return g;
}

struct ServoOutput {
  Vec7 qd = Vec7::Zero();
  Vec7 primary = Vec7::Zero();
  Vec7 secondary = Vec7::Zero();
  Vec6 error = Vec6::Zero();  // gained and clamped
};

inline Vec7 scale_to_limits(const Vec7& qd, const Vec7& qd_max) {
  double s = 1.0;
  for (int i = 0; i < kJoints; ++i)
    if (std::abs(qd[i]) > qd_max[i]) s = std::min(s, qd_max[i] / std::abs(qd[i]));
  return qd * s;
}

/// Joint velocities that move the tool towards `desired`.
inline ServoOutput servo_step(const ArmModel& m, const Vec7& q, const Pose& desired, const ServoConfig& cfg) {
  if (!desired.position.allFinite() || !desired.orientation.coeffs().allFinite())
    throw ContractViolation("servo_step: desired pose not finite");
  const FkResult f = fk_full(m, q);
  Pose target = desired;
  target.position = clamp_to_workspace(desired.position, cfg);
  Vec6 e = cfg.gain * pose_error(f.ee, target);
  const double lin = e.head<3>().norm(), ang = e.tail<3>().norm();
  if (lin > cfg.max_linear_speed) e.head<3>() *= cfg.max_linear_speed / lin;
  if (ang > cfg.max_angular_speed) e.tail<3>() *= cfg.max_angular_speed / ang;
  const Mat67 j = jacobian(m, f);
  ServoOutput out;
  out.error = e;
  out.primary = damped_least_squares(j, e, cfg.damping);
  out.secondary = nullspace_projector(j) * (-posture_gradient(m, f, q, cfg));
  out.qd = scale_to_limits(out.primary + out.secondary, m.qd_max);
  return out;
}

/// q_e = K J^T F_e. F_e is the wrench the environment applies at the tool.
inline Vec7 compliance_offset(const Mat67& j, const Vec6& f_e, double k) { return k * j.transpose() * f_e; }

/// Kinematic feasibility: iterate the servo from `seed` and report whether the
/// tool reaches `target` within tolerance.
struct IkResult {
  bool converged = false;
  Vec7 q = Vec7::Zero();
  double position_error = 0.0;
  double orientation_error = 0.0;
};

inline IkResult solve_ik(const ArmModel& m, const Pose& target, const Vec7& seed, const ServoConfig& cfg,
                         int max_iters = 300, double pos_tol = 0.005, double rot_tol = deg2rad(3.0)) {
  ServoConfig c = cfg;
  c.max_linear_speed = 1.0;
  c.max_angular_speed = 3.0;
  c.gain = 10.0;
  const double dt = 0.05;
  IkResult r;
  r.q = seed;
  for (int it = 0; it < max_iters; ++it) {
    const Pose ee = fk(m, r.q);
    r.position_error = (ee.position - target.position).norm();
    r.orientation_error = angular_distance(ee.orientation, target.orientation);
    if (r.position_error <= pos_tol && r.orientation_error <= rot_tol) {
      r.converged = true;
      return r;
    }
    r.q = clamp_to_limits(m, r.q + dt * servo_step(m, r.q, target, c).qd);
  }
  return r;
}

}  // namespace ait::arm
