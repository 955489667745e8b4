#pragma once

#include "ait/arm/servo.hpp"
#include "ait/shapes.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace ait::arm {

/// Per-joint first-order dynamics and velocity PI loop constants.
/// Velocity loop time constant is mass / (kp + damping).
struct JointDynamics {
  double mass = 0.5;
  double damping = 0.5;
  double kp = 25.0;
  double ki = 200.0;
  double integral_cap = 0.4;     // anti-windup, rad
  double integral_leak = 0.05;   // 1/s
  double stall_drain_time = 1.5; // s, integral decay once a stalled joint is fully ramped down
  double substep = 0.001;
  bool stall_detection = true;
  bool compliance = true;
};

struct ContactConfig {
  double stiffness = 50000.0;  // N/m
  double damping = 150.0;      // N s/m
  double depth = 0.05;         // surfaces are this thick; deeper points are not in contact
};

/// Horizontal support surface (table top, fixture top).
struct SupportSurface {
  double z = 0.0;
  Eigen::Vector2d min = Eigen::Vector2d(-1.0, -1.0);
  Eigen::Vector2d max = Eigen::Vector2d(1.5, 1.0);

  bool covers(const Vec3& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
};

struct HeldObject {
  Shape shape;
  Pose grip;  // object pose in the tool frame
};

struct SimEnvironment {
  std::vector<SupportSurface> surfaces{SupportSurface{}};
  std::optional<HeldObject> held;
  std::array<bool, kJoints> blocked{};
};

struct ArmState {
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  Vec7 integral = Vec7::Zero();
  Vec7 torque = Vec7::Zero();       // applied, after stall scaling
  Vec7 torque_scale = Vec7::Ones();
  std::array<bool, kJoints> stalled{};
  Vec7 q_e = Vec7::Zero();          // compliance offset
  Vec6 wrench = Vec6::Zero();       // environment on tool: force, torque about the tool point
  double held_contact_force = 0.0;  // normal force on the held object, N
  double aperture = 1.0;
};

/// Stall bookkeeping for one substep. Joints whose integral exceeds the threshold
/// ramp their torque scale to zero; once fully ramped down the integral drains, and
/// the joint recovers when the integral falls below half the threshold.
inline void detect_stall(ArmState& s, const ServoConfig& cfg, const JointDynamics& dyn, double h) {
  for (int i = 0; i < kJoints; ++i) {
    const double mag = std::abs(s.integral[i]);
    if (!s.stalled[i] && mag > cfg.stall_integral_threshold) s.stalled[i] = true;
    if (s.stalled[i] && mag < 0.5 * cfg.stall_integral_threshold) s.stalled[i] = false;
    if (s.stalled[i]) {
      s.torque_scale[i] = std::max(0.0, s.torque_scale[i] - cfg.torque_rampdown_rate * h);
      if (s.torque_scale[i] == 0.0) s.integral[i] *= std::exp(-h / dyn.stall_drain_time);
    } else {
      s.torque_scale[i] = std::min(1.0, s.torque_scale[i] + cfg.torque_rampdown_rate * h);
    }
  }
}

struct ContactResult {
  Vec6 wrench = Vec6::Zero();
  double held_force = 0.0;
};

/// Spring-damper contact of the tool point and the held object's lowest point
/// against the support surfaces.
inline ContactResult contact_wrench(const FkResult& f, const Vec6& ee_twist, const SimEnvironment& env,
                                    const ContactConfig& cc) {
  ContactResult out;
  auto probe = [&](const Vec3& p, bool held) {
    for (const auto& s : env.surfaces) {
      if (!s.covers(p)) continue;
      const double pen = s.z - p.z();
      if (pen <= 0.0 || pen > cc.depth) continue;
      const Vec3 r = p - f.ee.position;
      const Vec3 v = ee_twist.head<3>() + ee_twist.tail<3>().cross(r);
      const double fz = std::max(0.0, cc.stiffness * pen - cc.damping * v.z());
      const Vec3 force(0.0, 0.0, fz);
      out.wrench.head<3>() += force;
      out.wrench.tail<3>() += r.cross(force);
      if (held) out.held_force += fz;
    }
  };
  probe(f.ee.position, false);
  if (env.held) {
    const Pose obj = compose(f.ee, env.held->grip);
    const double low = lowest_point_z(env.held->shape, obj);
    probe(Vec3(obj.position.x(), obj.position.y(), low), true);
  }
  return out;
}

/// Advances the arm by dt with the joint-velocity command held constant.
inline ArmState simulate_step(const ArmModel& m, const ArmState& in, const Vec7& qd_cmd, const SimEnvironment& env,
                              double dt, const ServoConfig& cfg, const JointDynamics& dyn,
                              const ContactConfig& cc = {}) {
  if (!(dt > 0.0 && dt <= 0.05)) throw ContractViolation("simulate_step: dt must lie in (0, 0.05]");
  ArmState s = in;
  const int n = std::max(1, static_cast<int>(std::ceil(dt / dyn.substep - 1e-9)));
  const double h = dt / n;
  for (int k = 0; k < n; ++k) {
    const FkResult f = fk_full(m, s.q);
    const Mat67 j = jacobian(m, f);
    const ContactResult c = contact_wrench(f, j * s.qd, env, cc);
    s.wrench = c.wrench;
    s.held_contact_force = c.held_force;
    s.q_e = dyn.compliance ? compliance_offset(j, s.wrench, cfg.compliance_gain) : Vec7::Zero();
    const Vec7 ext = j.transpose() * s.wrench;

    const Vec7 err = qd_cmd - s.qd;
    for (int i = 0; i < kJoints; ++i) {
      if (!(dyn.stall_detection && s.stalled[i] && s.torque_scale[i] == 0.0))
        s.integral[i] += h * (err[i] - dyn.integral_leak * s.integral[i]);
      s.integral[i] = std::clamp(s.integral[i], -dyn.integral_cap, dyn.integral_cap);
    }
    if (dyn.stall_detection) detect_stall(s, cfg, dyn, h);

    const Vec7 tau_cmd = dyn.kp * err + dyn.ki * (s.integral + s.q_e);
    s.torque = s.torque_scale.cwiseProduct(tau_cmd);
    for (int i = 0; i < kJoints; ++i) {
      if (env.blocked[i]) {
        s.qd[i] = 0.0;
        continue;
      }
      s.qd[i] += h * (s.torque[i] + ext[i] - dyn.damping * s.qd[i]) / dyn.mass;
      s.q[i] += h * s.qd[i];
      if (s.q[i] < m.q_min[i] || s.q[i] > m.q_max[i]) {
        s.q[i] = std::clamp(s.q[i], m.q_min[i], m.q_max[i]);
        s.qd[i] = 0.0;
      }
    }
  }
  return s;
}

/// Kinetic energy analogue sum m qd^2 / 2.
inline double kinetic_energy(const ArmState& s, const JointDynamics& dyn) { return 0.5 * dyn.mass * s.qd.squaredNorm(); }

/// Kinetic energy plus the energy stored in the integral term.
inline double controller_energy(const ArmState& s, const JointDynamics& dyn) {
  return kinetic_energy(s, dyn) + 0.5 * dyn.ki * s.integral.squaredNorm();
}

}  // namespace ait::arm
