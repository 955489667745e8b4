#pragma once

#include "ait/arbitration.hpp"
#include "ait/errors.hpp"
#include "ait/model_library.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace ait {

/// Affordance parameters brought into the world frame by the owning object's pose.
inline Affordance affordance_in_world(const Affordance& a, const Pose& object_pose) {
  Affordance w = a;
  switch (a.kind) {
    case AffordanceKind::door_hinge:
      w.hinge.axis_point = object_pose.transform_point(a.hinge.axis_point);
      w.hinge.axis_dir = object_pose.rotate(a.hinge.axis_dir).normalized();
      break;
    case AffordanceKind::pour_target:
      w.pour.pour_pose = compose(object_pose, a.pour.pour_pose);
      w.pour.rotation_axis = object_pose.rotate(a.pour.rotation_axis).normalized();
      w.pour.command_axis = object_pose.rotate(a.pour.command_axis).normalized();
      break;
    case AffordanceKind::release_zone:
      break;  // zone stays in the object frame; see in_release_zone
  }
  return w;
}

inline bool in_release_zone(const Vec3& p_world, const ReleaseZone& zone, const Pose& object_pose) {
  const Vec3 local = inverse(object_pose).transform_point(p_world);
  return (local.array() >= zone.min.array()).all() && (local.array() <= zone.max.array()).all();
}

// ---------------------------------------------------------------------------
// Door

/// Signed hinge angle of `point` relative to the closed reference direction.
inline double hinge_angle(const Vec3& point, const Vec3& closed_point, const DoorHinge& h) {
  auto radial = [&](const Vec3& p) {
    Vec3 r = p - h.axis_point;
    return Vec3(r - r.dot(h.axis_dir) * h.axis_dir);
  };
  const Vec3 r0 = radial(closed_point), r = radial(point);
  return std::atan2(r0.cross(r).dot(h.axis_dir), r0.dot(r));
}

/// Unit tangent of the hinge circle at `point` (direction of increasing angle).
inline Vec3 hinge_tangent(const Vec3& point, const DoorHinge& h) {
  Vec3 r = point - h.axis_point;
  r -= r.dot(h.axis_dir) * h.axis_dir;
  const double n = r.norm();
  if (n < 1e-12) return Vec3::Zero();
  return h.axis_dir.cross(r / n);
}

/// Projects a translational velocity onto the arc of the door swing. Motion
/// past either end of the swing range is removed.
inline Vec3 project_on_hinge_arc(const Vec3& v, const Vec3& handle_point, double current_angle, const DoorHinge& h) {
  const Vec3 tangent = hinge_tangent(handle_point, h);
  const double along = v.dot(tangent);
  if ((current_angle >= h.swing_max && along > 0.0) || (current_angle <= h.swing_min && along < 0.0)) return Vec3::Zero();
  return along * tangent;
}

/// Position on the hinge circle at `angle`, given the handle's closed position.
inline Vec3 hinge_point_at(double angle, const Vec3& closed_point, const DoorHinge& h) {
  const Vec3 rel = closed_point - h.axis_point;
  const Eigen::AngleAxisd rot(angle, h.axis_dir);
  return h.axis_point + rot * rel;
}

// ---------------------------------------------------------------------------
// Affordance-constrained commands

struct AffordanceState {
  bool engaged = false;
  bool holding = false;
  // door
  Vec3 closed_handle_point = Vec3::Zero();
  double door_angle = 0.0;
  double handle_turn = 0.0;   // current automatic lever rotation
  bool unlatched = false;
  // pour
  double tilt = 0.0;
  bool departing = false;
  double pour_time = 0.0;
  bool poured = false;
  std::optional<double> measured_tilt;  // tool tilt actually reached, when known
};

inline constexpr double kTiltLead = 0.15;       // rad the command may run ahead of the measured tilt
inline constexpr double kUprightTolerance = 0.05;  // rad

struct ConstrainedCommand {
  Vec3 linear = Vec3::Zero();
  double tilt_rate = 0.0;        // pour only
  double handle_turn_rate = 0.0; // door only
  bool translation_released = true;
};

/// Maps the user's command through an engaged affordance and advances its state.
/// door_hinge: the lever is turned automatically first, then translation is
/// projected onto the swing arc. pour_target: translation along the command axis
/// becomes tilt rate; a departure command first tilts back upright, then
/// releases translation.
inline ConstrainedCommand project_affordance(const UserCommand& cmd, const Affordance& active, AffordanceState& st,
                                             double dt, double speed_limit) {
  if (!st.engaged) throw ContractViolation("project_affordance: affordance not engaged");
  if (!st.holding) throw ContractViolation("project_affordance: engaged affordance without an active grasp");
  ConstrainedCommand out;
  const Vec3 v = clamp_twist(cmd.v_u, speed_limit, kPi).linear;
  switch (active.kind) {
    case AffordanceKind::door_hinge: {
      const auto& h = active.hinge;
      if (!st.unlatched) {
        out.translation_released = false;
        out.handle_turn_rate = h.handle_turn_angle / h.handle_turn_time;
        st.handle_turn = std::min(h.handle_turn_angle, st.handle_turn + out.handle_turn_rate * dt);
        if (st.handle_turn >= h.handle_turn_angle - 1e-12) st.unlatched = true;
        return out;
      }
      const Vec3 handle = hinge_point_at(st.door_angle, st.closed_handle_point, h);
      out.linear = project_on_hinge_arc(v, handle, st.door_angle, h);
      Vec3 radial = handle - h.axis_point;
      radial -= radial.dot(h.axis_dir) * h.axis_dir;
      const double r = std::max(radial.norm(), 1e-6);
      const double d_angle = out.linear.dot(hinge_tangent(handle, h)) / r * dt;
      st.door_angle = std::clamp(st.door_angle + d_angle, h.swing_min, h.swing_max);
      return out;
    }
    case AffordanceKind::pour_target: {
      const auto& p = active.pour;
      const double along = v.dot(p.command_axis);
      const Vec3 other = v - along * p.command_axis;
      const double min_speed = 0.2 * speed_limit;
      if (!st.departing && other.norm() > std::abs(along) && other.norm() > min_speed) st.departing = true;
      if (st.departing) {
        if (st.tilt > 0.0 || st.measured_tilt.value_or(0.0) > kUprightTolerance) {
          out.translation_released = false;
          out.tilt_rate = -p.upright_rate;
          st.tilt = std::max(0.0, st.tilt - p.upright_rate * dt);
          return out;
        }
        out.linear = v;
        out.translation_released = true;
        st.engaged = false;
        st.departing = false;
        return out;
      }
      out.translation_released = false;
      out.tilt_rate = p.pour_gain * along;
      const double ceiling = st.measured_tilt ? std::min(p.max_tilt, *st.measured_tilt + kTiltLead) : p.max_tilt;
      st.tilt = std::clamp(st.tilt + out.tilt_rate * dt, 0.0, std::max(ceiling, std::min(st.tilt, p.max_tilt)));
      if (std::min(st.tilt, st.measured_tilt.value_or(st.tilt)) >= p.pour_tilt) st.pour_time += dt;
      return out;
    }
    case AffordanceKind::release_zone:
      out.linear = v;
      return out;
  }
  return out;
}

}  // namespace ait
