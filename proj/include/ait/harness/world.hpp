#pragma once

#include "ait/affordance.hpp"
#include "ait/arm/sim.hpp"
#include "ait/harness/scenario.hpp"
#include "ait/intent.hpp"
#include "ait/perception/render.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ait::harness {

struct WorldObject {
  std::string instance_id;
  std::string model_id;
  const ObjectModel* model = nullptr;
  Pose pose;
  Pose start_pose;
};

struct WorldEvent {
  std::string name;
  std::string detail;
};

struct Attachment {
  std::string instance_id;
  Pose grip;                  // object pose in the tool frame
  Quat tool_orientation;      // tool orientation when grasped
};

/// Outcome bookkeeping shared by every task.
struct TaskStatus {
  bool finished = false;
  bool success = false;
  std::string reason;
  std::optional<double> completion_time;
  std::optional<double> first_grasp_time;
  int drops = 0;
  int transfers = 0;
  std::string first_lifted;     // first object raised past the lift height
  bool poured = false;
  bool upright = false;
  double tilted_translation = 0.0;  // tool travel while the container was tilted
};

/// Yaw of an orientation about world z.
inline double yaw_of(const Quat& q) {
  const Vec3 x = q * Vec3::UnitX();
  return std::atan2(x.y(), x.x());
}

inline Quat yaw_quat(double yaw) { return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

/// Scene truth: object poses, the grip, door and pour state, task outcome.
class World {
 public:
  World(const Scenario& s, std::uint64_t seed) : s_(&s) {
    for (const auto& p : s.objects) {
      WorldObject o{p.instance_id, p.model_id, &s.library.get(p.model_id), p.pose, p.pose};
      objects_.push_back(o);
    }
    target_ = s.target;
    jitter_placements(seed);
    if (s.pair_layout) place_pair(*s.pair_layout, seed);
    for (auto& o : objects_) o.start_pose = o.pose;
    if (s.task == Task::door_open) {
      const auto* door = find(s.target);
      door_ = affordance_in_world(*door->model->find_affordance(AffordanceKind::door_hinge), door->pose);
      aff_.closed_handle_point = door->pose.position;
    }
    if (s.task == Task::pour) {
      const auto* bowl = find(s.pour_object);
      pour_ = affordance_in_world(*bowl->model->find_affordance(AffordanceKind::pour_target), bowl->pose);
    }
  }

  const Scenario& scenario() const { return *s_; }
  const std::vector<WorldObject>& objects() const { return objects_; }
  const std::string& target() const { return target_; }
  const std::optional<Attachment>& held() const { return held_; }
  const TaskStatus& status() const { return status_; }
  TaskStatus& status() { return status_; }
  AffordanceState& affordance() { return aff_; }
  const AffordanceState& affordance() const { return aff_; }
  const std::optional<Affordance>& door() const { return door_; }
  const std::optional<Affordance>& pour() const { return pour_; }

  const WorldObject* find(const std::string& id) const {
    for (const auto& o : objects_)
      if (o.instance_id == id) return &o;
    return nullptr;
  }

  bool holding(const std::string& id) const { return held_ && held_->instance_id == id; }

  static bool grippable(const WorldObject& o) { return o.model->graspable && !o.model->grasps.empty(); }

  /// Support surfaces the arm and carried object can touch.
  arm::SimEnvironment sim_environment() const {
    arm::SimEnvironment env;
    const perception::TablePlane table;
    env.surfaces = {arm::SupportSurface{table.z, table.min, table.max}};
    for (const auto& o : objects_)
      if (o.model->fixture && std::holds_alternative<BoxShape>(o.model->shape) && !o.model->graspable)
        env.surfaces.push_back(top_surface(o));
    if (held_) env.held = arm::HeldObject{find(held_->instance_id)->model->shape, held_->grip};
    return env;
  }

  /// Render list for the depth camera; fixtures are flagged through their tag.
  std::vector<perception::RenderItem> render_items(bool fixtures, bool movable) const {
    std::vector<perception::RenderItem> out;
    for (const auto& o : objects_) {
      if (holding(o.instance_id)) continue;
      if (o.model->fixture ? fixtures : movable) out.push_back({o.model->shape, o.pose, o.instance_id});
    }
    return out;
  }

  /// Tool position at which the designated object is grasped (nearest grasp in yaw).
  Vec3 grasp_point(const std::string& id, const Pose& ee) const {
    const auto* o = find(id);
    const auto gs = grasps_for(s_->library, o->model_id, o->pose);
    const GraspSpec* best = &gs.front();
    for (const auto& g : gs)
      if (quat_abs_dot(g.goal_pose.orientation, ee.orientation) > quat_abs_dot(best->goal_pose.orientation, ee.orientation))
        best = &g;
    return best->goal_pose.position;
  }

  /// Tool position that sets the held object down `release_height` above the zone surface.
  std::optional<Vec3> release_point(const Pose& ee) const {
    if (s_->release_object.empty()) return std::nullopt;
    const auto* fx = find(s_->release_object);
    const auto& zone = fx->model->find_affordance(AffordanceKind::release_zone)->zone;
    const Vec3 centre = fx->pose.transform_point(0.5 * (zone.min + zone.max));
    const double top = top_surface(*fx).z;
    // offset between tool point and carried object
    Vec3 obj_offset(0, 0, -0.05);
    double below = 0.05;
    if (held_) {
      const auto* h = find(held_->instance_id);
      const Pose obj = compose(ee, held_->grip);
      obj_offset = obj.position - ee.position;
      below = ee.position.z() - lowest_point_z(h->model->shape, obj);
    } else {
      const auto* t = find(target_);
      below = resting_half_height(t->model->shape);
      obj_offset = Vec3(0, 0, -below);
    }
    return Vec3(centre.x() - obj_offset.x(), centre.y() - obj_offset.y(), top + zone.release_height + below);
  }

  Pose handle_pose(double angle) const {
    const auto* h = find(s_->target);
    const Eigen::AngleAxisd rot(angle, door_->hinge.axis_dir);
    return {hinge_point_at(angle, aff_.closed_handle_point, door_->hinge), Quat(rot) * h->start_pose.orientation};
  }

  /// Advances attachment, release, pushing and the door after the arm moved.
  /// `aperture` is the commanded hand opening in [0, 1].
  void update(const Pose& ee, double aperture, const arm::ArmState& arm, double t, std::vector<WorldEvent>& events) {
    const auto& tune = s_->tuning;
    if (!held_) {
      try_attach(ee, aperture, t, events);
    } else {
      auto* obj = find_mut(held_->instance_id);
      const double contact = contact_aperture(*obj);
      if (aperture > contact + tune.release_margin) {
        detach(ee, t, events, false);
      } else if (arm.held_contact_force > tune.grip_strength) {
        detach(ee, t, events, true);
      } else if (is_door(*obj)) {
        follow_door(ee, t, events);
      } else {
        obj->pose = compose(ee, held_->grip);
        track_lift(*obj, t, events);
      }
    }
    if (tune.pushing) push_objects(ee, aperture);
    prev_aperture_ = aperture;
    if (door_ && aff_.door_angle >= door_->hinge.open_angle - 1e-9 && !status_.finished) {
      events.push_back({"door_open", ""});
      succeed(t, events);
    }
  }

  void succeed(double t, std::vector<WorldEvent>& events) {
    if (status_.finished) return;
    status_.finished = true;
    status_.success = true;
    status_.completion_time = t;
    status_.reason = "success";
    events.push_back({"success", ""});
  }

  void fail(double t, const std::string& reason, std::vector<WorldEvent>& events) {
    (void)t;
    if (status_.finished) return;
    status_.finished = true;
    status_.success = false;
    status_.reason = reason;
    events.push_back({"failure", reason});
  }

  /// Time limit reached. Box-and-Blocks counts transfers, so it ends normally.
  void time_up(double t, std::vector<WorldEvent>& events) {
    if (status_.finished) return;
    if (s_->task != Task::box_blocks) return fail(t, "timeout", events);
    status_.finished = true;
    status_.success = status_.transfers > 0;
    status_.completion_time = t;
    status_.reason = "time_limit";
    events.push_back({"time_limit", std::to_string(status_.transfers)});
  }

  void attach_for_test(const std::string& id, const Pose& ee) {
    const auto* o = find(id);
    held_ = Attachment{id, compose(inverse(ee), o->pose), ee.orientation};
  }

 private:
  WorldObject* find_mut(const std::string& id) {
    for (auto& o : objects_)
      if (o.instance_id == id) return &o;
    return nullptr;
  }

  bool is_door(const WorldObject& o) const { return door_ && o.instance_id == s_->target && s_->task == Task::door_open; }

  double contact_aperture(const WorldObject& o) const {
    return std::min(1.0, grasp_width(o.model->shape) / s_->tuning.hand_max_opening);
  }

  static arm::SupportSurface top_surface(const WorldObject& o) {
    const Vec3 ext = std::get<BoxShape>(o.model->shape).extents;
    arm::SupportSurface s;
    s.z = o.pose.position.z() + 0.5 * ext.z();
    s.min = o.pose.position.head<2>() - 0.5 * ext.head<2>();
    s.max = o.pose.position.head<2>() + 0.5 * ext.head<2>();
    return s;
  }

  void jitter_placements(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x6a69747465ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      const auto& p = s_->objects[i];
      if (p.jitter == 0.0 && p.yaw_jitter == 0.0) continue;
      auto& pose = objects_[i].pose;
      pose.position += Vec3(u(rng) * p.jitter, u(rng) * p.jitter, 0.0);
      pose.orientation = yaw_quat(u(rng) * p.yaw_jitter) * pose.orientation;
    }
  }

  void place_pair(const PairLayout& l, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x7061697273ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sep = l.min_separation + (l.max_separation - l.min_separation) * u(rng);
    const double heading = kPi * u(rng);
    const Vec3 centre = l.center + Vec3((2 * u(rng) - 1) * l.jitter, (2 * u(rng) - 1) * l.jitter, 0.0);
    const Vec3 half = 0.5 * sep * Vec3(std::cos(heading), std::sin(heading), 0.0);
    const int pick = u(rng) < 0.5 ? 0 : 1;
    for (int i = 0; i < 2; ++i) {
      auto& o = objects_[static_cast<std::size_t>(i)];
      const Vec3 c = centre + (i == 0 ? half : Vec3(-half));
      const double yaw = (2 * u(rng) - 1) * 0.3;
      o.pose = {Vec3(c.x(), c.y(), resting_half_height(o.model->shape)), yaw_quat(yaw)};
    }
    target_ = objects_[static_cast<std::size_t>(pick)].instance_id;
  }

  void try_attach(const Pose& ee, double aperture, double t, std::vector<WorldEvent>& events) {
    const auto& tune = s_->tuning;
    const Vec3 tool_axis = ee.rotate(Vec3::UnitZ());
    for (auto& o : objects_) {
      if (!grippable(o)) continue;
      const double contact = contact_aperture(o);
      if (!(prev_aperture_ > contact && aperture <= contact)) continue;
      for (const auto& g : grasps_for(s_->library, o.model_id, o.pose)) {
        if ((ee.position - g.goal_pose.position).norm() > tune.attach_distance) continue;
        if (angle_between(tool_axis, g.goal_pose.rotate(Vec3::UnitZ())) > tune.attach_angle) continue;
        held_ = Attachment{o.instance_id, compose(inverse(ee), o.pose), ee.orientation};
        lift_base_ = lowest_point_z(o.model->shape, o.pose);
        events.push_back({"grasp", o.instance_id});
        if (!status_.first_grasp_time) status_.first_grasp_time = t;
        if (is_door(o)) aff_.holding = true;
        return;
      }
    }
  }

  void track_lift(const WorldObject& o, double t, std::vector<WorldEvent>& events) {
    if (!status_.first_lifted.empty()) return;
    if (lowest_point_z(o.model->shape, o.pose) - lift_base_ < s_->min_lift_height) return;
    status_.first_lifted = o.instance_id;
    events.push_back({"lifted", o.instance_id});
    if (s_->task == Task::multi_object_grasp) {
      if (o.instance_id == target_) succeed(t, events);
      else fail(t, "wrong_object", events);
    }
  }

  void follow_door(const Pose& ee, double t, std::vector<WorldEvent>& events) {
    const Vec3 at = compose(ee, held_->grip).position;
    double angle = aff_.door_angle;
    if (aff_.unlatched)
      angle = std::clamp(hinge_angle(at, aff_.closed_handle_point, door_->hinge), door_->hinge.swing_min, door_->hinge.swing_max);
    const Pose hp = handle_pose(angle);
    if ((hp.position - at).norm() > 0.05) {
      detach(ee, t, events, true);
      return;
    }
    aff_.door_angle = angle;
    find_mut(s_->target)->pose = hp;
  }

  void detach(const Pose& ee, double t, std::vector<WorldEvent>& events, bool slipped) {
    auto* o = find_mut(held_->instance_id);
    const std::string id = o->instance_id;
    held_.reset();
    aff_.engaged = false;
    aff_.holding = false;
    aff_.departing = false;
    (void)ee;
    events.push_back({slipped ? "slip" : "release", id});
    if (is_door(*o)) return;
    const double bottom = lowest_point_z(o->model->shape, o->pose);
    const double support = support_height(o->pose.position, bottom);
    const double fall = bottom - support;
    o->pose = {Vec3(o->pose.position.x(), o->pose.position.y(), support + resting_half_height(o->model->shape)),
               yaw_quat(yaw_of(o->pose.orientation))};
    const bool placed = placed_in_zone(*o);
    if (!placed && (slipped || fall > 0.02)) {
      ++status_.drops;
      events.push_back({"drop", id});
    }
    if (placed && (s_->task == Task::arat_transfer || s_->task == Task::box_blocks) && id == target_) {
      ++status_.transfers;
      events.push_back({"transfer", id});
      if (s_->task == Task::arat_transfer) {
        succeed(t, events);
      } else {
        o->pose = o->start_pose;
        events.push_back({"reset", id});
      }
    }
    const Vec3 p = o->pose.position;
    const auto& ws = s_->servo;
    if (!status_.finished && (p.x() < ws.workspace_min.x() || p.x() > ws.workspace_max.x() ||
                              p.y() < ws.workspace_min.y() || p.y() > ws.workspace_max.y()))
      fail(t, "object_out_of_reach", events);
  }

  /// Height of the highest support under `p` that is not above `bottom`.
  double support_height(const Vec3& p, double bottom) const {
    double best = perception::TablePlane{}.z;
    for (const auto& o : objects_) {
      if (!o.model->fixture || o.model->graspable || !std::holds_alternative<BoxShape>(o.model->shape)) continue;
      const auto s = top_surface(o);
      if (s.covers(p) && s.z <= bottom + 0.005) best = std::max(best, s.z);
    }
    return best;
  }

  bool placed_in_zone(const WorldObject& o) const {
    if (s_->release_object.empty()) return false;
    const auto* fx = find(s_->release_object);
    return in_release_zone(o.pose.position, fx->model->find_affordance(AffordanceKind::release_zone)->zone, fx->pose);
  }

  /// Planar sliding of loose objects away from a hand too closed to pass around them.
  void push_objects(const Pose& ee, double aperture) {
    const auto& tune = s_->tuning;
    const double opening = aperture * tune.hand_max_opening;
    for (auto& o : objects_) {
      if (o.model->fixture || holding(o.instance_id)) continue;
      if (opening >= grasp_width(o.model->shape)) continue;
      const Pose inv = inverse(o.pose);
      const Vec3 local = inv.transform_point(ee.position);
      const Vec3 surf = closest_surface_point(o.model->shape, local);
      const bool inside = contains(o.model->shape, local);
      const double gap = (surf - local).norm();
      if (!inside && gap >= tune.finger_radius) continue;
      Vec3 away = o.pose.position - ee.position;
      away.z() = 0.0;
      if (away.norm() < 1e-6) continue;
      // only shove sideways when the tool is not above the object's top
      if (ee.position.z() > o.pose.position.z() + resting_half_height(o.model->shape)) continue;
      const double depth = inside ? gap + tune.finger_radius : tune.finger_radius - gap;
      o.pose.position += away.normalized() * depth;
    }
  }

  const Scenario* s_;
  std::vector<WorldObject> objects_;
  std::string target_;
  std::optional<Attachment> held_;
  TaskStatus status_;
  AffordanceState aff_;
  std::optional<Affordance> door_;
  std::optional<Affordance> pour_;
  double prev_aperture_ = 1.0;
  double lift_base_ = 0.0;
};

}  // namespace ait::harness
