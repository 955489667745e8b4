#pragma once

#include "ait/errors.hpp"
#include "ait/geometry.hpp"
#include "ait/json_io.hpp"
#include "ait/shapes.hpp"

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ait {

inline constexpr int kLibrarySchemaVersion = 1;

/// Envelope geometry used when a grasp entry leaves it unspecified.
struct EnvelopeDefaults {
  static constexpr double launch_distance = 0.20;
  static constexpr double cone_half_angle = 25.0 * kPi / 180.0;
  static constexpr double cone_near_offset = 0.02;
  static constexpr double preshape = 0.6;
};

/// A grasp with its capture envelope. Frame depends on context: object frame
/// inside the library, world frame after `grasps_for`.
struct GraspSpec {
  std::string name;
  Pose goal_pose;
  Vec3 approach_dir = Vec3::UnitZ();  // from goal toward launch
  double launch_distance = EnvelopeDefaults::launch_distance;
  double cone_half_angle = EnvelopeDefaults::cone_half_angle;
  double cone_near_offset = EnvelopeDefaults::cone_near_offset;
  double preshape = EnvelopeDefaults::preshape;

  Vec3 launch_position() const { return goal_pose.position + launch_distance * approach_dir; }

  GraspSpec transformed(const Pose& frame) const {
    GraspSpec g = *this;
    g.goal_pose = compose(frame, goal_pose);
    g.approach_dir = (frame.orientation * approach_dir).normalized();
    return g;
  }
};

enum class AffordanceKind { door_hinge, pour_target, release_zone };

inline std::string to_string(AffordanceKind k) {
  switch (k) {
    case AffordanceKind::door_hinge: return "door_hinge";
    case AffordanceKind::pour_target: return "pour_target";
    case AffordanceKind::release_zone: return "release_zone";
  }
  return "?";
}

/// Rotation of a door about a hinge line; the handle sits `radius` from the axis.
/// Angles are measured about `axis_dir` from the closed handle position.
struct DoorHinge {
  Vec3 axis_point = Vec3::Zero();
  Vec3 axis_dir = Vec3::UnitZ();
  double radius = 0.7;
  double swing_min = 0.0;
  double swing_max = deg2rad(90.0);
  double open_angle = deg2rad(45.0);      // counts as opened
  double handle_turn_angle = deg2rad(40.0);
  double handle_turn_time = 0.8;          // seconds for the automatic lever turn
};

/// Pouring pose above a fillable container. Translation commands along
/// `command_axis` map to tilt rate about `rotation_axis`.
struct PourTarget {
  Pose pour_pose;
  Vec3 rotation_axis = Vec3::UnitY();
  Vec3 command_axis = Vec3::UnitX();
  double max_tilt = deg2rad(120.0);
  double pour_gain = 2.0;     // rad per metre of commanded translation
  double pour_tilt = deg2rad(90.0);  // tilt at which contents flow
  double upright_rate = 1.5;  // rad/s when re-orienting upright
  double capture_radius = 0.03;
};

/// Axis-aligned region (object frame) over which releasing counts as placed.
struct ReleaseZone {
  Vec3 min = Vec3(-0.1, -0.1, 0.0);
  Vec3 max = Vec3(0.1, 0.1, 0.3);
  double release_height = 0.03;  // clearance of the held object's bottom above the surface
};

struct Affordance {
  AffordanceKind kind = AffordanceKind::release_zone;
  DoorHinge hinge;
  PourTarget pour;
  ReleaseZone zone;
};

/// Task-dependent compliance overrides applied while holding the object.
struct ForceProfile {
  std::optional<double> compliance_gain;
  std::optional<double> stall_integral_threshold;
  std::array<double, 6> reference_wrench{0, 0, 0, 0, 0, 0};
  std::array<double, 6> axis_weights{1, 1, 1, 1, 1, 1};
};

struct ObjectModel {
  std::string id;
  Shape shape = BoxShape{};
  bool graspable = true;
  bool pourable = false;
  bool fixture = false;  // scenery known a priori (platform, door); never a perception target
  std::vector<GraspSpec> grasps;
  std::vector<Affordance> affordances;
  ForceProfile force_profile;

  const Affordance* find_affordance(AffordanceKind k) const {
    for (const auto& a : affordances)
      if (a.kind == k) return &a;
    return nullptr;
  }
};

class ModelLibrary {
 public:
  ModelLibrary() = default;
  explicit ModelLibrary(std::vector<ObjectModel> objects) : objects_(std::move(objects)) { reindex(); }

  const std::vector<ObjectModel>& objects() const { return objects_; }
  bool empty() const { return objects_.empty(); }
  std::size_t size() const { return objects_.size(); }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const ObjectModel& get(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("unknown object id '" + id + "'");
    return objects_[it->second];
  }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if (!index_.emplace(objects_[i].id, i).second)
        throw ValidationError(objects_[i].id, "duplicate object id");
    }
  }

  std::vector<ObjectModel> objects_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

inline Shape parse_shape(const JsonCursor& c, const std::string& id) {
  const std::string type = c.string("type");
  if (type == "box") {
    BoxShape b{c.at("extents").vec3()};
    if ((b.extents.array() <= 0.0).any()) throw ValidationError(id, "box extents must be positive");
    return b;
  }
  if (type == "sphere") {
    SphereShape s{c.number("radius")};
    if (!(s.radius > 0.0)) throw ValidationError(id, "sphere radius must be positive");
    return s;
  }
  if (type == "cylinder") {
    CylinderShape s{c.number("radius"), c.number("height")};
    if (!(s.radius > 0.0) || !(s.height > 0.0)) throw ValidationError(id, "cylinder dimensions must be positive");
    return s;
  }
  throw ParseError(c.at("type").path(), "unknown shape type '" + type + "'");
}

inline json shape_to_json(const Shape& s) {
  return std::visit(
      [](const auto& sh) -> json {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) return json{{"type", "box"}, {"extents", to_json_vec(sh.extents)}};
        else if constexpr (std::is_same_v<T, SphereShape>) return json{{"type", "sphere"}, {"radius", sh.radius}};
        else return json{{"type", "cylinder"}, {"radius", sh.radius}, {"height", sh.height}};
      },
      s);
}

inline GraspSpec parse_grasp(const JsonCursor& c, const std::string& id) {
  GraspSpec g;
  g.name = c.string("name", "");
  const std::string who = id + " grasp '" + g.name + "'";
  g.goal_pose = pose_from(c.at("goal_pose"), who);
  const Vec3 d = c.at("approach_dir").vec3();
  if (d.norm() < 1e-9) throw ValidationError(id, "grasp '" + g.name + "' has a zero approach vector");
  try {
    g.approach_dir = checked_unit(d, who + " approach_dir");
  } catch (const ValidationError& e) {
    throw ValidationError(id, e.what());
  }
  g.launch_distance = c.number("launch_distance", EnvelopeDefaults::launch_distance);
  g.cone_half_angle = c.number("cone_half_angle", EnvelopeDefaults::cone_half_angle);
  g.cone_near_offset = c.number("cone_near_offset", EnvelopeDefaults::cone_near_offset);
  g.preshape = c.number("preshape", EnvelopeDefaults::preshape);
  if (!(g.launch_distance > g.cone_near_offset) || g.cone_near_offset < 0.0)
    throw ValidationError(id, "grasp '" + g.name + "' needs launch_distance > cone_near_offset >= 0");
  if (!(g.cone_half_angle > 0.0 && g.cone_half_angle < kPi / 2))
    throw ValidationError(id, "grasp '" + g.name + "' cone_half_angle must lie in (0, pi/2)");
  if (!(g.preshape >= 0.0 && g.preshape <= 1.0))
    throw ValidationError(id, "grasp '" + g.name + "' preshape must lie in [0,1]");
  return g;
}

inline json grasp_to_json(const GraspSpec& g) {
  return json{{"name", g.name},
              {"goal_pose", to_json_pose(g.goal_pose)},
              {"approach_dir", to_json_vec(g.approach_dir)},
              {"launch_distance", g.launch_distance},
              {"cone_half_angle", g.cone_half_angle},
              {"cone_near_offset", g.cone_near_offset},
              {"preshape", g.preshape}};
}

inline Affordance parse_affordance(const JsonCursor& c, const std::string& id) {
  Affordance a;
  const std::string kind = c.string("kind");
  if (kind == "door_hinge") {
    a.kind = AffordanceKind::door_hinge;
    auto& h = a.hinge;
    h.axis_point = c.at("axis_point").vec3();
    h.axis_dir = checked_unit(c.at("axis_dir").vec3(), id + " hinge axis");
    h.radius = c.number("radius");
    h.swing_min = c.number("swing_min");
    h.swing_max = c.number("swing_max");
    h.open_angle = c.number("open_angle", h.open_angle);
    h.handle_turn_angle = c.number("handle_turn_angle", h.handle_turn_angle);
    h.handle_turn_time = c.number("handle_turn_time", h.handle_turn_time);
    if (!(h.radius > 0.0)) throw ValidationError(id, "hinge radius must be positive");
    if (!(h.swing_min > -kPi && h.swing_max < kPi && h.swing_min < h.swing_max))
      throw ValidationError(id, "hinge swing range must be a subset of (-pi, pi)");
  } else if (kind == "pour_target") {
    a.kind = AffordanceKind::pour_target;
    auto& p = a.pour;
    p.pour_pose = pose_from(c.at("pour_pose"), id + " pour_pose");
    p.rotation_axis = checked_unit(c.at("rotation_axis").vec3(), id + " pour rotation_axis");
    if (auto ca = c.maybe("command_axis")) p.command_axis = checked_unit(ca->vec3(), id + " pour command_axis");
    p.max_tilt = c.number("max_tilt");
    p.pour_gain = c.number("pour_gain", p.pour_gain);
    p.pour_tilt = c.number("pour_tilt", std::min(p.pour_tilt, p.max_tilt));
    p.upright_rate = c.number("upright_rate", p.upright_rate);
    p.capture_radius = c.number("capture_radius", p.capture_radius);
    if (!(p.max_tilt > 0.0 && p.max_tilt <= kPi)) throw ValidationError(id, "max_tilt must lie in (0, pi]");
    if (!(p.pour_tilt > 0.0 && p.pour_tilt <= p.max_tilt))
      throw ValidationError(id, "pour_tilt must lie in (0, max_tilt]");
  } else if (kind == "release_zone") {
    a.kind = AffordanceKind::release_zone;
    a.zone.min = c.at("min").vec3();
    a.zone.max = c.at("max").vec3();
    a.zone.release_height = c.number("release_height", a.zone.release_height);
    if (((a.zone.max - a.zone.min).array() <= 0.0).any()) throw ValidationError(id, "release zone is degenerate");
  } else {
    throw ParseError(c.at("kind").path(), "unknown affordance kind '" + kind + "'");
  }
  return a;
}

inline json affordance_to_json(const Affordance& a) {
  switch (a.kind) {
    case AffordanceKind::door_hinge: {
      const auto& h = a.hinge;
      return json{{"kind", "door_hinge"},        {"axis_point", to_json_vec(h.axis_point)},
                  {"axis_dir", to_json_vec(h.axis_dir)}, {"radius", h.radius},
                  {"swing_min", h.swing_min},    {"swing_max", h.swing_max},
                  {"open_angle", h.open_angle},  {"handle_turn_angle", h.handle_turn_angle},
                  {"handle_turn_time", h.handle_turn_time}};
    }
    case AffordanceKind::pour_target: {
      const auto& p = a.pour;
      return json{{"kind", "pour_target"},
                  {"pour_pose", to_json_pose(p.pour_pose)},
                  {"rotation_axis", to_json_vec(p.rotation_axis)},
                  {"command_axis", to_json_vec(p.command_axis)},
                  {"max_tilt", p.max_tilt},
                  {"pour_gain", p.pour_gain},
                  {"pour_tilt", p.pour_tilt},
                  {"upright_rate", p.upright_rate},
                  {"capture_radius", p.capture_radius}};
    }
    case AffordanceKind::release_zone:
      return json{{"kind", "release_zone"},
                  {"min", to_json_vec(a.zone.min)},
                  {"max", to_json_vec(a.zone.max)},
                  {"release_height", a.zone.release_height}};
  }
  return {};
}

inline std::array<double, 6> parse_six(const JsonCursor& c) {
  if (c.size() != 6) throw ParseError(c.path(), "expected 6 numbers");
  std::array<double, 6> out{};
  for (std::size_t i = 0; i < 6; ++i) out[i] = c[i].number();
  return out;
}

inline ObjectModel parse_object(const JsonCursor& c) {
  ObjectModel m;
  m.id = c.string("id");
  if (m.id.empty()) throw ValidationError(c.path(), "object id must be non-empty");
  m.shape = parse_shape(c.at("shape"), m.id);
  m.graspable = c.boolean("graspable", true);
  m.pourable = c.boolean("pourable", false);
  m.fixture = c.boolean("fixture", false);
  if (auto gs = c.maybe("grasps"))
    for (std::size_t i = 0; i < gs->size(); ++i) m.grasps.push_back(parse_grasp((*gs)[i], m.id));
  if (auto as = c.maybe("affordances"))
    for (std::size_t i = 0; i < as->size(); ++i) m.affordances.push_back(parse_affordance((*as)[i], m.id));
  if (auto fp = c.maybe("force_profile")) {
    if (auto k = fp->maybe("compliance_gain")) m.force_profile.compliance_gain = k->number();
    if (auto s = fp->maybe("stall_integral_threshold")) m.force_profile.stall_integral_threshold = s->number();
    if (auto r = fp->maybe("reference_wrench")) m.force_profile.reference_wrench = parse_six(*r);
    if (auto w = fp->maybe("axis_weights")) m.force_profile.axis_weights = parse_six(*w);
  }
  if (m.graspable && m.grasps.empty()) throw ValidationError(m.id, "graspable object needs at least one grasp");
  return m;
}

inline json object_to_json(const ObjectModel& m) {
  json grasps = json::array();
  for (const auto& g : m.grasps) grasps.push_back(grasp_to_json(g));
  json affs = json::array();
  for (const auto& a : m.affordances) affs.push_back(affordance_to_json(a));
  json fp{{"reference_wrench", m.force_profile.reference_wrench}, {"axis_weights", m.force_profile.axis_weights}};
  if (m.force_profile.compliance_gain) fp["compliance_gain"] = *m.force_profile.compliance_gain;
  if (m.force_profile.stall_integral_threshold)
    fp["stall_integral_threshold"] = *m.force_profile.stall_integral_threshold;
  return json{{"id", m.id},           {"shape", shape_to_json(m.shape)}, {"graspable", m.graspable},
              {"pourable", m.pourable}, {"fixture", m.fixture},        {"grasps", grasps},
              {"affordances", affs},   {"force_profile", fp}};
}

}  // namespace detail

inline ModelLibrary library_from_json(const json& doc) {
  JsonCursor root(doc, "");
  root.require_object();
  const auto version = root.at("schema_version").integer();
  if (version != kLibrarySchemaVersion)
    throw ParseError("schema_version", "unsupported version " + std::to_string(version));
  std::vector<ObjectModel> objects;
  const auto arr = root.at("objects");
  for (std::size_t i = 0; i < arr.size(); ++i) objects.push_back(detail::parse_object(arr[i]));
  return ModelLibrary(std::move(objects));
}

inline ModelLibrary load_library(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
  return library_from_json(doc);
}

inline ModelLibrary load_library_string(const std::string& text) {
  std::istringstream in(text);
  return load_library(in);
}

inline json library_to_json(const ModelLibrary& lib) {
  json objs = json::array();
  for (const auto& o : lib.objects()) objs.push_back(detail::object_to_json(o));
  return json{{"schema_version", kLibrarySchemaVersion}, {"objects", objs}};
}

/// Canonical serialization: sorted keys, all defaults explicit, two-space indent.
inline std::string save_library(const ModelLibrary& lib) { return library_to_json(lib).dump(2) + "\n"; }

/// The object's grasps expressed in the world frame for an object at `object_pose`.
inline std::vector<GraspSpec> grasps_for(const ModelLibrary& lib, const std::string& object_id,
                                         const Pose& object_pose) {
  const ObjectModel& m = lib.get(object_id);
  std::vector<GraspSpec> out;
  out.reserve(m.grasps.size());
  for (const auto& g : m.grasps) out.push_back(g.transformed(object_pose));
  return out;
}

}  // namespace ait
