#pragma once

#include "ait/arbitration.hpp"
#include "ait/arm/sim.hpp"
#include "ait/errors.hpp"
#include "ait/intent.hpp"
#include "ait/json_io.hpp"
#include "ait/model_library.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace ait::harness {

inline constexpr int kScenarioSchemaVersion = 1;

enum class Task { arat_transfer, box_blocks, multi_object_grasp, door_open, pour };
enum class Mode { ait, dc };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::arat_transfer: return "arat_transfer";
    case Task::box_blocks: return "box_blocks";
    case Task::multi_object_grasp: return "multi_object_grasp";
    case Task::door_open: return "door_open";
    case Task::pour: return "pour";
  }
  return "?";
}

inline std::string to_string(Mode m) { return m == Mode::ait ? "ait" : "dc"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "ait" || s == "AIT") return Mode::ait;
  if (s == "dc" || s == "DC") return Mode::dc;
  throw ValidationError("mode", "expected ait or dc, got '" + s + "'");
}

inline Task parse_task(const std::string& s, const std::string& path) {
  if (s == "arat_transfer") return Task::arat_transfer;
  if (s == "box_blocks") return Task::box_blocks;
  if (s == "multi_object_grasp") return Task::multi_object_grasp;
  if (s == "door_open") return Task::door_open;
  if (s == "pour") return Task::pour;
  throw ParseError(path, "unknown task '" + s + "'");
}

struct ObjectPlacement {
  std::string instance_id;
  std::string model_id;
  Pose pose;
  double jitter = 0.0;      // m, uniform in x and y per seed
  double yaw_jitter = 0.0;  // rad, uniform about z per seed
};

/// Randomized two-object layout: centres `separation` apart, the designated
/// target chosen per seed.
struct PairLayout {
  double min_separation = 0.10;
  double max_separation = 0.31;
  Vec3 center = Vec3(0.5, 0.0, 0.0);
  double jitter = 0.05;
};

struct PerceptionSettings {
  enum class Source { depth, ground_truth } source = Source::depth;
  double rate_hz = 5.0;
  double resolution_scale = 0.5;
  double noise_sigma = 0.0;
};

struct HarnessTuning {
  double attach_distance = 0.02;           // tool point to grasp goal
  double attach_angle = deg2rad(20.0);     // tool axis to grasp axis
  double at_grasp_distance = 0.015;
  double at_grasp_angle = deg2rad(10.0);
  double hand_max_opening = 0.14;          // metres at aperture 1
  double release_margin = 0.05;            // aperture above contact that lets go
  double grip_strength = 60.0;             // N of contact force on the held object before it slips
  double finger_radius = 0.015;
  bool pushing = true;
  double pour_hold_time = 0.5;             // s at pour tilt that counts as poured
  double return_tolerance = 0.05;
};

struct Scenario {
  std::string id;
  Task task = Task::arat_transfer;
  Mode mode = Mode::ait;
  double time_limit = 120.0;
  double control_rate = 50.0;
  std::string library_path;
  ModelLibrary library;
  std::vector<ObjectPlacement> objects;
  std::optional<PairLayout> pair_layout;
  std::string target;          // instance id
  std::string release_object;  // instance id carrying a release_zone
  std::string pour_object;     // instance id carrying a pour_target
  double min_lift_height = 0.05;
  std::optional<Vec3> return_position;
  std::optional<arm::Vec7> start_q;
  PerceptionSettings perception;
  IntentConfig intent;
  ArbitrationConfig arbitration;
  HandConfig hand;
  arm::ServoConfig servo;
  arm::JointDynamics dynamics;
  HarnessTuning tuning;
  json source;  // document the scenario was parsed from

  double dt() const { return 1.0 / control_rate; }

  const ObjectPlacement* find(const std::string& instance) const {
    for (const auto& o : objects)
      if (o.instance_id == instance) return &o;
    return nullptr;
  }

  void validate() const {
    if (!(time_limit > 0.0)) throw ValidationError(id, "time_limit must be positive");
    if (!(control_rate > 0.0 && 1.0 / control_rate <= 0.05)) throw ValidationError(id, "control_rate must be at least 20 Hz");
    for (const auto& o : objects)
      if (!library.contains(o.model_id)) throw ValidationError(id, "object '" + o.instance_id + "' references unknown model '" + o.model_id + "'");
    auto need = [&](const std::string& inst, const char* what) {
      if (inst.empty() || !find(inst)) throw ValidationError(id, std::string(what) + " '" + inst + "' is not a scene object");
    };
    need(target, "target");
    if (task == Task::arat_transfer || task == Task::box_blocks) {
      need(release_object, "release_object");
      if (!library.get(find(release_object)->model_id).find_affordance(AffordanceKind::release_zone))
        throw ValidationError(id, "release_object has no release_zone affordance");
    }
    if (task == Task::pour) {
      need(pour_object, "pour_object");
      if (!library.get(find(pour_object)->model_id).find_affordance(AffordanceKind::pour_target))
        throw ValidationError(id, "pour_object has no pour_target affordance");
    }
    if (task == Task::door_open && !library.get(find(target)->model_id).find_affordance(AffordanceKind::door_hinge))
      throw ValidationError(id, "door target has no door_hinge affordance");
    if (task == Task::multi_object_grasp && pair_layout && objects.size() != 2)
      throw ValidationError(id, "pair layout needs exactly two objects");
    intent.validate();
    arbitration.validate();
    servo.validate();
  }
};

namespace detail {

inline void read_intent(const JsonCursor& c, IntentConfig& cfg) {
  cfg.k_t = c.number("k_t", cfg.k_t);
  cfg.k_r = c.number("k_r", cfg.k_r);
  cfg.cost_threshold = c.number("cost_threshold", cfg.cost_threshold);
  cfg.kin_reach_radius = c.number("kin_reach_radius", cfg.kin_reach_radius);
  if (auto p = c.maybe("prior")) {
    p->require_object();
    cfg.prior.clear();
    for (const auto& [k, v] : p->value().items()) cfg.prior[k] = p->number(k);
  }
}

inline void read_arbitration(const JsonCursor& c, ArbitrationConfig& cfg) {
  cfg.alpha_min = c.number("alpha_min", cfg.alpha_min);
  cfg.epsilon = c.number("epsilon", cfg.epsilon);
  cfg.breakaway_angle = c.number("breakaway_angle", cfg.breakaway_angle);
  cfg.breakaway_duration = c.number("breakaway_duration", cfg.breakaway_duration);
  cfg.breakaway_alpha = c.number("breakaway_alpha", cfg.breakaway_alpha);
  cfg.user_speed_limit = c.number("user_speed_limit", cfg.user_speed_limit);
}

inline void read_hand(const JsonCursor& c, HandConfig& cfg) {
  cfg.aperture_rate = c.number("aperture_rate", cfg.aperture_rate);
  cfg.release_threshold = c.number("release_threshold", cfg.release_threshold);
  cfg.filter_time_constant = c.number("filter_time_constant", cfg.filter_time_constant);
  cfg.close_deadband = c.number("close_deadband", cfg.close_deadband);
  if (!(cfg.filter_time_constant > 0.0)) throw ValidationError("hand", "filter_time_constant must be positive");
  if (!(cfg.release_threshold > 0.0)) throw ValidationError("hand", "release_threshold must be positive");
}

inline arm::Vec7 read_vec7(const JsonCursor& c) {
  if (c.size() != 7) throw ParseError(c.path(), "expected 7 numbers");
  arm::Vec7 v;
  for (std::size_t i = 0; i < 7; ++i) v[static_cast<int>(i)] = c[i].number();
  return v;
}

inline void read_servo(const JsonCursor& c, arm::ServoConfig& cfg) {
  cfg.gain = c.number("gain", cfg.gain);
  cfg.max_linear_speed = c.number("max_linear_speed", cfg.max_linear_speed);
  cfg.max_angular_speed = c.number("max_angular_speed", cfg.max_angular_speed);
  cfg.damping = c.number("damping", cfg.damping);
  cfg.nullspace_gain = c.number("nullspace_gain", cfg.nullspace_gain);
  cfg.elbow_clearance = c.number("elbow_clearance", cfg.elbow_clearance);
  cfg.elbow_penalty_gain = c.number("elbow_penalty_gain", cfg.elbow_penalty_gain);
  cfg.compliance_gain = c.number("compliance_gain", cfg.compliance_gain);
  cfg.stall_integral_threshold = c.number("stall_integral_threshold", cfg.stall_integral_threshold);
  cfg.torque_rampdown_rate = c.number("torque_rampdown_rate", cfg.torque_rampdown_rate);
  if (auto p = c.maybe("preferred")) cfg.preferred = read_vec7(*p);
  if (auto w = c.maybe("workspace_min")) cfg.workspace_min = w->vec3();
  if (auto w = c.maybe("workspace_max")) cfg.workspace_max = w->vec3();
}

inline void read_dynamics(const JsonCursor& c, arm::JointDynamics& d) {
  d.mass = c.number("mass", d.mass);
  d.damping = c.number("damping", d.damping);
  d.kp = c.number("kp", d.kp);
  d.ki = c.number("ki", d.ki);
  d.integral_cap = c.number("integral_cap", d.integral_cap);
  d.integral_leak = c.number("integral_leak", d.integral_leak);
  d.stall_detection = c.boolean("stall_detection", d.stall_detection);
  d.compliance = c.boolean("compliance", d.compliance);
}

inline void read_tuning(const JsonCursor& c, HarnessTuning& t) {
  t.attach_distance = c.number("attach_distance", t.attach_distance);
  t.attach_angle = c.number("attach_angle", t.attach_angle);
  t.at_grasp_distance = c.number("at_grasp_distance", t.at_grasp_distance);
  t.at_grasp_angle = c.number("at_grasp_angle", t.at_grasp_angle);
  t.grip_strength = c.number("grip_strength", t.grip_strength);
  t.pushing = c.boolean("pushing", t.pushing);
  t.pour_hold_time = c.number("pour_hold_time", t.pour_hold_time);
}

}  // namespace detail

/// Parses a scenario document. `base_dir` resolves a relative library path;
/// `library` overrides loading from disk when given.
inline Scenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir,
                                   const ModelLibrary* library = nullptr) {
  const JsonCursor c(doc, "");
  c.require_object();
  const auto version = c.at("schema_version").integer();
  if (version != kScenarioSchemaVersion) throw ParseError("schema_version", "unsupported version " + std::to_string(version));
  Scenario s;
  s.source = doc;
  s.id = c.string("id");
  s.task = parse_task(c.string("task"), "task");
  s.mode = parse_mode(c.string("mode", "ait"));
  s.time_limit = c.number("time_limit", s.time_limit);
  s.control_rate = c.number("control_rate", s.control_rate);
  s.library_path = c.string("library", "");
  if (library) {
    s.library = *library;
  } else {
    if (s.library_path.empty()) throw ParseError("library", "missing library path");
    const auto path = (base_dir / s.library_path).lexically_normal();
    std::ifstream in(path);
    if (!in) throw ParseError("library", "cannot open " + path.string());
    s.library = load_library(in);
  }
  const auto objs = c.at("objects");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const auto o = objs[i];
    ObjectPlacement p;
    p.instance_id = o.string("instance_id");
    p.model_id = o.string("model_id");
    p.pose = pose_from(o.at("pose"), p.instance_id);
    p.jitter = o.number("jitter", 0.0);
    p.yaw_jitter = o.number("yaw_jitter", 0.0);
    if (p.jitter < 0.0) throw ParseError(o.at("jitter").path(), "must be non-negative");
    if (p.yaw_jitter < 0.0) throw ParseError(o.at("yaw_jitter").path(), "must be non-negative");
    s.objects.push_back(p);
  }
  if (auto pl = c.maybe("pair_layout")) {
    PairLayout l;
    l.min_separation = pl->number("min_separation", l.min_separation);
    l.max_separation = pl->number("max_separation", l.max_separation);
    if (auto ce = pl->maybe("center")) l.center = ce->vec3();
    l.jitter = pl->number("jitter", l.jitter);
    if (!(l.min_separation > 0.0 && l.max_separation >= l.min_separation))
      throw ValidationError(s.id, "pair_layout separation range is invalid");
    s.pair_layout = l;
  }
  s.target = c.string("target", "");
  s.release_object = c.string("release_object", "");
  s.pour_object = c.string("pour_object", "");
  s.min_lift_height = c.number("min_lift_height", s.min_lift_height);
  if (auto r = c.maybe("return_position")) s.return_position = r->vec3();
  if (auto q = c.maybe("start_q")) s.start_q = detail::read_vec7(*q);
  if (auto p = c.maybe("perception")) {
    const std::string src = p->string("source", "depth");
    if (src == "depth") s.perception.source = PerceptionSettings::Source::depth;
    else if (src == "ground_truth") s.perception.source = PerceptionSettings::Source::ground_truth;
    else throw ParseError(p->at("source").path(), "unknown perception source '" + src + "'");
    s.perception.rate_hz = p->number("rate_hz", s.perception.rate_hz);
    s.perception.resolution_scale = p->number("resolution_scale", s.perception.resolution_scale);
    s.perception.noise_sigma = p->number("noise_sigma", s.perception.noise_sigma);
    if (!(s.perception.rate_hz > 0.0)) throw ValidationError(s.id, "perception rate must be positive");
  }
  if (auto cfg = c.maybe("config")) {
    if (auto x = cfg->maybe("intent")) detail::read_intent(*x, s.intent);
    if (auto x = cfg->maybe("arbitration")) detail::read_arbitration(*x, s.arbitration);
    if (auto x = cfg->maybe("hand")) detail::read_hand(*x, s.hand);
    if (auto x = cfg->maybe("servo")) detail::read_servo(*x, s.servo);
    if (auto x = cfg->maybe("dynamics")) detail::read_dynamics(*x, s.dynamics);
    if (auto x = cfg->maybe("tuning")) detail::read_tuning(*x, s.tuning);
  }
  s.arbitration.derive_sigmoid();
  s.intent.base_position = arm::ArmModel{}.base.position;
  s.validate();
  return s;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path());
}

}  // namespace ait::harness
