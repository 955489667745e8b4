#pragma once

#include "ait/affordance.hpp"
#include "ait/arbitration.hpp"
#include "ait/arm/sim.hpp"
#include "ait/harness/operator.hpp"
#include "ait/harness/world.hpp"
#include "ait/intent.hpp"
#include "ait/perception/detect.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ait::harness {

inline constexpr int kLogSchemaVersion = 1;

/// Belief about one perceived object.
struct Track {
  std::string id;
  std::string model_id;
  Pose pose;
};

inline json event_to_json(const WorldEvent& e) {
  json j{{"name", e.name}};
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j;
}

inline json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Fixed-rate closed loop: perception -> intent -> arbitration -> servo -> arm
/// dynamics -> world. One instance owns all mutable state of a run.
class Simulation {
 public:
  Simulation(const Scenario& s, std::uint64_t seed,
             std::shared_ptr<const perception::TemplateSet> templates = nullptr)
      : scenario_(std::make_unique<Scenario>(s)), seed_(seed), templates_(std::move(templates)) {
    mode_ = scenario_->mode;
    if (scenario_->perception.source == PerceptionSettings::Source::depth && !templates_)
      templates_ = std::make_shared<const perception::TemplateSet>(perception::build_templates(scenario_->library));
    init();
  }

  void reset() {
    pending_changes_ = json::object();
    init();
  }

  const Scenario& scenario() const { return *scenario_; }
  Mode mode() const { return mode_; }
  /// Mid-run mode switch; recorded on the next tick so replay can repeat it.
  void set_mode(Mode m) {
    if (m == mode_) return;
    mode_ = m;
    pending_changes_["mode"] = to_string(m);
  }
  std::uint64_t seed() const { return seed_; }
  const World& world() const { return *world_; }
  const arm::ArmState& arm_state() const { return arm_; }
  const arm::ArmModel& model() const { return model_; }
  const HandState& hand() const { return hand_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  double time() const { return static_cast<double>(tick_) * scenario_->dt(); }
  std::size_t ticks() const { return tick_; }
  bool finished() const { return world_->status().finished; }
  const TaskStatus& status() const { return world_->status(); }
  std::shared_ptr<const perception::TemplateSet> templates() const { return templates_; }

  /// Replaces the tunable parameter blocks (intent, arbitration, hand, servo,
  /// dynamics, tuning) while the scene keeps running.
  void apply_tuning(const Scenario& parsed) {
    scenario_->intent = parsed.intent;
    scenario_->arbitration = parsed.arbitration;
    scenario_->hand = parsed.hand;
    scenario_->servo = parsed.servo;
    scenario_->dynamics = parsed.dynamics;
    scenario_->tuning = parsed.tuning;
    scenario_->time_limit = parsed.time_limit;
    scenario_->perception.noise_sigma = parsed.perception.noise_sigma;
    scenario_->source = parsed.source;
    pending_changes_["config"] = parsed.source;
  }

  json header(const json& operator_doc) const {
    return json{{"type", "header"},
                {"schema_version", kLogSchemaVersion},
                {"scenario", scenario_->source},
                {"library", library_to_json(scenario_->library)},
                {"operator", operator_doc},
                {"mode", to_string(mode_)},
                {"seed", seed_},
                {"dt", scenario_->dt()}};
  }

  /// Ground-truth view handed to scripted operators.
  OperatorView operator_view(const std::string& goal_override = {}) const {
    const World& w = *world_;
    OperatorView v;
    v.t = time();
    v.task = scenario_->task;
    v.ee = arm::fk(model_, arm_.q);
    const std::string goal = goal_override.empty() ? w.target() : goal_override;
    v.holding = w.held().has_value();
    v.holding_target = w.holding(goal);
    if (w.find(goal)) v.grasp_point = w.grasp_point(goal, v.ee);
    v.release_point = w.release_point(v.ee);
    if (w.pour()) {
      v.pour_point = w.pour()->pour.pour_pose.position;
      v.pour_command_axis = w.pour()->pour.command_axis;
    }
    v.pour_engaged = w.affordance().engaged && w.pour();
    v.poured = w.status().poured;
    v.return_point = return_point_;
    if (w.door()) {
      const double ang = w.affordance().door_angle;
      v.door_pull_dir = hinge_tangent(w.handle_pose(ang).position, w.door()->hinge);
      v.door_unlatched = w.affordance().unlatched;
    }
    v.task_done = w.status().finished;
    return v;
  }

  /// Advances one control tick under `cmd` and returns the tick record.
  json step(const UserCommand& raw) {
    const Scenario& s = *scenario_;
    World& w = *world_;
    const double dt = s.dt();
    std::vector<WorldEvent> events;
    UserCommand cmd = raw;
    if (!cmd.v_u.finite() || !std::isfinite(cmd.grasp_velocity)) {
      cmd = UserCommand{};
      events.push_back({"safety", "non-finite command replaced by zero"});
    }
    cmd.v_u.angular = Vec3::Zero();  // 4-DoF input: translation and grasp

    const Pose e = arm::fk(model_, arm_.q);
    if (mode_ == Mode::ait && tick_ % perception_period_ == 0) perceive(e, events);
    if (reset_posterior_) {
      posterior_ = reset_posterior(e, goal_points(), s.intent);
      reset_posterior_ = false;
    }

    const Pose base{e.position, ref_orientation_};
    const Pose u = user_target_pose(base, cmd, dt, s.arbitration.user_speed_limit);
    const Vec3 v_user = clamp_twist(cmd.v_u, s.arbitration.user_speed_limit, kPi).linear;
    Pose a = u;
    Pose d = u;
    double alpha_value = 1.0;
    double confidence = 0.0;
    std::optional<std::string> goal;
    EnvelopeStatus env = EnvelopeStatus::outside;
    double preshape = hand_.preshape;
    bool constrained = false;

    if (mode_ == Mode::ait) {
      std::optional<GraspSpec> engaged;  // envelope in use this tick
      if (w.held()) {
        constrained = held_assist(cmd, e, u, a, confidence, engaged, events);
      } else {
        advance_posterior(e);
        std::optional<IntentEstimate> est;
        if (!posterior_.entries.empty()) est = estimate_intent(posterior_, e, belief_scene(), s.library, s.intent, ik_check());
        if (!est && latched_ && (e.position - latched_->grasp.goal_pose.position).norm() < kLatchRadius &&
            belief_has(latched_->goal_id)) {
          est = latched_;
          est->t = 0.0;
          est->confidence = 1.0;
        }
        latched_ = est;
        if (est) {
          a = est->assist_pose;
          confidence = est->confidence;
          goal = est->goal_id;
          engaged = est->grasp;
          preshape = est->grasp.preshape;
          const bool at = (e.position - est->grasp.goal_pose.position).norm() <= s.tuning.at_grasp_distance &&
                          angular_distance(e.orientation, est->grasp.goal_pose.orientation) <= s.tuning.at_grasp_angle;
          env = at ? EnvelopeStatus::at_grasp : EnvelopeStatus::inside;
        }
      }
      if (constrained) {
        d = a;
        alpha_value = s.arbitration.alpha_min;
        confidence = 1.0;
      } else if (engaged) {
        const double floor = check_breakaway(breakaway_, v_user, a.position - e.position, dt, s.arbitration);
        alpha_value = std::max(alpha(confidence, s.arbitration), floor);
        d = blend(a, u, alpha_value);
      } else {
        breakaway_ = BreakawayTracker{};
        a = u;
      }
    }
    hand_ = step_hand(hand_, cmd, env, w.held().has_value(), dt, s.hand, preshape);
    ref_orientation_ = d.orientation;

    // servo and arm dynamics
    arm::ServoConfig sc = s.servo;
    if (w.held()) {
      const auto& fp = w.find(w.held()->instance_id)->model->force_profile;
      if (fp.compliance_gain) sc.compliance_gain = *fp.compliance_gain;
      if (fp.stall_integral_threshold) sc.stall_integral_threshold = *fp.stall_integral_threshold;
    }
    arm::Vec7 qd = arm::servo_step(model_, arm_.q, d, sc).qd;
    if (!qd.allFinite()) {
      qd.setZero();
      events.push_back({"safety", "servo produced a non-finite command"});
    }
    const auto stalled_before = arm_.stalled;
    arm_ = arm::simulate_step(model_, arm_, qd, w.sim_environment(), dt, sc, s.dynamics);
    arm_.aperture = hand_.aperture;
    for (int i = 0; i < arm::kJoints; ++i)
      if (arm_.stalled[i] && !stalled_before[i]) events.push_back({"stall", "joint " + std::to_string(i + 1)});

    ++tick_;
    const double t = time();
    const Pose e2 = arm::fk(model_, arm_.q);
    const bool was_holding = w.held().has_value();
    w.update(e2, hand_.aperture, arm_, t, events);
    if (was_holding && !w.held()) {
      reset_posterior_ = true;
      latched_.reset();
    }
    if (!was_holding && w.held()) latched_.reset();
    track_pour(e2, t, events);
    path_length_ += (e2.position - e.position).norm();
    if (!w.status().finished && t >= s.time_limit - 1e-9) w.time_up(t, events);

    json posterior = json::array();
    for (const auto& p : posterior_.entries) posterior.push_back({{"goal_id", p.goal_id}, {"p", p.probability}});
    json ev = json::array();
    for (const auto& x : events) ev.push_back(event_to_json(x));
    json rec{{"type", "tick"},
             {"t", t},
             {"mode", to_string(mode_)},
             {"q", vec_to_json(arm_.q)},
             {"ee_pose", to_json_pose(e2)},
             {"cmd", {{"v", to_json_vec(raw.v_u.linear)}, {"grasp", raw.grasp_velocity}}},
             {"v_u", to_json_vec(v_user)},
             {"A", to_json_pose(a)},
             {"U", to_json_pose(u)},
             {"D", to_json_pose(d)},
             {"alpha", alpha_value},
             {"I", confidence},
             {"goal", goal ? json(*goal) : json(nullptr)},
             {"posterior", posterior},
             {"hand", {{"mode", to_string(hand_.mode)}, {"aperture", hand_.aperture}}},
             {"F_e", vec_to_json(arm_.wrench)},
             {"holding", w.held() ? json(w.held()->instance_id) : json(nullptr)},
             {"events", ev}};
    if (constrained) rec["constrained"] = true;
    if (w.door()) rec["door_angle"] = w.affordance().door_angle;
    if (w.pour()) rec["tilt"] = w.affordance().tilt;
    if (!pending_changes_.empty()) {
      rec["changes"] = std::move(pending_changes_);
      pending_changes_ = json::object();
    }
    return rec;
  }

  json terminal() const {
    const TaskStatus& st = world_->status();
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    json j{{"type", "terminal"},
           {"success", st.success},
           {"reason", st.reason.empty() ? "running" : st.reason},
           {"completion_time", opt(st.completion_time)},
           {"time_to_first_grasp", opt(st.first_grasp_time)},
           {"drops", st.drops},
           {"path_length", path_length_},
           {"transfers", st.transfers},
           {"designated", world_->target()},
           {"t", time()},
           {"ticks", tick_}};
    j["lifted_object"] = st.first_lifted.empty() ? json(nullptr) : json(st.first_lifted);
    j["correct_object"] = st.first_lifted.empty() ? json(nullptr) : json(st.first_lifted == world_->target());
    if (world_->pour()) {
      j["poured"] = st.poured;
      j["upright"] = st.upright;
      j["tilted_translation"] = st.tilted_translation;
    }
    return j;
  }

 private:
  static constexpr double kLatchRadius = 0.03;

  void init() {
    const Scenario& s = *scenario_;
    world_ = std::make_unique<World>(s, seed_);
    arm_ = arm::ArmState{};
    arm_.q = s.start_q ? *s.start_q : s.servo.preferred;
    const Pose e = arm::fk(model_, arm_.q);
    ref_orientation_ = e.orientation;
    return_point_ = s.return_position ? *s.return_position : e.position;
    hand_ = HandState{};
    breakaway_ = BreakawayTracker{};
    tracks_.clear();
    next_track_ = 0;
    latched_.reset();
    ik_cache_.clear();
    tick_ = 0;
    path_length_ = 0.0;
    reset_posterior_ = false;
    posterior_ = reset_posterior(e, {}, s.intent);
    perception_period_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(s.control_rate / s.perception.rate_hz)));
    camera_ = perception::default_camera();
    camera_.k = camera_.k.scaled(s.perception.resolution_scale);
  }

  // ---- perception and belief

  void perceive(const Pose& e, std::vector<WorldEvent>& events) {
    const Scenario& s = *scenario_;
    const World& w = *world_;
    if (s.perception.source == PerceptionSettings::Source::ground_truth) {
      tracks_.clear();
      for (const auto& o : w.objects())
        if (!o.model->fixture && World::grippable(o) && !w.holding(o.instance_id))
          tracks_.push_back({o.instance_id, o.model_id, o.pose});
      return;
    }
    // the arm hides the workspace while carrying during repeated transfers
    if (s.task == Task::box_blocks && w.held()) return;
    try {
      perception::RenderOptions opt;
      opt.noise_sigma = s.perception.noise_sigma;
      opt.seed = seed_ * 1000003ULL + tick_;
      auto img = perception::render_depth(w.render_items(true, true), camera_, perception::TablePlane{}, opt,
                                          perception::arm_capsules(model_, arm_.q));
      const auto known = perception::render_depth(w.render_items(true, false), camera_, std::nullopt);
      img = perception::mask_known(img, known);
      const auto rep = perception::detect_objects(img, s.library, *templates_, camera_, det_cfg_,
                                                  perception::ArmView{&model_, arm_.q});
      associate(rep.objects, e);
    } catch (const std::exception& ex) {
      events.push_back({"perception_error", ex.what()});
    }
  }

  void associate(const std::vector<perception::DetectedObject>& dets, const Pose& e) {
    const auto near_hand = [&](const Vec3& p) { return (p - e.position).norm() < 0.25; };
    const auto radius = [&](const std::string& model) { return bounding_radius(scenario_->library.get(model).shape); };
    std::vector<Track> next;
    std::vector<bool> used(tracks_.size(), false);
    std::vector<const perception::DetectedObject*> unmatched;
    for (const auto& d : dets) {
      std::size_t best = tracks_.size();
      double best_dist = 0.1;
      for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (used[i] || tracks_[i].model_id != d.object_id) continue;
        const double dist = (tracks_[i].pose.position - d.pose.position).norm();
        if (dist < best_dist) {
          best_dist = dist;
          best = i;
        }
      }
      if (best < tracks_.size()) {
        used[best] = true;
        next.push_back({tracks_[best].id, d.object_id, d.pose});
      } else {
        unmatched.push_back(&d);
      }
    }
    for (const auto* d : unmatched) {
      // a detection overlapping a known object of another type: a partial view near
      // the hand is ignored, elsewhere the new reading wins
      std::size_t overlap = tracks_.size();
      for (std::size_t i = 0; i < tracks_.size(); ++i) {
        const double reach = radius(tracks_[i].model_id) + radius(d->object_id);
        if ((tracks_[i].pose.position - d->pose.position).norm() < reach) {
          overlap = i;
          break;
        }
      }
      if (overlap == tracks_.size()) {
        next.push_back({"obj" + std::to_string(next_track_++), d->object_id, d->pose});
      } else if (!used[overlap]) {
        used[overlap] = true;
        if (near_hand(d->pose.position))
          next.push_back(tracks_[overlap]);
        else
          next.push_back({tracks_[overlap].id, d->object_id, d->pose});
      }
    }
    // unseen tracks close to the hand are probably occluded by it
    for (std::size_t i = 0; i < tracks_.size(); ++i)
      if (!used[i] && near_hand(tracks_[i].pose.position)) next.push_back(tracks_[i]);
    tracks_ = std::move(next);
  }

  /// Perceived movable objects plus graspable scenery known in advance.
  std::vector<SceneObject> belief_scene() const {
    std::vector<SceneObject> out;
    for (const auto& t : tracks_) out.push_back({t.id, t.model_id, t.pose});
    for (const auto& o : world_->objects())
      if (o.model->fixture && World::grippable(o)) out.push_back({o.instance_id, o.model_id, o.pose});
    return out;
  }

  bool belief_has(const std::string& id) const {
    for (const auto& o : belief_scene())
      if (o.instance_id == id) return true;
    return false;
  }

  std::vector<GoalPoint> goal_points() const {
    std::vector<GoalPoint> g;
    for (const auto& o : belief_scene()) g.push_back({o.instance_id, o.pose.position});
    return g;
  }

  void advance_posterior(const Pose& e) {
    const auto goals = goal_points();
    if (goals.empty()) {
      posterior_.trajectory_cost_so_far += (e.position - posterior_.last_pose.position).norm();
      posterior_.last_pose = e;
      posterior_.entries.clear();
      return;
    }
    posterior_ = update_posterior(posterior_, e, goals, scenario_->intent);
  }

  KinematicCheck ik_check() {
    return [this](const Pose& target) {
      std::ostringstream key;
      key << std::lround(target.position.x() * 200) << ',' << std::lround(target.position.y() * 200) << ','
          << std::lround(target.position.z() * 200) << ',' << std::lround(target.orientation.w() * 50) << ','
          << std::lround(target.orientation.x() * 50) << ',' << std::lround(target.orientation.y() * 50) << ','
          << std::lround(target.orientation.z() * 50);
      auto it = ik_cache_.find(key.str());
      if (it != ik_cache_.end()) return it->second;
      arm::ServoConfig sc = scenario_->servo;
      const bool ok = arm::solve_ik(model_, target, arm_.q, sc).converged;
      ik_cache_.emplace(key.str(), ok);
      return ok;
    };
  }

  // ---- assistance while holding

  static GraspSpec placement_envelope(const Pose& goal) {
    GraspSpec g;
    g.name = "place";
    g.goal_pose = goal;
    g.approach_dir = Vec3::UnitZ();
    return g;
  }

  /// Assistance with an object in hand. Returns true when an affordance
  /// constrains the motion outright (D = A).
  bool held_assist(const UserCommand& cmd, const Pose& e, const Pose& u, Pose& a, double& confidence,
                   std::optional<GraspSpec>& engaged, std::vector<WorldEvent>& events) {
    const Scenario& s = *scenario_;
    World& w = *world_;
    AffordanceState& st = w.affordance();
    const double dt = s.dt();
    const std::string held = w.held()->instance_id;
    const Quat carry = w.held()->tool_orientation;

    if (w.door() && held == s.target) {
      st.engaged = true;
      st.holding = true;
      const bool was_unlatched = st.unlatched;
      project_affordance(cmd, *w.door(), st, dt, s.arbitration.user_speed_limit);
      if (!was_unlatched && st.unlatched) events.push_back({"door_unlatched", ""});
      a = compose(w.handle_pose(st.door_angle), inverse(w.held()->grip));
      return true;
    }
    if (w.pour() && w.find(held)->model->pourable) {
      const auto& p = w.pour()->pour;
      if (st.engaged) {
        st.holding = true;
        const bool was_poured = w.status().poured;
        st.measured_tilt = angular_distance(e.orientation, p.pour_pose.orientation);
        project_affordance(cmd, *w.pour(), st, dt, s.arbitration.user_speed_limit);
        if (!was_poured && st.pour_time >= s.tuning.pour_hold_time) {
          w.status().poured = true;
          events.push_back({"poured", held});
        }
        if (!st.engaged) {
          if (w.status().poured && !w.status().upright) {
            w.status().upright = true;
            events.push_back({"upright", held});
          }
          a = u;
          return false;
        }
        const Quat tilt(Eigen::AngleAxisd(st.tilt, p.rotation_axis));
        a = Pose(p.pour_pose.position, tilt * p.pour_pose.orientation);
        return true;
      }
      if (w.status().poured) return false;
      const GraspSpec env = placement_envelope(p.pour_pose);
      if (const auto r = rank_grasps({env}, e, s.intent)) {
        a = p.pour_pose;
        confidence = 1.0 - r->t;
        engaged = env;
      }
      if ((e.position - p.pour_pose.position).norm() <= p.capture_radius &&
          angular_distance(e.orientation, p.pour_pose.orientation) <= deg2rad(10.0)) {
        st = AffordanceState{};
        st.engaged = true;
        st.holding = true;
        events.push_back({"pour_engaged", held});
        a = p.pour_pose;
        return true;
      }
      return false;
    }
    if (const auto rp = w.release_point(e)) {
      const GraspSpec env = placement_envelope(Pose(*rp, carry));
      const auto r = rank_grasps({env}, e, s.intent);
      if (r) {
        a = env.goal_pose;
        confidence = 1.0 - r->t;
        engaged = env;
      } else if (latched_place_ && (e.position - *rp).norm() < kLatchRadius) {
        a = env.goal_pose;
        confidence = 1.0;
        engaged = env;
      }
      latched_place_ = engaged.has_value();
    }
    return false;
  }

  void track_pour(const Pose& e, double t, std::vector<WorldEvent>& events) {
    World& w = *world_;
    if (!w.pour()) return;
    const auto& st = w.affordance();
    if (st.engaged && st.tilt > 0.0)
      w.status().tilted_translation =
          std::max(w.status().tilted_translation, (e.position - w.pour()->pour.pour_pose.position).norm());
    if (w.status().upright && w.held() && !w.status().finished &&
        (e.position - return_point_).norm() <= scenario_->tuning.return_tolerance) {
      events.push_back({"returned", ""});
      w.succeed(t, events);
    }
  }

  std::unique_ptr<Scenario> scenario_;
  std::uint64_t seed_;
  std::shared_ptr<const perception::TemplateSet> templates_;
  Mode mode_ = Mode::ait;
  json pending_changes_ = json::object();
  arm::ArmModel model_;
  std::unique_ptr<World> world_;
  arm::ArmState arm_;
  HandState hand_;
  BreakawayTracker breakaway_;
  GoalPosterior posterior_;
  bool reset_posterior_ = false;
  std::optional<IntentEstimate> latched_;
  bool latched_place_ = false;
  std::vector<Track> tracks_;
  int next_track_ = 0;
  std::map<std::string, bool> ik_cache_;
  perception::Camera camera_;
  perception::DetectionConfig det_cfg_;
  std::size_t perception_period_ = 10;
  std::size_t tick_ = 0;
  double path_length_ = 0.0;
  Quat ref_orientation_ = Quat::Identity();
  Vec3 return_point_ = Vec3::Zero();
};

}  // namespace ait::harness
