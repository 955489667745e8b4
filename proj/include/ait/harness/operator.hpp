#pragma once

#include "ait/arbitration.hpp"
#include "ait/harness/scenario.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

namespace ait::harness {

inline constexpr int kOperatorSchemaVersion = 1;

enum class OperatorKind { rational, noisy, erratic, scripted_replay };

inline std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::rational: return "rational";
    case OperatorKind::noisy: return "noisy";
    case OperatorKind::erratic: return "erratic";
    case OperatorKind::scripted_replay: return "scripted_replay";
  }
  return "?";
}

struct OperatorConfig {
  std::string id = "operator";
  OperatorKind kind = OperatorKind::rational;
  double noise_sigma = 0.0;        // m/s per axis, stationary
  double noise_correlation = 0.3;  // s; 0 gives white noise
  double latency = 0.0;            // s
  double dropout_prob = 0.0;       // per tick
  double gain = 2.0;               // 1/s
  double speed_limit = 0.3;        // m/s
  std::string goal_id;             // overrides the scenario target when set
  // grasp-signal policy
  double grasp_noise = 0.0;   // per-tick std of the grasp signal
  double reach_radius = 0.015;
  double close_timeout = 1.5;
  double hold_signal = 0.0;   // grasp signal while carrying
  // approach geometry
  double hover_height = 0.12;
  double lift_height = 0.15;
  // erratic bursts
  double burst_prob = 0.02;
  double burst_duration = 0.3;
  double burst_scale = 0.3;
  // scripted replay
  std::string replay_log;
  std::vector<UserCommand> replay;
  json source;

  void validate() const {
    if (!(noise_sigma >= 0.0)) throw ValidationError(id, "noise_sigma must be >= 0");
    if (!(noise_correlation >= 0.0)) throw ValidationError(id, "noise_correlation must be >= 0");
    if (!(latency >= 0.0)) throw ValidationError(id, "latency must be >= 0");
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw ValidationError(id, "dropout_prob must lie in [0,1)");
    if (!(gain > 0.0)) throw ValidationError(id, "gain must be positive");
    if (!(speed_limit > 0.0)) throw ValidationError(id, "speed_limit must be positive");
    if (!(grasp_noise >= 0.0)) throw ValidationError(id, "grasp_noise must be >= 0");
    if (!(burst_prob >= 0.0 && burst_prob < 1.0)) throw ValidationError(id, "burst_prob must lie in [0,1)");
  }
};

inline OperatorKind parse_operator_kind(const std::string& s, const std::string& path) {
  if (s == "rational") return OperatorKind::rational;
  if (s == "noisy") return OperatorKind::noisy;
  if (s == "erratic") return OperatorKind::erratic;
  if (s == "scripted_replay") return OperatorKind::scripted_replay;
  throw ParseError(path, "unknown operator kind '" + s + "'");
}

inline OperatorConfig operator_from_json(const json& doc) {
  const JsonCursor c(doc, "");
  c.require_object();
  const auto version = c.at("schema_version").integer();
  if (version != kOperatorSchemaVersion) throw ParseError("schema_version", "unsupported version " + std::to_string(version));
  OperatorConfig o;
  o.source = doc;
  o.id = c.string("id", o.id);
  o.kind = parse_operator_kind(c.string("kind"), "kind");
  o.noise_sigma = c.number("noise_sigma", o.noise_sigma);
  o.noise_correlation = c.number("noise_correlation", o.noise_correlation);
  o.latency = c.number("latency", o.latency);
  o.dropout_prob = c.number("dropout_prob", o.dropout_prob);
  o.gain = c.number("gain", o.gain);
  o.speed_limit = c.number("speed_limit", o.speed_limit);
  o.goal_id = c.string("goal_id", "");
  o.grasp_noise = c.number("grasp_noise", o.grasp_noise);
  o.reach_radius = c.number("reach_radius", o.reach_radius);
  o.close_timeout = c.number("close_timeout", o.close_timeout);
  o.hold_signal = c.number("hold_signal", o.hold_signal);
  o.hover_height = c.number("hover_height", o.hover_height);
  o.lift_height = c.number("lift_height", o.lift_height);
  o.burst_prob = c.number("burst_prob", o.burst_prob);
  o.burst_duration = c.number("burst_duration", o.burst_duration);
  o.burst_scale = c.number("burst_scale", o.burst_scale);
  o.replay_log = c.string("replay_log", "");
  o.validate();
  return o;
}

inline json operator_to_json(const OperatorConfig& o) {
  json j{{"schema_version", kOperatorSchemaVersion},
         {"id", o.id},
         {"kind", to_string(o.kind)},
         {"noise_sigma", o.noise_sigma},
         {"noise_correlation", o.noise_correlation},
         {"latency", o.latency},
         {"dropout_prob", o.dropout_prob},
         {"gain", o.gain},
         {"speed_limit", o.speed_limit},
         {"grasp_noise", o.grasp_noise},
         {"reach_radius", o.reach_radius},
         {"close_timeout", o.close_timeout},
         {"hold_signal", o.hold_signal},
         {"hover_height", o.hover_height},
         {"lift_height", o.lift_height},
         {"burst_prob", o.burst_prob},
         {"burst_duration", o.burst_duration},
         {"burst_scale", o.burst_scale}};
  if (!o.goal_id.empty()) j["goal_id"] = o.goal_id;
  if (!o.replay_log.empty()) j["replay_log"] = o.replay_log;
  return j;
}

/// What a scripted operator can see of the world: ground truth, as a person
/// watching the arm would.
struct OperatorView {
  double t = 0.0;
  Task task = Task::arat_transfer;
  Pose ee;
  bool holding = false;
  bool holding_target = false;
  Vec3 grasp_point = Vec3::Zero();    // tool position that grasps the designated object
  std::optional<Vec3> release_point;  // tool position at which to let go
  std::optional<Vec3> pour_point;
  Vec3 pour_command_axis = Vec3::UnitX();
  bool pour_engaged = false;
  bool poured = false;
  Vec3 return_point = Vec3::Zero();
  Vec3 door_pull_dir = Vec3::Zero();
  bool door_unlatched = false;
  bool task_done = false;
};

enum class Phase { approach, descend, close, reopen, lift, transport, lower, release, retreat, pull, pour, depart, go_home, done };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::approach: return "approach";
    case Phase::descend: return "descend";
    case Phase::close: return "close";
    case Phase::reopen: return "reopen";
    case Phase::lift: return "lift";
    case Phase::transport: return "transport";
    case Phase::lower: return "lower";
    case Phase::release: return "release";
    case Phase::retreat: return "retreat";
    case Phase::pull: return "pull";
    case Phase::pour: return "pour";
    case Phase::depart: return "depart";
    case Phase::go_home: return "go_home";
    case Phase::done: return "done";
  }
  return "?";
}

struct PolicyOutput {
  std::optional<Vec3> target;       // position to steer toward
  Vec3 velocity = Vec3::Zero();     // used when no target
  double grasp = 0.0;
};

/// Phase machine of a cooperative operator performing the scenario task.
class TaskPolicy {
 public:
  PolicyOutput step(const OperatorView& v, const OperatorConfig& c, double dt) {
    phase_time_ += dt;
    const Vec3 x = v.ee.position;
    const Vec3 hover = v.grasp_point + Vec3(0, 0, c.hover_height);
    PolicyOutput out;
    if (v.task_done) enter(Phase::done, x);
    // lost the object mid-carry: go back for it
    const bool carrying = phase_ == Phase::lift || phase_ == Phase::transport || phase_ == Phase::lower ||
                          phase_ == Phase::pull || phase_ == Phase::pour || phase_ == Phase::depart ||
                          phase_ == Phase::go_home;
    if (carrying && !v.holding && phase_ != Phase::done) enter(Phase::reopen, x);

    switch (phase_) {
      case Phase::approach:
        out.target = hover;
        if (v.holding) enter(Phase::lift, x);
        else if (horizontal(x - hover) < 0.03 && x.z() > v.grasp_point.z()) enter(Phase::descend, x);
        break;
      case Phase::descend:
        out.target = v.grasp_point;
        if ((x - v.grasp_point).norm() < c.reach_radius) enter(Phase::close, x);
        else if (phase_time_ > 8.0) enter(Phase::approach, x);
        break;
      case Phase::close:
        out.target = v.grasp_point;
        out.grasp = 1.0;
        if (v.holding) enter(v.task == Task::door_open ? Phase::pull : Phase::lift, x);
        else if (phase_time_ > c.close_timeout) enter(Phase::reopen, x);
        break;
      case Phase::reopen:
        out.target = hover;
        out.grasp = -1.0;
        if (phase_time_ > 0.6 && !v.holding) enter(Phase::approach, x);
        break;
      case Phase::lift:
        out.target = anchor_ + Vec3(0, 0, c.lift_height);
        out.grasp = c.hold_signal;
        if (x.z() > anchor_.z() + c.lift_height - 0.02) {
          if (v.task == Task::multi_object_grasp) enter(Phase::done, x);
          else enter(Phase::transport, x);
        }
        break;
      case Phase::transport: {
        out.grasp = c.hold_signal;
        const Vec3 goal = destination(v) + Vec3(0, 0, 0.08);
        out.target = goal;
        if (horizontal(x - goal) < 0.025 && x.z() > goal.z() - 0.09) enter(Phase::lower, x);
        break;
      }
      case Phase::lower: {
        out.grasp = c.hold_signal;
        const Vec3 goal = destination(v);
        out.target = goal;
        if (v.task == Task::pour) {
          if (v.pour_engaged) enter(Phase::pour, x);
        } else if ((x - goal).norm() < 0.02) {
          enter(Phase::release, x);
        }
        break;
      }
      case Phase::release:
        out.target = anchor_;
        out.grasp = -1.0;
        if (!v.holding) enter(Phase::retreat, x);
        break;
      case Phase::retreat:
        out.target = anchor_ + Vec3(0, 0, 0.1);
        if ((x - *out.target).norm() < 0.02) enter(v.task == Task::box_blocks ? Phase::approach : Phase::done, x);
        break;
      case Phase::pull:
        out.grasp = c.hold_signal;
        if (v.door_unlatched) out.velocity = v.door_pull_dir * (0.5 * c.speed_limit);
        break;
      case Phase::pour:
        out.grasp = c.hold_signal;
        out.velocity = v.pour_command_axis * (0.5 * c.speed_limit);
        if (v.poured) enter(Phase::depart, x);
        break;
      case Phase::depart:
        out.grasp = c.hold_signal;
        out.velocity = Vec3(0, 0, 0.5 * c.speed_limit);
        if (!v.pour_engaged) enter(Phase::go_home, x);
        break;
      case Phase::go_home:
        out.grasp = c.hold_signal;
        out.target = v.return_point;
        break;
      case Phase::done:
        out.target = anchor_;
        break;
    }
    return out;
  }

  Phase phase() const { return phase_; }

 private:
  static double horizontal(const Vec3& d) { return d.head<2>().norm(); }

  static Vec3 destination(const OperatorView& v) {
    if (v.task == Task::pour && v.pour_point) return *v.pour_point;
    if (v.release_point) return *v.release_point;
    return v.ee.position;
  }

  void enter(Phase p, const Vec3& x) {
    if (p == phase_) return;
    phase_ = p;
    phase_time_ = 0.0;
    anchor_ = x;
  }

  Phase phase_ = Phase::approach;
  double phase_time_ = 0.0;
  Vec3 anchor_ = Vec3::Zero();
};

/// Scripted stand-in for a decoded velocity stream. Deterministic per seed.
class Operator {
 public:
  Operator(OperatorConfig cfg, std::uint64_t seed, double dt)
      : cfg_(std::move(cfg)), dt_(dt), rng_(seed ^ 0x6f70657261746f72ULL) {
    cfg_.validate();
    delay_ticks_ = static_cast<std::size_t>(std::lround(cfg_.latency / dt_));
  }

  UserCommand tick(const OperatorView& v) {
    const std::size_t index = tick_++;
    if (cfg_.kind == OperatorKind::scripted_replay)
      return index < cfg_.replay.size() ? cfg_.replay[index] : UserCommand{};

    const PolicyOutput p = policy_.step(v, cfg_, dt_);
    Vec3 vel = p.target ? Vec3(cfg_.gain * (*p.target - v.ee.position)) : p.velocity;
    if (vel.norm() > cfg_.speed_limit) vel *= cfg_.speed_limit / vel.norm();
    UserCommand cmd;
    cmd.grasp_velocity = p.grasp;
    if (cfg_.kind != OperatorKind::rational) {
      cmd.v_u.linear = vel + velocity_noise();
      if (cfg_.grasp_noise > 0.0) cmd.grasp_velocity += cfg_.grasp_noise * normal_(rng_);
      if (cfg_.kind == OperatorKind::erratic) cmd.v_u.linear += burst();
    } else {
      cmd.v_u.linear = vel;
    }
    if (cfg_.kind != OperatorKind::rational) {
      // dropout is drawn every tick so the stream does not depend on the outcome
      const bool dropped = uniform_(rng_) < cfg_.dropout_prob;
      if (dropped) cmd = UserCommand{};
    }
    if (delay_ticks_ == 0) return cmd;
    pipe_.push_back(cmd);
    if (pipe_.size() <= delay_ticks_) return UserCommand{};
    const UserCommand out = pipe_.front();
    pipe_.pop_front();
    return out;
  }

  const OperatorConfig& config() const { return cfg_; }
  Phase phase() const { return policy_.phase(); }

 private:
  Vec3 velocity_noise() {
    const Vec3 draw(normal_(rng_), normal_(rng_), normal_(rng_));
    if (cfg_.noise_sigma == 0.0) return Vec3::Zero();
    if (cfg_.noise_correlation <= 0.0) return cfg_.noise_sigma * draw;
    // Ornstein-Uhlenbeck with stationary std noise_sigma
    const double a = std::exp(-dt_ / cfg_.noise_correlation);
    noise_ = a * noise_ + cfg_.noise_sigma * std::sqrt(1.0 - a * a) * draw;
    return noise_;
  }

  /// Heavy-tailed bursts: a Cauchy-sized kick in a uniformly random direction,
  /// held for burst_duration.
  Vec3 burst() {
    const double start = uniform_(rng_);
    const Vec3 dir(normal_(rng_), normal_(rng_), normal_(rng_));
    const double size = std::tan(kPi * (uniform_(rng_) - 0.5));
    if (burst_left_ <= 0.0 && start < cfg_.burst_prob && dir.norm() > 1e-12) {
      burst_left_ = cfg_.burst_duration;
      burst_vec_ = dir.normalized() * std::min(std::abs(size) * cfg_.burst_scale, 3.0 * cfg_.speed_limit);
    }
    if (burst_left_ <= 0.0) return Vec3::Zero();
    burst_left_ -= dt_;
    return burst_vec_;
  }

  OperatorConfig cfg_;
  double dt_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  TaskPolicy policy_;
  std::deque<UserCommand> pipe_;
  std::size_t delay_ticks_ = 0;
  std::size_t tick_ = 0;
  Vec3 noise_ = Vec3::Zero();
  double burst_left_ = 0.0;
  Vec3 burst_vec_ = Vec3::Zero();
};

}  // namespace ait::harness
