#pragma once

#include "ait/errors.hpp"
#include "ait/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ait {

struct UserCommand {
  Twist v_u;                  // angular part is zero under 4-DoF input
  double grasp_velocity = 0;  // +close / -open, nominally in [-1, 1]
};

/// Arbitration parameters. The sigmoid's (a, o) are derived from the two
/// interpretable knobs alpha_min = alpha(I=1) and epsilon = 1 - alpha(I=0).
struct ArbitrationConfig {
  double alpha_min = 0.3;
  double epsilon = 0.01;
  double a = 0.0;
  double o = 0.0;
  double breakaway_angle = deg2rad(120.0);
  double breakaway_duration = 0.5;
  double breakaway_alpha = 0.9;
  double user_speed_limit = 0.3;
  double breakaway_min_speed_fraction = 0.2;

  static ArbitrationConfig from_endpoints(double alpha_min, double epsilon) {
    ArbitrationConfig c;
    c.alpha_min = alpha_min;
    c.epsilon = epsilon;
    c.derive_sigmoid();
    return c;
  }

  void derive_sigmoid() {
    if (!(alpha_min > 0.0 && alpha_min <= 1.0)) throw ValidationError("arbitration", "alpha_min must lie in (0,1]");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ValidationError("arbitration", "epsilon must lie in (0,0.5)");
    if (alpha_min >= 1.0 - epsilon) {
      // no assistance range left: alpha is pinned at 1
      o = -kFullUser;
      a = 0.0;
      return;
    }
    o = std::log(1.0 / alpha_min - 1.0);
    a = o + std::log((1.0 - epsilon) / epsilon);
  }

  bool pinned_to_user() const { return alpha_min >= 1.0 - epsilon; }

  void validate() const {
    if (!(alpha_min > 0.0 && alpha_min <= 1.0)) throw ValidationError("arbitration", "alpha_min must lie in (0,1]");
    if (!(breakaway_alpha >= alpha_min)) throw ValidationError("arbitration", "breakaway_alpha must be >= alpha_min");
    if (!pinned_to_user() && !(a > 0.0)) throw ValidationError("arbitration", "sigmoid slope a must be positive");
    if (!(user_speed_limit > 0.0)) throw ValidationError("arbitration", "user_speed_limit must be positive");
  }

  static constexpr double kFullUser = 50.0;
};

/// U: the current end-effector pose advanced by the (speed-limited) user twist.
inline Pose user_target_pose(const Pose& e, const UserCommand& cmd, double dt, double speed_limit) {
  if (!(dt > 0.0)) throw ContractViolation("user_target_pose: dt must be positive");
  Twist v = clamp_twist(cmd.v_u, speed_limit, kPi);
  Pose u = e;
  u.position += v.linear * dt;
  if (v.angular.squaredNorm() > 0.0) u.orientation = (quat_from_rotvec(v.angular * dt) * e.orientation).normalized();
  return u;
}

/// User authority alpha(I) = 1 / (1 + exp(-a (1 - I) + o)).
inline double alpha(double confidence, const ArbitrationConfig& cfg) {
  if (cfg.pinned_to_user()) return 1.0;
  const double i = std::clamp(confidence, 0.0, 1.0);
  return 1.0 / (1.0 + std::exp(-cfg.a * (1.0 - i) + cfg.o));
}

/// D = (1 - alpha) A + alpha U on SE(3).
inline Pose blend(const Pose& assist, const Pose& user, double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw ContractViolation("blend: alpha outside [0,1]");
  return interpolate_pose(assist, user, a);
}

/// Tracks sustained disagreement between user motion and the assistance direction.
struct BreakawayTracker {
  double disagree_time = 0.0;
  double agree_time = 0.0;
  bool engaged = false;
};

/// Advances the tracker and returns the lower bound on alpha for this tick.
inline double check_breakaway(BreakawayTracker& tr, const Vec3& v_u, const Vec3& assist_direction, double dt,
                              const ArbitrationConfig& cfg) {
  constexpr double eps = 1e-9;
  const bool fast = v_u.norm() > cfg.breakaway_min_speed_fraction * cfg.user_speed_limit;
  const bool disagree = fast && assist_direction.norm() > 1e-12 && angle_between(v_u, assist_direction) > cfg.breakaway_angle;
  if (!tr.engaged) {
    tr.disagree_time = disagree ? tr.disagree_time + dt : 0.0;
    if (tr.disagree_time + eps >= cfg.breakaway_duration) {
      tr.engaged = true;
      tr.agree_time = 0.0;
    }
  } else {
    tr.agree_time = disagree ? 0.0 : tr.agree_time + dt;
    if (tr.agree_time + eps >= cfg.breakaway_duration) {
      tr.engaged = false;
      tr.disagree_time = 0.0;
    }
  }
  return tr.engaged ? cfg.breakaway_alpha : cfg.alpha_min;
}

// ---------------------------------------------------------------------------
// Hand assistance

enum class HandMode { free, preshaped, suppress_close, squeezing, releasing };
enum class EnvelopeStatus { outside, inside, at_grasp };

inline std::string to_string(HandMode m) {
  switch (m) {
    case HandMode::free: return "free";
    case HandMode::preshaped: return "preshaped";
    case HandMode::suppress_close: return "suppress_close";
    case HandMode::squeezing: return "squeezing";
    case HandMode::releasing: return "releasing";
  }
  return "?";
}

struct HandConfig {
  double aperture_rate = 1.2;   // aperture units per second at full grasp velocity
  double release_threshold = 0.5;
  double filter_time_constant = 0.3;
  double close_deadband = 0.1;  // |signal| below this is neither open nor close
  double open_target = 1.0;     // aperture reached when releasing
};

/// Hand assist state. `aperture` is the commanded aperture (1 open, 0 closed).
struct HandState {
  HandMode mode = HandMode::free;
  double aperture = 1.0;
  double filtered_grasp_signal = 0.0;
  double preshape = 0.6;  // preshape of the grasp currently engaged
};

/// One tick of the hand assist state machine.
///   outside            -> free: the user's grasp velocity drives the aperture
///   entering envelope  -> preshaped: aperture set to the grasp preshape
///   inside, not at grasp -> suppress_close: close signals ignored, opening honored
///   at_grasp + close   -> squeezing: driven closed and held
///   squeezing + filtered signal below -threshold -> releasing -> free
inline HandState step_hand(const HandState& h, const UserCommand& cmd, EnvelopeStatus env, bool holding, double dt,
                           const HandConfig& cfg, double grasp_preshape) {
  if (!(dt > 0.0)) throw ContractViolation("step_hand: dt must be positive");
  HandState out = h;
  const double g = cmd.grasp_velocity;
  const double blend_factor = 1.0 - std::exp(-dt / cfg.filter_time_constant);
  out.filtered_grasp_signal += (g - out.filtered_grasp_signal) * blend_factor;
  const bool closing = g > cfg.close_deadband;
  const bool opening = g < -cfg.close_deadband;
  const double step = cfg.aperture_rate * dt;

  switch (h.mode) {
    case HandMode::squeezing:
      if (out.filtered_grasp_signal < -cfg.release_threshold) {
        out.mode = HandMode::releasing;
        out.aperture = std::min(1.0, h.aperture + step);
      } else if (!holding && env == EnvelopeStatus::outside && opening) {
        // squeezed on nothing and moved away: hand back to the user
        out.mode = HandMode::free;
        out.aperture = std::min(1.0, h.aperture + step * std::abs(g));
      } else {
        out.aperture = 0.0;
      }
      return out;
    case HandMode::releasing:
      out.aperture = std::min(cfg.open_target, h.aperture + step);
      if (out.aperture >= cfg.open_target - 1e-12 || (!holding && out.aperture >= grasp_preshape)) {
        out.mode = HandMode::free;
        out.filtered_grasp_signal = 0.0;
      }
      return out;
    default: break;
  }

  switch (env) {
    case EnvelopeStatus::outside:
      out.mode = HandMode::free;
      out.aperture = std::clamp(h.aperture - g * step, 0.0, 1.0);
      break;
    case EnvelopeStatus::inside:
      if (h.mode == HandMode::free) {
        out.mode = HandMode::preshaped;
        out.preshape = grasp_preshape;
        out.aperture = grasp_preshape;
      } else {
        out.mode = HandMode::suppress_close;
        out.aperture = opening ? std::min(1.0, h.aperture - g * step) : h.aperture;
      }
      break;
    case EnvelopeStatus::at_grasp:
      if (closing) {
        out.mode = HandMode::squeezing;
        out.aperture = 0.0;
      } else if (h.mode == HandMode::free) {
        out.mode = HandMode::preshaped;
        out.preshape = grasp_preshape;
        out.aperture = grasp_preshape;
      } else {
        out.mode = HandMode::suppress_close;
        out.aperture = opening ? std::min(1.0, h.aperture - g * step) : h.aperture;
      }
      break;
  }
  return out;
}

}  // namespace ait
