#pragma once

#include "ait/geometry.hpp"
#include "ait/model_library.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ait {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Returns true when the arm can reach the pose. Used for the kinematic feasibility term.
using KinematicCheck = std::function<bool(const Pose&)>;

struct IntentConfig {
  double k_t = 1.0;
  double k_r = 1.0;
  double cost_threshold = 2.0;
  double kin_reach_radius = 0.95;
  Vec3 base_position = Vec3::Zero();
  std::map<std::string, double> prior;  // empty: uniform over whatever goals are offered

  void validate() const {
    if (!(k_t > 0.0) || !(k_r > 0.0)) throw ValidationError("intent", "k_t and k_r must be positive");
    if (!(cost_threshold > 0.0)) throw ValidationError("intent", "cost_threshold must be positive");
    if (!(kin_reach_radius > 0.0)) throw ValidationError("intent", "kin_reach_radius must be positive");
    if (!prior.empty()) {
      double sum = 0.0;
      for (const auto& [id, p] : prior) {
        if (!(p >= 0.0)) throw ValidationError("intent", "prior entries must be non-negative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("intent", "prior must sum to 1");
    }
  }
};

// ---------------------------------------------------------------------------
// Capture envelopes

/// Axial coordinate of x_E along the approach axis, measured from the goal.
inline double axial_coordinate(const Vec3& x_e, const GraspSpec& g) {
  return (x_e - g.goal_pose.position).dot(g.approach_dir);
}

/// Normalized progress along the approach axis: 0 at the goal, 1 at the launch position.
inline double progress_t(const Vec3& x_e, const GraspSpec& g) {
  return std::clamp(axial_coordinate(x_e, g) / g.launch_distance, 0.0, 1.0);
}

/// Truncated cone with apex at the goal, axis along the approach direction,
/// spanning axial coordinates [cone_near_offset, launch_distance].
inline bool in_envelope(const Vec3& x_e, const GraspSpec& g) {
  const double axial = axial_coordinate(x_e, g);
  if (axial < g.cone_near_offset || axial > g.launch_distance) return false;
  const Vec3 rel = x_e - g.goal_pose.position;
  return angle_between(rel, g.approach_dir) <= g.cone_half_angle;
}

inline double translation_cost(const Vec3& x_e, const GraspSpec& g) {
  return in_envelope(x_e, g) ? progress_t(x_e, g) : kInf;
}

/// Similarity of orientations, 1 when equal, 0 when 180 degrees apart.
inline double rotation_similarity(const Quat& q_g, const Quat& q_e) { return quat_abs_dot(q_g, q_e); }

inline double kinematic_cost(const GraspSpec& g, const IntentConfig& cfg, const KinematicCheck& ik) {
  if ((g.goal_pose.position - cfg.base_position).norm() > cfg.kin_reach_radius) return kInf;
  if (ik && !ik(g.goal_pose)) return kInf;
  return 0.0;
}

/// c_g = k_t c_tran / (k_r c_rot) + c_kin, infinite when any term is infeasible.
inline double grasp_cost(const GraspSpec& g, const Pose& e, const IntentConfig& cfg, const KinematicCheck& ik = {}) {
  const double c_tran = translation_cost(e.position, g);
  if (!std::isfinite(c_tran)) return kInf;
  const double c_rot = rotation_similarity(g.goal_pose.orientation, e.orientation);
  if (c_rot <= 1e-12) return kInf;
  const double c_kin = kinematic_cost(g, cfg, ik);
  if (!std::isfinite(c_kin)) return kInf;
  return cfg.k_t * c_tran / (cfg.k_r * c_rot) + c_kin;
}

struct RankedGrasp {
  std::size_t index = 0;  // position in the input list
  double cost = kInf;
  double t = 1.0;
};

/// All finite-cost grasps under the threshold, cheapest first. Ties go to the
/// smaller progress, then to the earlier library entry.
inline std::vector<RankedGrasp> rank_all_grasps(const std::vector<GraspSpec>& grasps, const Pose& e,
                                                const IntentConfig& cfg, const KinematicCheck& ik = {}) {
  std::vector<RankedGrasp> ranked;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const double c = grasp_cost(grasps[i], e, cfg, ik);
    if (std::isfinite(c) && c <= cfg.cost_threshold) ranked.push_back({i, c, progress_t(e.position, grasps[i])});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedGrasp& a, const RankedGrasp& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.t != b.t) return a.t < b.t;
    return a.index < b.index;
  });
  return ranked;
}

inline std::optional<RankedGrasp> rank_grasps(const std::vector<GraspSpec>& grasps, const Pose& e,
                                              const IntentConfig& cfg, const KinematicCheck& ik = {}) {
  auto ranked = rank_all_grasps(grasps, e, cfg, ik);
  if (ranked.empty()) return std::nullopt;
  return ranked.front();
}

// ---------------------------------------------------------------------------
// Goal posterior over multiple objects

struct GoalPoint {
  std::string id;
  Vec3 position;
};

struct PosteriorEntry {
  std::string goal_id;
  double probability = 0.0;
};

/// Posterior over goals given the executed trajectory. Straight-line distance
/// is the optimal cost-to-go, so the likelihood of goal G after moving from S
/// to E along a path of length L is exp(-(L + |G-E| - |G-S|)).
struct GoalPosterior {
  std::vector<PosteriorEntry> entries;
  double trajectory_cost_so_far = 0.0;
  Pose start_pose;
  Pose last_pose;

  double probability(const std::string& id) const {
    for (const auto& e : entries)
      if (e.goal_id == id) return e.probability;
    return 0.0;
  }

  double max_probability() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.probability);
    return m;
  }
};

inline double prior_for(const IntentConfig& cfg, const std::string& id, std::size_t n_goals) {
  if (cfg.prior.empty()) return 1.0 / static_cast<double>(n_goals);
  auto it = cfg.prior.find(id);
  return it == cfg.prior.end() ? 0.0 : it->second;
}

/// Fresh posterior anchored at `start`: equal to the prior.
inline GoalPosterior reset_posterior(const Pose& start, const std::vector<GoalPoint>& goals, const IntentConfig& cfg) {
  GoalPosterior p;
  p.start_pose = start;
  p.last_pose = start;
  double sum = 0.0;
  for (const auto& g : goals) {
    const double pr = prior_for(cfg, g.id, goals.size());
    p.entries.push_back({g.id, pr});
    sum += pr;
  }
  if (sum > 0.0)
    for (auto& e : p.entries) e.probability /= sum;
  return p;
}

/// Log-domain evaluation of the posterior for a trajectory of length `len`
/// from `start` to `current`.
inline std::vector<PosteriorEntry> posterior_for(double len, const Vec3& start, const Vec3& current,
                                                 const std::vector<GoalPoint>& goals, const IntentConfig& cfg) {
  std::vector<double> logs(goals.size());
  double best = -kInf;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const double pr = prior_for(cfg, goals[i].id, goals.size());
    const double exponent = -(len + (goals[i].position - current).norm() - (goals[i].position - start).norm());
    logs[i] = pr > 0.0 ? std::log(pr) + exponent : -kInf;
    best = std::max(best, logs[i]);
  }
  std::vector<PosteriorEntry> out(goals.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const double w = std::isfinite(best) ? std::exp(logs[i] - best) : 1.0;
    out[i] = {goals[i].id, w};
    sum += w;
  }
  for (auto& e : out) e.probability /= sum;
  return out;
}

/// Appends `new_pose` to the running trajectory and re-evaluates every goal.
inline GoalPosterior update_posterior(const GoalPosterior& p, const Pose& new_pose, const std::vector<GoalPoint>& goals,
                                      const IntentConfig& cfg) {
  if (goals.empty()) throw ContractViolation("update_posterior: no goals");
  GoalPosterior out = p;
  out.trajectory_cost_so_far += (new_pose.position - p.last_pose.position).norm();
  out.last_pose = new_pose;
  out.entries =
      posterior_for(out.trajectory_cost_so_far, out.start_pose.position, new_pose.position, goals, cfg);
  return out;
}

/// Most probable goal; exact ties go to the lexicographically smaller id.
inline std::string select_goal(const GoalPosterior& p) {
  if (p.entries.empty()) throw ContractViolation("select_goal: empty posterior");
  const PosteriorEntry* best = &p.entries.front();
  for (const auto& e : p.entries) {
    if (e.probability > best->probability || (e.probability == best->probability && e.goal_id < best->goal_id))
      best = &e;
  }
  return best->goal_id;
}

// ---------------------------------------------------------------------------

struct IntentEstimate {
  std::string goal_id;
  GraspSpec grasp;        // world frame
  std::size_t grasp_index = 0;
  Pose assist_pose;       // automated desired pose A
  double confidence = 0;  // I = 1 - t
  double t = 1.0;
  double cost = 0.0;
};

/// Candidate object as seen by the intent layer.
struct SceneObject {
  std::string instance_id;
  std::string model_id;
  Pose pose;
};

/// Goal selection followed by capture-envelope ranking on the selected object.
inline std::optional<IntentEstimate> estimate_intent(const GoalPosterior& p, const Pose& e,
                                                     const std::vector<SceneObject>& scene, const ModelLibrary& lib,
                                                     const IntentConfig& cfg, const KinematicCheck& ik = {}) {
  if (p.entries.empty()) return std::nullopt;
  const std::string goal = select_goal(p);
  const auto it = std::find_if(scene.begin(), scene.end(), [&](const SceneObject& o) { return o.instance_id == goal; });
  if (it == scene.end()) return std::nullopt;
  const auto grasps = grasps_for(lib, it->model_id, it->pose);
  const auto best = rank_grasps(grasps, e, cfg, ik);
  if (!best) return std::nullopt;
  IntentEstimate est;
  est.goal_id = goal;
  est.grasp = grasps[best->index];
  est.grasp_index = best->index;
  est.assist_pose = est.grasp.goal_pose;
  est.t = progress_t(e.position, est.grasp);
  est.confidence = 1.0 - est.t;
  est.cost = best->cost;
  return est;
}

}  // namespace ait
