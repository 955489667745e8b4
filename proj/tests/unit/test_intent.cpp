#include "ait/intent.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ait;

namespace {

// Top-down grasp at the origin, approach from +z.
GraspSpec top_grasp() {
  GraspSpec g;
  g.name = "top";
  g.goal_pose = Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(kPi, Vec3::UnitY())));
  g.approach_dir = Vec3::UnitZ();
  return g;
}

// Independent posterior: plain products, no log-domain tricks.
std::vector<double> posterior_oracle(const std::vector<Vec3>& path, const std::vector<Vec3>& goals,
                                     const std::vector<double>& prior) {
  long double len = 0.0L;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  std::vector<long double> w(goals.size());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const long double dg = (goals[i] - path.back()).norm(), ds = (goals[i] - path.front()).norm();
    w[i] = prior[i] * std::exp(-(len + dg - ds));
    sum += w[i];
  }
  std::vector<double> out;
  for (auto x : w) out.push_back(static_cast<double>(x / sum));
  return out;
}

}  // namespace

TEST(Envelope, ProgressAlongAxis) {
  const GraspSpec g = top_grasp();
  EXPECT_DOUBLE_EQ(progress_t(Vec3(0, 0, 0.2), g), 1.0);
  EXPECT_DOUBLE_EQ(progress_t(Vec3(0, 0, 0.1), g), 0.5);
  EXPECT_DOUBLE_EQ(progress_t(Vec3(0, 0, 0.0), g), 0.0);
  EXPECT_DOUBLE_EQ(progress_t(Vec3(0, 0, 0.5), g), 1.0);
  EXPECT_DOUBLE_EQ(progress_t(Vec3(0, 0, -0.1), g), 0.0);
}

TEST(Envelope, ConeMembership) {
  const GraspSpec g = top_grasp();
  EXPECT_TRUE(in_envelope(Vec3(0, 0, 0.1), g));
  EXPECT_TRUE(in_envelope(Vec3(0, 0, 0.2), g));
  EXPECT_FALSE(in_envelope(Vec3(0, 0, 0.21), g));
  EXPECT_FALSE(in_envelope(Vec3(0, 0, 0.01), g));  // inside the near offset
  const double edge = 0.1 * std::tan(g.cone_half_angle);
  EXPECT_TRUE(in_envelope(Vec3(edge * 0.99, 0, 0.1), g));
  EXPECT_FALSE(in_envelope(Vec3(edge * 1.01, 0, 0.1), g));
  EXPECT_FALSE(in_envelope(Vec3(0, 0, -0.1), g));
}

TEST(GraspCost, ClosedForm) {
  const GraspSpec g = top_grasp();
  IntentConfig cfg;
  cfg.k_t = 2.0;
  cfg.k_r = 0.5;
  const Quat tilt = g.goal_pose.orientation * Quat(Eigen::AngleAxisd(0.6, Vec3::UnitX()));
  const Pose e(Vec3(0.01, 0, 0.12), tilt);
  const double t = 0.12 / 0.2;
  const double sim = std::cos(0.3);
  EXPECT_NEAR(grasp_cost(g, e, cfg), 2.0 * t / (0.5 * sim), 1e-12);
}

TEST(GraspCost, InfeasibleCases) {
  const GraspSpec g = top_grasp();
  IntentConfig cfg;
  cfg.base_position = Vec3(0.3, 0, 0);
  EXPECT_EQ(grasp_cost(g, Pose(Vec3(0.2, 0, 0.1), g.goal_pose.orientation), cfg), kInf);  // outside cone
  Quat opposite = g.goal_pose.orientation * Quat(Eigen::AngleAxisd(kPi, Vec3::UnitX()));
  EXPECT_EQ(grasp_cost(g, Pose(Vec3(0, 0, 0.1), opposite), cfg), kInf);  // zero similarity
  const Pose ok(Vec3(0, 0, 0.1), g.goal_pose.orientation);
  EXPECT_TRUE(std::isfinite(grasp_cost(g, ok, cfg)));
  EXPECT_EQ(grasp_cost(g, ok, cfg, [](const Pose&) { return false; }), kInf);
  cfg.base_position = Vec3(2, 0, 0);
  EXPECT_EQ(grasp_cost(g, ok, cfg), kInf);  // out of reach
}

TEST(GraspCost, ScaleInvariantInGains) {
  std::mt19937_64 rng(21);
  const GraspSpec g = top_grasp();
  for (int i = 0; i < 200; ++i) {
    IntentConfig a;
    a.k_t = 0.5;
    a.k_r = 2.0;
    IntentConfig b = a;
    b.k_t *= 7.0;
    b.k_r *= 7.0;
    const Pose e(Vec3(0, 0, 0.05) + test::random_vec(rng, 0.03), test::random_quat(rng));
    const double ca = grasp_cost(g, e, a), cb = grasp_cost(g, e, b);
    if (std::isfinite(ca)) EXPECT_NEAR(ca, cb, 1e-12 * std::max(1.0, ca));
    else EXPECT_EQ(cb, kInf);
  }
}

TEST(GraspCost, MonotoneInProgress) {
  const GraspSpec g = top_grasp();
  const IntentConfig cfg;
  double prev = 0.0;
  for (double z = 0.03; z <= 0.2; z += 0.01) {
    const double c = grasp_cost(g, Pose(Vec3(0, 0, z), g.goal_pose.orientation), cfg);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(GraspCost, RigidMotionInvariant) {
  std::mt19937_64 rng(22);
  const GraspSpec g = top_grasp();
  const IntentConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const Pose frame(test::random_vec(rng, 0.2), test::random_quat(rng));
    const Pose e(Vec3(0, 0, 0.05) + test::random_vec(rng, 0.04), test::random_quat(rng));
    const double before = grasp_cost(g, e, cfg);
    const double after = grasp_cost(g.transformed(frame), compose(frame, e), cfg);
    if (std::isfinite(before)) EXPECT_NEAR(before, after, 1e-9);
    else EXPECT_EQ(after, kInf);
  }
}

TEST(RankGrasps, PicksCheapestAndBreaksTies) {
  GraspSpec a = top_grasp();
  GraspSpec b = top_grasp();
  b.name = "top_copy";
  GraspSpec c = top_grasp();
  c.name = "far";
  c.goal_pose.position = Vec3(1, 0, 0);
  IntentConfig cfg;
  const Pose e(Vec3(0, 0, 0.1), a.goal_pose.orientation);
  const auto r = rank_grasps({c, a, b}, e, cfg);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->index, 1u);  // equal cost and progress: earlier entry wins
  EXPECT_NEAR(r->cost, 0.5, 1e-12);
  cfg.cost_threshold = 0.4;
  EXPECT_FALSE(rank_grasps({a}, e, cfg));
  EXPECT_FALSE(rank_grasps({}, e, cfg));
}

TEST(Posterior, MatchesClosedForm) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> ng(2, 5);
    std::vector<GoalPoint> goals;
    std::vector<Vec3> goal_pos;
    const int n = ng(rng);
    for (int i = 0; i < n; ++i) {
      goal_pos.push_back(test::random_vec(rng, 0.5));
      goals.push_back({"g" + std::to_string(i), goal_pos.back()});
    }
    const IntentConfig cfg;
    std::vector<Vec3> path{test::random_vec(rng, 0.5)};
    GoalPosterior p = reset_posterior(Pose(path.back(), Quat::Identity()), goals, cfg);
    for (int k = 0; k < 30; ++k) {
      path.push_back(path.back() + test::random_vec(rng, 0.03));
      p = update_posterior(p, Pose(path.back(), Quat::Identity()), goals, cfg);
    }
    const auto oracle = posterior_oracle(path, goal_pos, std::vector<double>(n, 1.0 / n));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(p.entries[i].probability, oracle[i], 1e-9);
      sum += p.entries[i].probability;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Posterior, NonUniformPrior) {
  const std::vector<GoalPoint> goals{{"a", Vec3(0.5, 0, 0)}, {"b", Vec3(0, 0.5, 0)}};
  IntentConfig cfg;
  cfg.prior = {{"a", 0.8}, {"b", 0.2}};
  cfg.validate();
  GoalPosterior p = reset_posterior(Pose::identity(), goals, cfg);
  EXPECT_NEAR(p.probability("a"), 0.8, 1e-15);
  p = update_posterior(p, Pose::translation(0.1, 0.1, 0), goals, cfg);
  const auto oracle = posterior_oracle({Vec3::Zero(), Vec3(0.1, 0.1, 0)}, {goals[0].position, goals[1].position}, {0.8, 0.2});
  EXPECT_NEAR(p.probability("a"), oracle[0], 1e-12);
  cfg.prior = {{"a", 0.8}, {"b", 0.3}};
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Posterior, WanderingBackReturnsToPrior) {
  const std::vector<GoalPoint> goals{{"a", Vec3(0.5, 0, 0)}, {"b", Vec3(-0.5, 0, 0)}};
  const IntentConfig cfg;
  GoalPosterior p = reset_posterior(Pose::identity(), goals, cfg);
  p = update_posterior(p, Pose::translation(0.2, 0, 0), goals, cfg);
  EXPECT_GT(p.probability("a"), 0.5);
  p = update_posterior(p, Pose::identity(), goals, cfg);
  EXPECT_NEAR(p.probability("a"), 0.5, 1e-12);
}

TEST(Posterior, MovingTowardGoalRaisesIt) {
  const std::vector<GoalPoint> goals{{"a", Vec3(0.5, 0, 0)}, {"b", Vec3(0, 0.5, 0)}, {"c", Vec3(-0.5, 0, 0)}};
  const IntentConfig cfg;
  GoalPosterior p = reset_posterior(Pose::identity(), goals, cfg);
  double prev = p.probability("a");
  for (int k = 1; k <= 10; ++k) {
    p = update_posterior(p, Pose::translation(0.04 * k, 0, 0), goals, cfg);
    EXPECT_GT(p.probability("a"), prev);
    prev = p.probability("a");
  }
  EXPECT_EQ(select_goal(p), "a");
}

TEST(Posterior, LongPathsStayFinite) {
  const std::vector<GoalPoint> goals{{"a", Vec3(0.5, 0, 0)}, {"b", Vec3(0, 0.5, 0)}};
  const IntentConfig cfg;
  GoalPosterior p = reset_posterior(Pose::identity(), goals, cfg);
  for (int k = 0; k < 20000; ++k) p = update_posterior(p, Pose::translation(0.05 * (k % 2), 0, 0), goals, cfg);
  EXPECT_GT(p.trajectory_cost_so_far, 900.0);
  EXPECT_NEAR(p.probability("a") + p.probability("b"), 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(p.probability("a")));
}

TEST(SelectGoal, TiesGoToSmallerId) {
  GoalPosterior p;
  p.entries = {{"zeta", 0.5}, {"alpha", 0.5}};
  EXPECT_EQ(select_goal(p), "alpha");
  EXPECT_THROW(select_goal(GoalPosterior{}), ContractViolation);
}

TEST(EstimateIntent, UsesSelectedObjectGrasps) {
  const ModelLibrary lib = load_library_string(R"({"schema_version": 1, "objects": [{
    "id": "cube", "shape": {"type": "box", "extents": [0.05, 0.05, 0.05]},
    "grasps": [{"name": "top", "goal_pose": {"position": [0, 0, 0.025], "orientation": [0, 0, 1, 0]},
                "approach_dir": [0, 0, 1]}]}]})");
  const std::vector<SceneObject> scene{{"obj0", "cube", Pose::translation(0.5, 0, 0.025)},
                                       {"obj1", "cube", Pose::translation(0.5, 0.3, 0.025)}};
  const std::vector<GoalPoint> goals{{"obj0", scene[0].pose.position}, {"obj1", scene[1].pose.position}};
  IntentConfig cfg;
  cfg.kin_reach_radius = 2.0;
  GoalPosterior p = reset_posterior(Pose::translation(0.5, 0.15, 0.3), goals, cfg);
  const Pose e(Vec3(0.5, 0.0, 0.15), Quat(Eigen::AngleAxisd(kPi, Vec3::UnitY())));
  p = update_posterior(p, e, goals, cfg);
  const auto est = estimate_intent(p, e, scene, lib, cfg);
  ASSERT_TRUE(est);
  EXPECT_EQ(est->goal_id, "obj0");
  EXPECT_NEAR((est->assist_pose.position - Vec3(0.5, 0, 0.05)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(est->t, 0.5, 1e-12);
  EXPECT_NEAR(est->confidence, 0.5, 1e-12);
}
