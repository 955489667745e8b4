#include "ait/affordance.hpp"
#include "ait/arbitration.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ait;

namespace {

UserCommand move(const Vec3& v, double grasp = 0.0) {
  UserCommand c;
  c.v_u.linear = v;
  c.grasp_velocity = grasp;
  return c;
}

Affordance door() {
  Affordance a;
  a.kind = AffordanceKind::door_hinge;
  a.hinge.axis_point = Vec3::Zero();
  a.hinge.axis_dir = Vec3::UnitZ();
  a.hinge.radius = 0.7;
  return a;
}

Affordance pour() {
  Affordance a;
  a.kind = AffordanceKind::pour_target;
  a.pour.command_axis = Vec3::UnitY();
  a.pour.rotation_axis = -Vec3::UnitX();
  return a;
}

AffordanceState engaged_state() {
  AffordanceState st;
  st.engaged = true;
  st.holding = true;
  return st;
}

}  // namespace

TEST(UserTarget, AdvancesBySpeedLimitedTwist) {
  const Pose e = Pose::translation(0.5, 0, 0.3);
  const Pose u = user_target_pose(e, move(Vec3(1, 0, 0)), 0.02, 0.3);
  EXPECT_NEAR((u.position - Vec3(0.506, 0, 0.3)).norm(), 0.0, 1e-12);
  EXPECT_EQ(u.orientation.coeffs(), e.orientation.coeffs());
  EXPECT_THROW(user_target_pose(e, move(Vec3::Zero()), 0.0, 0.3), ContractViolation);
}

TEST(Alpha, EndpointsMatchKnobs) {
  for (double amin : {0.1, 0.3, 0.5, 0.8})
    for (double eps : {0.001, 0.01, 0.1}) {
      const auto cfg = ArbitrationConfig::from_endpoints(amin, eps);
      EXPECT_NEAR(alpha(1.0, cfg), amin, 1e-12);
      EXPECT_NEAR(alpha(0.0, cfg), 1.0 - eps, 1e-12);
    }
}

TEST(Alpha, MonotoneDecreasingInConfidence) {
  const auto cfg = ArbitrationConfig::from_endpoints(0.3, 0.01);
  double prev = 2.0;
  for (int i = 0; i <= 1000; ++i) {
    const double a = alpha(i / 1000.0, cfg);
    EXPECT_LT(a, prev);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0);
    prev = a;
  }
  EXPECT_EQ(alpha(-1.0, cfg), alpha(0.0, cfg));
  EXPECT_EQ(alpha(2.0, cfg), alpha(1.0, cfg));
}

TEST(Alpha, PinnedWhenNoAssistanceRange) {
  const auto cfg = ArbitrationConfig::from_endpoints(1.0, 0.01);
  EXPECT_EQ(alpha(1.0, cfg), 1.0);
  EXPECT_EQ(alpha(0.3, cfg), 1.0);
  EXPECT_THROW(ArbitrationConfig::from_endpoints(0.0, 0.01), ValidationError);
  EXPECT_THROW(ArbitrationConfig::from_endpoints(0.3, 0.6), ValidationError);
}

TEST(Blend, EndpointsAreAssistAndUser) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const Pose a = test::random_pose(rng), u = test::random_pose(rng);
    EXPECT_LE(test::pose_distance(blend(a, u, 0.0), a), 1e-12);
    EXPECT_LE(test::pose_distance(blend(a, u, 1.0), u), 1e-12);
    const Pose m = blend(a, u, 0.3);
    EXPECT_NEAR((m.position - a.position).norm(), 0.3 * (u.position - a.position).norm(), 1e-12);
  }
  EXPECT_THROW(blend(Pose{}, Pose{}, 1.5), ContractViolation);
}

TEST(Breakaway, EngagesAfterSustainedDisagreement) {
  ArbitrationConfig cfg = ArbitrationConfig::from_endpoints(0.3, 0.01);
  BreakawayTracker tr;
  const Vec3 toward(1, 0, 0), away(-0.3, 0, 0);
  const double dt = 0.02;
  const int needed = static_cast<int>(std::round(cfg.breakaway_duration / dt));
  for (int i = 1; i < needed; ++i) ASSERT_EQ(check_breakaway(tr, away, toward, dt, cfg), cfg.alpha_min) << i;
  EXPECT_EQ(check_breakaway(tr, away, toward, dt, cfg), cfg.breakaway_alpha);
  // agreement must also be sustained before disengaging
  for (int i = 1; i < needed; ++i) ASSERT_EQ(check_breakaway(tr, -away, toward, dt, cfg), cfg.breakaway_alpha);
  EXPECT_EQ(check_breakaway(tr, -away, toward, dt, cfg), cfg.alpha_min);
}

TEST(Breakaway, InterruptionResetsTimer) {
  ArbitrationConfig cfg = ArbitrationConfig::from_endpoints(0.3, 0.01);
  BreakawayTracker tr;
  const Vec3 toward(1, 0, 0), away(-0.3, 0, 0);
  for (int i = 0; i < 20; ++i) check_breakaway(tr, away, toward, 0.02, cfg);
  check_breakaway(tr, toward, toward, 0.02, cfg);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(check_breakaway(tr, away, toward, 0.02, cfg), cfg.alpha_min);
}

TEST(Breakaway, SlowOrOrthogonalMotionIgnored) {
  ArbitrationConfig cfg = ArbitrationConfig::from_endpoints(0.3, 0.01);
  BreakawayTracker tr;
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(check_breakaway(tr, Vec3(-0.01, 0, 0), Vec3(1, 0, 0), 0.02, cfg), cfg.alpha_min);  // too slow
    EXPECT_EQ(check_breakaway(tr, Vec3(0, 0.3, 0), Vec3(1, 0, 0), 0.02, cfg), cfg.alpha_min);    // 90 degrees
  }
}

TEST(Hand, PreshapesOnEntryAndSqueezesAtGrasp) {
  const HandConfig cfg;
  HandState h;
  h = step_hand(h, move(Vec3::Zero()), EnvelopeStatus::inside, false, 0.02, cfg, 0.6);
  EXPECT_EQ(h.mode, HandMode::preshaped);
  EXPECT_EQ(h.aperture, 0.6);
  h = step_hand(h, move(Vec3::Zero(), 1.0), EnvelopeStatus::inside, false, 0.02, cfg, 0.6);
  EXPECT_EQ(h.mode, HandMode::suppress_close);
  EXPECT_EQ(h.aperture, 0.6);  // close ignored before the grasp pose
  h = step_hand(h, move(Vec3::Zero(), 1.0), EnvelopeStatus::at_grasp, false, 0.02, cfg, 0.6);
  EXPECT_EQ(h.mode, HandMode::squeezing);
  EXPECT_EQ(h.aperture, 0.0);
  int ticks = 0;
  while (h.mode != HandMode::free) {
    h = step_hand(h, move(Vec3::Zero(), -1.0), EnvelopeStatus::at_grasp, true, 0.02, cfg, 0.6);
    ASSERT_LT(++ticks, 200);
  }
  EXPECT_NEAR(h.aperture, 1.0, 1e-12);
}

TEST(Hand, ExhaustiveTransitionsRespectInvariants) {
  const HandConfig cfg;
  const std::vector<HandMode> modes{HandMode::free, HandMode::preshaped, HandMode::suppress_close, HandMode::squeezing,
                                    HandMode::releasing};
  const std::vector<EnvelopeStatus> envs{EnvelopeStatus::outside, EnvelopeStatus::inside, EnvelopeStatus::at_grasp};
  for (auto m : modes)
    for (auto env : envs)
      for (bool holding : {false, true})
        for (double g : {-1.0, -0.05, 0.0, 0.05, 1.0})
          for (double ap : {0.0, 0.3, 0.6, 1.0})
            for (double filt : {-0.8, 0.0, 0.8}) {
              HandState h;
              h.mode = m;
              h.aperture = ap;
              h.filtered_grasp_signal = filt;
              const HandState n = step_hand(h, move(Vec3::Zero(), g), env, holding, 0.02, cfg, 0.6);
              SCOPED_TRACE(to_string(m) + " g=" + std::to_string(g) + " ap=" + std::to_string(ap));
              ASSERT_GE(n.aperture, 0.0);
              ASSERT_LE(n.aperture, 1.0);
              // squeezing starts only from a close command at the grasp pose
              if (n.mode == HandMode::squeezing && m != HandMode::squeezing) {
                EXPECT_EQ(env, EnvelopeStatus::at_grasp);
                EXPECT_GT(g, cfg.close_deadband);
              }
              // inside the envelope short of the grasp the hand never closes further
              if (env == EnvelopeStatus::inside && (m == HandMode::preshaped || m == HandMode::suppress_close))
                EXPECT_GE(n.aperture, ap);
              // the user keeps direct control outside every envelope
              if (env == EnvelopeStatus::outside && m != HandMode::squeezing && m != HandMode::releasing)
                EXPECT_EQ(n.mode, HandMode::free);
              // releasing only opens
              if (m == HandMode::releasing) EXPECT_GE(n.aperture, ap);
            }
}

TEST(Door, LeverTurnsBeforeSwing) {
  const Affordance d = door();
  AffordanceState st = engaged_state();
  st.closed_handle_point = Vec3(0.7, 0, 0);
  const auto first = project_affordance(move(Vec3(0, 0.2, 0)), d, st, 0.02, 0.3);
  EXPECT_FALSE(first.translation_released);
  EXPECT_EQ(first.linear, Vec3::Zero());
  EXPECT_EQ(st.door_angle, 0.0);
  int ticks = 1;
  while (!st.unlatched) {
    project_affordance(move(Vec3(0, 0.2, 0)), d, st, 0.02, 0.3);
    ASSERT_LT(++ticks, 100);
  }
  EXPECT_NEAR(ticks * 0.02, d.hinge.handle_turn_time, 0.021);
}

TEST(Door, ProjectionIsIdempotentAndTangent) {
  const Affordance d = door();
  std::mt19937_64 rng(32);
  for (int i = 0; i < 200; ++i) {
    AffordanceState st = engaged_state();
    st.closed_handle_point = Vec3(0.7, 0, 0);
    st.unlatched = true;
    st.door_angle = std::uniform_real_distribution<double>(0.05, 1.5)(rng);
    const Vec3 tangent = hinge_tangent(hinge_point_at(st.door_angle, st.closed_handle_point, d.hinge), d.hinge);
    AffordanceState copy = st;
    const Vec3 v = test::random_vec(rng, 0.1);
    const auto once = project_affordance(move(v), d, st, 0.02, 0.3);
    const auto twice = project_affordance(move(once.linear), d, copy, 0.02, 0.3);
    EXPECT_LE((once.linear - twice.linear).norm(), 1e-12);
    EXPECT_LE(once.linear.cross(tangent).norm(), 1e-12);
    EXPECT_NEAR(st.door_angle, copy.door_angle, 1e-12);
  }
}

TEST(Door, StopsAtSwingLimits) {
  const Affordance d = door();
  AffordanceState st = engaged_state();
  st.closed_handle_point = Vec3(0.7, 0, 0);
  st.unlatched = true;
  st.door_angle = d.hinge.swing_max;
  const Vec3 handle = hinge_point_at(st.door_angle, st.closed_handle_point, d.hinge);
  const Vec3 opening = hinge_tangent(handle, d.hinge);
  EXPECT_EQ(project_affordance(move(0.2 * opening), d, st, 0.02, 0.3).linear, Vec3::Zero());
  EXPECT_LT((project_affordance(move(-0.2 * opening), d, st, 0.02, 0.3).linear + 0.2 * opening).norm(), 1e-12);
  st.door_angle = d.hinge.swing_min;
  EXPECT_EQ(project_affordance(move(-0.2 * hinge_tangent(st.closed_handle_point, d.hinge)), d, st, 0.02, 0.3).linear,
            Vec3::Zero());
}

TEST(Door, AngleFollowsArcLength) {
  const Affordance d = door();
  AffordanceState st = engaged_state();
  st.closed_handle_point = Vec3(0.7, 0, 0);
  st.unlatched = true;
  for (int i = 0; i < 50; ++i) {
    const Vec3 handle = hinge_point_at(st.door_angle, st.closed_handle_point, d.hinge);
    project_affordance(move(0.14 * hinge_tangent(handle, d.hinge)), d, st, 0.02, 0.3);
  }
  EXPECT_NEAR(st.door_angle, 50 * 0.02 * 0.14 / 0.7, 1e-9);
  EXPECT_NEAR(hinge_angle(hinge_point_at(st.door_angle, st.closed_handle_point, d.hinge), st.closed_handle_point, d.hinge),
              st.door_angle, 1e-12);
}

TEST(Pour, TiltFollowsCommandAndReturnsUprightBeforeRelease) {
  const Affordance p = pour();
  AffordanceState st = engaged_state();
  const double dt = 0.02;
  for (int i = 0; i < 300; ++i) {
    const auto c = project_affordance(move(Vec3(0, 0.3, 0)), p, st, dt, 0.3);
    ASSERT_FALSE(c.translation_released);
    ASSERT_EQ(c.linear, Vec3::Zero());
    ASSERT_LE(st.tilt, p.pour.max_tilt + 1e-12);
  }
  EXPECT_NEAR(st.tilt, p.pour.max_tilt, 1e-12);
  EXPECT_GT(st.pour_time, 0.0);
  // sideways departure: tilt back first
  int ticks = 0;
  for (;;) {
    const double before = st.tilt;
    const auto c = project_affordance(move(Vec3(0.3, 0, 0)), p, st, dt, 0.3);
    if (c.translation_released) {
      EXPECT_EQ(before, 0.0);
      EXPECT_FALSE(st.engaged);
      EXPECT_NEAR(c.linear.x(), 0.3, 1e-12);
      break;
    }
    EXPECT_LT(c.tilt_rate, 0.0);
    ASSERT_LT(++ticks, 1000);
  }
  EXPECT_NEAR(ticks * dt, p.pour.max_tilt / p.pour.upright_rate, dt + 1e-9);
}

TEST(Pour, MeasuredTiltGatesPouring) {
  const Affordance p = pour();
  AffordanceState st = engaged_state();
  st.measured_tilt = 0.5;
  for (int i = 0; i < 300; ++i) project_affordance(move(Vec3(0, 0.3, 0)), p, st, 0.02, 0.3);
  EXPECT_NEAR(st.tilt, 0.5 + kTiltLead, 1e-12);
  EXPECT_EQ(st.pour_time, 0.0);
  // commanded tilt at zero but the tool still tilted: keep uprighting
  st.tilt = 0.0;
  st.measured_tilt = 0.3;
  const auto c = project_affordance(move(Vec3(0.3, 0, 0)), p, st, 0.02, 0.3);
  EXPECT_FALSE(c.translation_released);
  st.measured_tilt = 0.0;
  EXPECT_TRUE(project_affordance(move(Vec3(0.3, 0, 0)), p, st, 0.02, 0.3).translation_released);
}

TEST(Affordance, RequiresActiveGrasp) {
  AffordanceState st;
  EXPECT_THROW(project_affordance(move(Vec3::Zero()), pour(), st, 0.02, 0.3), ContractViolation);
  st.engaged = true;
  EXPECT_THROW(project_affordance(move(Vec3::Zero()), pour(), st, 0.02, 0.3), ContractViolation);
}
