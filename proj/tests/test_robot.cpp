#include <doctest.h>

#include <cmath>

#include "ttgoals/robot.hpp"
#include "ttgoals/rng.hpp"

using namespace ttgoals;
using namespace ttgoals::robot;

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 rodrigues(const Vec3& k, double a) {
  Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(a) * K + (1 - std::cos(a)) * K * K;
}

// Plain rotation-matrix composition, kept apart from the library's
// Isometry3d path.
PaddlePose fk_oracle(const Chain& c, const Eigen::VectorXd& q) {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  for (int j = 0; j < c.dof(); ++j) {
    const JointSpec& js = c.joints[j];
    p += R * js.origin;
    if (js.kind == JointKind::prismatic) {
      p += R * (js.axis * q[j]);
    } else {
      R = R * rodrigues(js.axis, q[j]);
    }
  }
  return {p + R * c.tool_offset, R * c.normal_local, Vec3::Zero()};
}

Eigen::VectorXd random_q(const Chain& c, Rng& rng) {
  Eigen::VectorXd q(c.dof());
  for (int j = 0; j < c.dof(); ++j) q[j] = uniform(rng, c.joints[j].lo, c.joints[j].hi);
  return q;
}

}  // namespace

TEST_CASE("gantry-arm home pose") {
  const Chain c = gantry_arm_preset();
  REQUIRE(c.dof() == 6);
  const PaddlePose p = forward_kinematics(c, c.home);
  CHECK((p.center - Vec3(1.70, 0.45, 0.0)).norm() < 1e-12);
  CHECK((p.normal - Vec3::UnitY()).norm() < 1e-12);
}

TEST_CASE("forward kinematics matches a hand-composed oracle") {
  Rng rng(3);
  for (const Chain& c : {gantry_arm_preset(), gantry_arm8_preset()}) {
    for (int i = 0; i < 1000; ++i) {
      const Eigen::VectorXd q = random_q(c, rng);
      const PaddlePose a = forward_kinematics(c, q);
      const PaddlePose b = fk_oracle(c, q);
      CHECK((a.center - b.center).norm() < 1e-12);
      CHECK((a.normal - b.normal).norm() < 1e-12);
      CHECK(std::abs(a.normal.norm() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("prismatic and revolute basics") {
  Chain c;
  JointSpec px, pz;
  px.kind = pz.kind = JointKind::prismatic;
  px.axis = Vec3::UnitX();
  pz.axis = Vec3::UnitZ();
  c.joints = {px, pz};
  c.home = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd q(2);
  q << 0.3, 0.1;
  CHECK((forward_kinematics(c, q).center - Vec3(0.3, 0, 0.1)).norm() < 1e-15);

  Chain r;
  JointSpec rz;
  rz.axis = Vec3::UnitZ();
  rz.lo = -2;
  rz.hi = 2;
  r.joints = {rz};
  r.normal_local = Vec3::UnitX();
  r.home = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd a(1);
  a << M_PI / 2;
  CHECK((forward_kinematics(r, a).normal - Vec3::UnitY()).norm() < 1e-12);
  CHECK_THROWS_AS(forward_kinematics(r, Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("track_targets rate limit and clamp") {
  const Chain c = gantry_arm_preset();
  RobotState s{c.home, Eigen::VectorXd::Zero(6), 0.0};
  TrackResult same = track_targets(c, s, c.home, 0.01);
  CHECK(same.state.q == c.home);
  CHECK(same.state.qdot.isZero());

  Eigen::VectorXd cmd = c.home;
  cmd[2] = 1.0;  // max_vel 6 rad/s
  TrackResult r = track_targets(c, s, cmd, 0.01);
  CHECK(r.state.q[2] == doctest::Approx(0.06));
  CHECK(r.state.qdot[2] == doctest::Approx(6.0));
  CHECK_FALSE(r.clamped);

  cmd = c.home;
  cmd[0] = 5.0;
  RobotState st = s;
  bool clamped = false;
  for (int i = 0; i < 100; ++i) {
    TrackResult t = track_targets(c, st, cmd, 0.01);
    st = t.state;
    clamped = clamped || t.clamped;
  }
  CHECK(st.q[0] == doctest::Approx(c.joints[0].hi));
  CHECK(clamped);
}

TEST_CASE("track_targets respects limits and speed on random streams") {
  const Chain c = gantry_arm8_preset();
  Rng rng(9);
  RobotState s{c.home, Eigen::VectorXd::Zero(c.dof()), 0.0};
  const double dt = 0.02;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd cmd(c.dof());
    for (int j = 0; j < c.dof(); ++j) cmd[j] = uniform(rng, -4, 4);
    const RobotState next = track_targets(c, s, cmd, dt).state;
    for (int j = 0; j < c.dof(); ++j) {
      CHECK(next.q[j] >= c.joints[j].lo);
      CHECK(next.q[j] <= c.joints[j].hi);
      CHECK(std::abs(next.q[j] - s.q[j]) <= c.joints[j].max_vel * dt + 1e-12);
    }
    s = next;
  }
}

TEST_CASE("paddle contact reflections") {
  const ContactModel elastic{0.1, 0.02, 1.0, 0.012};
  PaddlePose p;
  p.center = Vec3::Zero();
  p.normal = Vec3(-1, 0, 0);
  physics::BallState b;
  b.pos = Vec3(-0.01, 0.02, 0);
  b.vel = Vec3(5, 1, -0.5);
  const auto out = paddle_contact(b, p, elastic);
  REQUIRE(out);
  CHECK(out->vel.x() == doctest::Approx(-5));
  CHECK(out->vel.y() == doctest::Approx(1));
  CHECK(std::abs(out->vel.norm() - b.vel.norm()) < 1e-9);

  ContactModel dead = elastic;
  dead.restitution = 0.0;
  const auto d = paddle_contact(b, p, dead);
  REQUIRE(d);
  CHECK(std::abs(d->vel.dot(p.normal)) < 1e-12);

  // Moving wall into a resting ball.
  physics::BallState rest;
  rest.pos = Vec3(-0.01, 0, 0);
  p.velocity = Vec3(-2, 0, 0);
  const auto m = paddle_contact(rest, p, elastic);
  REQUIRE(m);
  CHECK((m->vel - Vec3(-4, 0, 0)).norm() < 1e-12);

  // Outside the disc and separating balls are ignored.
  p.velocity.setZero();
  physics::BallState far = b;
  far.pos = Vec3(-0.01, 0.5, 0);
  CHECK_FALSE(paddle_contact(far, p, elastic));
  physics::BallState away = b;
  away.vel = Vec3(-5, 0, 0);
  CHECK_FALSE(paddle_contact(away, p, elastic));
}

TEST_CASE("elastic contact conserves speed on random hits") {
  Rng rng(17);
  const ContactModel elastic{0.1, 0.02, 1.0, 0.012};
  int hits = 0;
  for (int i = 0; i < 500; ++i) {
    PaddlePose p;
    p.normal = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
    physics::BallState b;
    b.pos = p.normal * uniform(rng, -0.02, 0.02);
    b.vel = Vec3(uniform(rng, -6, 6), uniform(rng, -6, 6), uniform(rng, -6, 6));
    const auto out = paddle_contact(b, p, elastic);
    if (!out) continue;
    ++hits;
    CHECK(std::abs(out->vel.norm() - b.vel.norm()) < 1e-9);
  }
  CHECK(hits > 50);
}

TEST_CASE("IK reaches a forward-kinematics pose") {
  const Chain c = gantry_arm_preset();
  Rng rng(4);
  int solved = 0;
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd q = random_q(c, rng);
    q = 0.5 * q;  // stay away from limits
    const PaddlePose target = forward_kinematics(c, q);
    double err = 1.0;
    const Eigen::VectorXd sol = solve_paddle_ik(c, target.center, target.normal, c.home, &err);
    const PaddlePose got = forward_kinematics(c, sol);
    CHECK((sol.array() >= c.lower().array()).all());
    CHECK((sol.array() <= c.upper().array()).all());
    if ((got.center - target.center).norm() < 1e-3) ++solved;
  }
  CHECK(solved >= 25);
}

TEST_CASE("IK keeps locked joints at their seed") {
  const Chain c = gantry_arm_preset();
  Eigen::VectorXd seed = c.home;
  seed[4] = 1.3;
  seed[5] = 0.2;
  IkOptions opt;
  opt.normal_weight = 0.0;
  opt.locked = {4, 5};
  const Eigen::VectorXd q = solve_paddle_ik(c, Vec3(1.6, 0.4, 0.1), Vec3(-1, 0, 0), seed, nullptr, opt);
  CHECK(q[4] == 1.3);
  CHECK(q[5] == 0.2);
}

TEST_CASE("chain validation") {
  Chain c = gantry_arm_preset();
  c.joints[1].lo = 1.0;
  c.joints[1].hi = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = gantry_arm_preset();
  c.joints[2].max_vel = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(chain_preset("nope"), ConfigError);
}
