#include <doctest.h>

#include "ttgoals/env.hpp"

using namespace ttgoals;
using namespace ttgoals::env;

namespace {

EnvConfig frozen_cfg() {
  EnvConfig c;
  c.init_perturbation = 0.0;
  return c;
}

Eigen::VectorXd row(const Eigen::VectorXd& stacked, int r, int width) {
  return stacked.segment(r * width, width);
}

}  // namespace

TEST_CASE("observation sizes") {
  CHECK(observation_size(ObsLayout::flat_vel, 8) == 16);
  CHECK(observation_size(ObsLayout::flat, 8) == 13);
  CHECK(observation_size(ObsLayout::stacked, 8) == 8 * 13);
  CHECK(goal_stride(ObsLayout::stacked, 8) == 13);
  CHECK(goal_stride(ObsLayout::flat_vel, 6) == 14);
  CHECK(parse_layout(to_string(ObsLayout::stacked)) == ObsLayout::stacked);
  CHECK_THROWS_AS(parse_layout("wide"), ConfigError);
}

TEST_CASE("substeps and config validation") {
  EnvConfig c;
  CHECK(c.substeps() == 10);
  c.control_hz = 50;
  CHECK(c.substeps() == 20);
  c.control_hz = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EnvConfig{};
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("reset: zero perturbation, determinism, narrow launch") {
  EnvConfig c = frozen_cfg();
  Env e(c);
  e.reset(1, Vec2(-0.7, 0.1));
  CHECK(e.state().robot.q == c.chain.home);

  c.init_perturbation = 0.05;
  Env a(c), b(c);
  const Eigen::VectorXd oa = a.reset(42, Vec2(-0.5, 0.0));
  const Eigen::VectorXd ob = b.reset(42, Vec2(-0.5, 0.0));
  CHECK(oa == ob);
  CHECK(a.state().ball.vel == b.state().ball.vel);
  CHECK((a.state().robot.q - c.chain.home).cwiseAbs().maxCoeff() <= 0.05);

  Vec3 launch = a.state().throw_spec.launch_pos;
  bool speeds_differ = false;
  const double s0 = a.state().throw_spec.speed;
  for (std::uint64_t s = 0; s < 20; ++s) {
    a.reset(s, Vec2::Zero());
    CHECK(a.state().throw_spec.launch_pos == launch);
    speeds_differ = speeds_differ || a.state().throw_spec.speed != s0;
  }
  CHECK(speeds_differ);
}

TEST_CASE("goal occupies the last two observation slots") {
  for (ObsLayout lay : {ObsLayout::flat_vel, ObsLayout::flat}) {
    EnvConfig c;
    c.layout = lay;
    Env e(c);
    const Eigen::VectorXd o = e.reset(3, Vec2(-0.9, 0.4));
    CHECK(o.size() == c.obs_size());
    CHECK(o.tail<2>() == Vec2(-0.9, 0.4));
    CHECK(o.head<3>() == e.state().ball.pos);
  }
}

TEST_CASE("stacked history pads at reset and matches flat snapshots") {
  EnvConfig c;
  c.layout = ObsLayout::stacked;
  Env e(c);
  const int J = c.joints(), W = J + 5;
  const Eigen::VectorXd o0 = e.reset(5, Vec2(-0.6, -0.2));
  REQUIRE(o0.size() == kStackDepth * W);
  for (int r = 1; r < kStackDepth; ++r) CHECK(row(o0, r, W) == row(o0, 0, W));

  auto snapshot = [&] {
    // Flat layout reordered to [q, ball pos, goal].
    const Eigen::VectorXd f = e.build_observation(ObsLayout::flat);
    Eigen::VectorXd s(W);
    s << f.segment(3, J), f.head<3>(), f.tail<2>();
    return s;
  };
  std::vector<Eigen::VectorXd> snaps{snapshot()};
  Rng rng(1);
  for (int t = 0; t < 30 && !e.terminal(); ++t) {
    Eigen::VectorXd cmd = c.chain.home;
    cmd[2] = uniform(rng, -0.3, 0.3);
    const Eigen::VectorXd o = e.step(cmd).obs;
    snaps.push_back(snapshot());
    const int n = static_cast<int>(snaps.size());
    for (int r = 0; r < kStackDepth; ++r) {
      const int idx = std::max(0, n - kStackDepth + r);
      CHECK(row(o, r, W) == snaps[idx]);
    }
  }
}

TEST_CASE("frozen robot: own-side bounce keeps the episode alive") {
  EnvConfig c = frozen_cfg();
  Env e(c);
  e.reset(7, Vec2(-0.7, 0.0));
  bool bounced = false;
  int steps = 0;
  while (!e.terminal()) {
    const StepResult r = e.step(c.chain.home);
    ++steps;
    if (r.events.has(Event::bounce)) {
      bounced = true;
      CHECK(e.state().ball.pos.x() > 0.0);
      CHECK_FALSE(r.terminal);
    }
  }
  CHECK(bounced);
  CHECK(steps <= c.max_steps);
  CHECK(e.state().events.terminal_count() == 1);
  CHECK_THROWS_AS(e.step(c.chain.home), EnvError);
}

TEST_CASE("run_episode with a frozen policy and zero noise") {
  EnvConfig c = frozen_cfg();
  ConstantActor actor(c.chain.home);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(c.joints());
  const Trajectory a = run_episode(c, actor, Vec2(-0.7, 0.2), zero, 11);
  const Trajectory b = run_episode(c, actor, Vec2(-0.7, 0.2), zero, 11);
  REQUIRE(a.length() > 0);
  CHECK(a.length() == b.length());
  for (int i = 0; i < a.length(); ++i) {
    CHECK(a.steps[i].obs == b.steps[i].obs);
    CHECK(a.steps[i].act == c.chain.home);
  }
  CHECK_FALSE(a.hit_index);
  CHECK_FALSE(a.events.has(Event::hit));
  CHECK(a.goal);
  CHECK(a.events == b.events);
}

TEST_CASE("recorded actions include the noise vector") {
  EnvConfig c = frozen_cfg();
  ConstantActor actor(c.chain.home);
  Eigen::VectorXd noise = Eigen::VectorXd::Constant(c.joints(), 0.01);
  const Trajectory t = run_episode(c, actor, Vec2(-0.7, 0.2), noise, 3);
  for (const Step& s : t.steps) CHECK((s.act - (c.chain.home + noise)).norm() == 0.0);
}

TEST_CASE("event names round-trip and terminal causes are exclusive") {
  EventSet s;
  s.add(Event::hit);
  s.add(Event::landed);
  CHECK(EventSet::from_names(s.names()) == s);
  CHECK(s.terminal());
  CHECK(s.terminal_count() == 1);
  CHECK_FALSE(EventSet{}.terminal());
  CHECK_THROWS(EventSet::from_names({"teleport"}));
}

TEST_CASE("replay reproduces the ball path") {
  EnvConfig c;
  ConstantActor actor(c.chain.home);
  const Trajectory t = run_episode(c, actor, Vec2(-0.7, 0.2), Eigen::VectorXd::Zero(c.joints()), 19);
  const auto path = replay_ball_path(c, t);
  REQUIRE(path.size() > 1);
  Env e(c);
  e.record_path(true);
  e.reset(t.meta.seed, Vec2(-0.7, 0.2));
  for (const Step& s : t.steps) e.step(s.act);
  REQUIRE(e.ball_path().size() == path.size());
  CHECK(e.ball_path().back().pos == path.back().pos);
}
