#include "ttgoals/env.hpp"

#include <algorithm>
#include <cmath>

namespace ttgoals::env {

std::string to_string(ObsLayout layout) {
  switch (layout) {
    case ObsLayout::flat_vel: return "flat_vel";
    case ObsLayout::flat: return "flat";
    case ObsLayout::stacked: return "stacked";
  }
  return "flat_vel";
}

ObsLayout parse_layout(const std::string& name) {
  if (name == "flat_vel") return ObsLayout::flat_vel;
  if (name == "flat") return ObsLayout::flat;
  if (name == "stacked") return ObsLayout::stacked;
  throw ConfigError("unknown observation layout '" + name + "'");
}

int observation_size(ObsLayout layout, int joints) {
  switch (layout) {
    case ObsLayout::flat_vel: return 3 + 3 + joints + 2;
    case ObsLayout::flat: return 3 + joints + 2;
    case ObsLayout::stacked: return kStackDepth * (joints + 5);
  }
  return 0;
}

int goal_stride(ObsLayout layout, int joints) {
  return layout == ObsLayout::stacked ? joints + 5 : observation_size(layout, joints);
}

ThrowPreset narrow_throws() { return ThrowPreset{}; }

ThrowPreset varied_throws() {
  ThrowPreset p;
  p.name = "varied";
  p.launch_lo = Vec3(-1.8, -0.4, 0.25);
  p.launch_hi = Vec3(-1.4, 0.4, 0.45);
  p.target_lo = Vec2(0.6, -0.1);
  p.target_hi = Vec2(1.1, 0.5);
  p.speed_lo = 6.5;
  p.speed_hi = 7.5;
  return p;
}

ThrowPreset throw_preset(const std::string& name) {
  if (name == "narrow") return narrow_throws();
  if (name == "varied") return varied_throws();
  throw ConfigError("unknown throw preset '" + name + "'");
}

ThrowSpec sample_throw(const ThrowPreset& p, Rng& rng) {
  ThrowSpec s;
  for (int i = 0; i < 3; ++i) s.launch_pos[i] = uniform(rng, p.launch_lo[i], p.launch_hi[i]);
  for (int i = 0; i < 2; ++i) s.target_landing[i] = uniform(rng, p.target_lo[i], p.target_hi[i]);
  s.speed = uniform(rng, p.speed_lo, p.speed_hi);
  return s;
}

int EnvConfig::substeps() const {
  return std::max(1, static_cast<int>(std::lround(1.0 / (control_hz * sim_dt))));
}

void EnvConfig::validate() const {
  table.validate();
  drag.validate();
  chain.validate();
  contact.validate();
  if (!(control_hz > 0.0)) throw ConfigError("env: control_hz must be positive");
  if (!(sim_dt > 0.0)) throw ConfigError("env: sim_dt must be positive");
  if (max_steps <= 0) throw ConfigError("env: max_steps must be positive");
  if (!(init_perturbation >= 0.0)) throw ConfigError("env: init perturbation must be >= 0");
  if (!(e_table >= 0.0 && e_table <= 1.0)) throw ConfigError("env: e_table must be in [0,1]");
  if (!(mu_t >= 0.0 && mu_t <= 1.0)) throw ConfigError("env: mu_t must be in [0,1]");
  if (!(landing_margin >= 0.0)) throw ConfigError("env: landing margin must be >= 0");
  if (!(throws.speed_lo > 0.0 && throws.speed_lo <= throws.speed_hi)) {
    throw ConfigError("env: throw speed range invalid");
  }
  if ((throws.launch_hi - throws.launch_lo).minCoeff() < 0.0 ||
      (throws.target_hi - throws.target_lo).minCoeff() < 0.0) {
    throw ConfigError("env: throw preset box bounds reversed");
  }
}

bool EventSet::terminal() const {
  return has(Event::landed) || has(Event::net) || has(Event::out) || has(Event::timeout);
}

int EventSet::terminal_count() const {
  return int(has(Event::landed)) + int(has(Event::net)) + int(has(Event::out)) +
         int(has(Event::timeout));
}

namespace {

constexpr std::pair<Event, const char*> kEventNames[] = {
    {Event::hit, "hit"},   {Event::bounce, "bounce"}, {Event::landed, "landed"},
    {Event::net, "net"},   {Event::out, "out"},       {Event::timeout, "timeout"},
};

}  // namespace

std::vector<std::string> EventSet::names() const {
  std::vector<std::string> out;
  for (const auto& [e, name] : kEventNames) {
    if (has(e)) out.emplace_back(name);
  }
  return out;
}

EventSet EventSet::from_names(const std::vector<std::string>& names) {
  EventSet s;
  for (const auto& n : names) {
    bool found = false;
    for (const auto& [e, name] : kEventNames) {
      if (n == name) {
        s.add(e);
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown event '" + n + "'");
  }
  return s;
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Eigen::VectorXd Env::reset(std::uint64_t seed, const Vec2& goal) {
  Rng rng(seed);
  state_ = EnvState{};
  state_.goal = goal;
  path_.clear();

  ThrowSpec spec;
  Vec3 vel;
  bool solved = false;
  for (int attempt = 0; attempt < 10 && !solved; ++attempt) {
    spec = sample_throw(cfg_.throws, rng);
    try {
      vel = physics::solve_throw(spec, cfg_.drag, cfg_.sim_dt);
      solved = true;
    } catch (const SolverError&) {
    }
  }
  if (!solved) throw EnvError("reset: no solvable throw after 10 samples");
  state_.throw_spec = spec;
  state_.ball.pos = spec.launch_pos;
  state_.ball.vel = vel;
  state_.ball.t = 0.0;

  const robot::Chain& chain = cfg_.chain;
  Eigen::VectorXd q = chain.home;
  const double d = cfg_.init_perturbation;
  for (int i = 0; i < q.size(); ++i) q[i] += d > 0.0 ? uniform(rng, -d, d) : 0.0;
  state_.robot.q = chain.clamp(q);
  state_.robot.qdot = Eigen::VectorXd::Zero(chain.dof());
  state_.robot.t = 0.0;
  state_.paddle = robot::forward_kinematics(chain, state_.robot.q);

  if (record_path_) path_.push_back(state_.ball);
  push_history();
  return observe();
}

void Env::push_history() {
  const int J = cfg_.joints();
  Eigen::VectorXd frame(J + 3);
  frame << state_.robot.q, state_.ball.pos;
  state_.history.push_back(std::move(frame));
  while (static_cast<int>(state_.history.size()) > kStackDepth) state_.history.pop_front();
}

Eigen::VectorXd Env::build_observation(ObsLayout layout) const {
  const int J = cfg_.joints();
  Eigen::VectorXd obs(observation_size(layout, J));
  switch (layout) {
    case ObsLayout::flat_vel:
      obs << state_.ball.pos, state_.ball.vel, state_.robot.q, state_.goal;
      break;
    case ObsLayout::flat:
      obs << state_.ball.pos, state_.robot.q, state_.goal;
      break;
    case ObsLayout::stacked: {
      const int row = J + 5;
      const int have = static_cast<int>(state_.history.size());
      for (int r = 0; r < kStackDepth; ++r) {
        // Row r holds tick (now - 7 + r); missing early ticks repeat the oldest.
        const int idx = std::max(0, have - kStackDepth + r);
        const Eigen::VectorXd& frame = state_.history[idx];
        obs.segment(r * row, J) = frame.head(J);
        obs.segment(r * row + J, 3) = frame.tail(3);
        obs.segment(r * row + J + 3, 2) = state_.goal;
      }
      break;
    }
  }
  return obs;
}

void Env::terminate(Event cause, StepResult& result) {
  state_.events.add(cause);
  result.events.add(cause);
  result.terminal = true;
}

StepResult Env::step(const Eigen::VectorXd& cmd) {
  if (terminal()) throw EnvError("step: episode already terminal");
  if (cmd.size() != cfg_.joints()) throw ShapeError("step: command dimension mismatch");
  if (!cmd.allFinite()) throw EnvError("step: non-finite command");

  StepResult result;
  const double dt = cfg_.sim_dt;
  const physics::TableGeometry& table = cfg_.table;
  const int n_sub = cfg_.substeps();

  for (int s = 0; s < n_sub && !result.terminal; ++s) {
    const BallState prev = state_.ball;
    const Vec3 prev_center = state_.paddle.center;

    const robot::TrackResult tracked = robot::track_targets(cfg_.chain, state_.robot, cmd, dt);
    state_.robot = tracked.state;
    state_.clamped = state_.clamped || tracked.clamped;
    state_.paddle = robot::forward_kinematics(cfg_.chain, state_.robot.q);
    state_.paddle.velocity = (state_.paddle.center - prev_center) / dt;

    BallState next = physics::step_ball(prev, dt, cfg_.drag);

    if (!state_.hit_tick) {
      if (auto hit = robot::paddle_contact(next, state_.paddle, cfg_.contact)) {
        next = *hit;
        state_.hit_tick = state_.tick;
        state_.events.add(Event::hit);
        result.events.add(Event::hit);
      }
    }

    if (physics::check_net(prev, next, table)) {
      state_.ball = next;
      if (record_path_) path_.push_back(next);
      terminate(Event::net, result);
      break;
    }

    if (prev.pos.z() > 0.0 && next.pos.z() <= 0.0 && next.vel.z() < 0.0) {
      const BallState surface = physics::integrate_to_surface(prev, dt, cfg_.drag);
      const double x = surface.pos.x();
      const double y = surface.pos.y();
      if (!state_.hit_tick) {
        if (state_.own_bounces == 0 && table.on_robot_half(x, y)) {
          ++state_.own_bounces;
          state_.events.add(Event::bounce);
          result.events.add(Event::bounce);
          BallState bounced = physics::bounce_table(surface, cfg_.e_table, cfg_.mu_t);
          const double remaining = (prev.t + dt) - surface.t;
          next = remaining > 1e-12 ? physics::step_ball(bounced, remaining, cfg_.drag) : bounced;
          next.t = prev.t + dt;
        } else {
          if (record_path_) path_.push_back(next);
          state_.ball = surface;
          terminate(Event::out, result);
          break;
        }
      } else {
        state_.landing = LandingEvent{x, y, surface.t};
        if (record_path_) path_.push_back(next);
        state_.ball = surface;
        const bool in_region = x <= 0.0 && x >= -table.half_length() - cfg_.landing_margin &&
                               std::abs(y) <= table.half_width() + cfg_.landing_margin;
        terminate(in_region ? Event::landed : Event::out, result);
        break;
      }
    }

    state_.ball = next;
    if (record_path_) path_.push_back(state_.ball);
    const Vec3& p = state_.ball.pos;
    if (std::abs(p.x()) > cfg_.out_x || std::abs(p.y()) > cfg_.out_y || p.z() > cfg_.out_z) {
      terminate(Event::out, result);
    }
  }

  ++state_.tick;
  push_history();
  if (!result.terminal && state_.tick >= cfg_.max_steps) terminate(Event::timeout, result);
  result.obs = observe();
  return result;
}

std::string to_string(Source s) {
  switch (s) {
    case Source::demo: return "demo";
    case Source::ssp: return "ssp";
    case Source::eval: return "eval";
  }
  return "ssp";
}

Source parse_source(const std::string& s) {
  if (s == "demo") return Source::demo;
  if (s == "ssp") return Source::ssp;
  if (s == "eval") return Source::eval;
  throw ConfigError("unknown episode source '" + s + "'");
}

Trajectory run_episode(const EnvConfig& cfg, Actor& actor, const Vec2& goal,
                       const Eigen::VectorXd& noise, std::uint64_t seed) {
  Env env(cfg);
  Eigen::VectorXd obs = env.reset(seed, goal);
  const bool noisy = noise.size() > 0;
  if (noisy && noise.size() != cfg.joints()) throw ShapeError("run_episode: noise dimension mismatch");

  Trajectory traj;
  traj.layout = cfg.layout;
  traj.goal = goal;
  traj.meta.seed = seed;
  traj.meta.commanded_goal = goal;
  traj.meta.throw_spec = env.state().throw_spec;
  traj.steps.reserve(cfg.max_steps);

  actor.begin_episode(env);
  while (!env.terminal()) {
    Eigen::VectorXd action = actor.act(env, obs);
    if (action.size() != cfg.joints()) throw ShapeError("run_episode: actor output dimension mismatch");
    if (noisy) action += noise;
    StepResult r = env.step(action);
    traj.steps.push_back(Step{std::move(obs), std::move(action)});
    obs = std::move(r.obs);
  }
  const EnvState& st = env.state();
  traj.hit_index = st.hit_tick;
  traj.landing = st.landing;
  traj.events = st.events;
  traj.meta.clamped = st.clamped;
  return traj;
}

std::vector<BallState> replay_ball_path(const EnvConfig& cfg, const Trajectory& traj) {
  Env env(cfg);
  env.record_path(true);
  env.reset(traj.meta.seed, traj.meta.commanded_goal.value_or(Vec2::Zero()));
  for (const Step& s : traj.steps) {
    if (env.terminal()) break;
    env.step(s.act);
  }
  return env.ball_path();
}

}  // namespace ttgoals::env
