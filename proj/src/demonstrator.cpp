#include "ttgoals/demonstrator.hpp"

#include <algorithm>
#include <cmath>

namespace ttgoals::bootstrap {

std::optional<Intercept> predict_intercept(const env::EnvConfig& cfg,
                                           const physics::BallState& ball, double plane_x) {
  physics::BallState prev = ball;
  bool bounced = false;
  const double dt = cfg.sim_dt;
  for (int i = 0; i < 4000; ++i) {
    physics::BallState next = physics::step_ball(prev, dt, cfg.drag);
    if (prev.pos.z() > 0.0 && next.pos.z() <= 0.0 && next.vel.z() < 0.0) {
      if (bounced || !cfg.table.on_robot_half(next.pos.x(), next.pos.y())) return std::nullopt;
      const physics::BallState surface = physics::integrate_to_surface(prev, dt, cfg.drag);
      physics::BallState b = physics::bounce_table(surface, cfg.e_table, cfg.mu_t);
      const double remaining = (prev.t + dt) - surface.t;
      next = remaining > 1e-12 ? physics::step_ball(b, remaining, cfg.drag) : b;
      bounced = true;
    }
    if (prev.pos.x() < plane_x && next.pos.x() >= plane_x) {
      const double f = (plane_x - prev.pos.x()) / (next.pos.x() - prev.pos.x());
      return Intercept{prev.pos + f * (next.pos - prev.pos), prev.vel + f * (next.vel - prev.vel),
                       prev.t + f * dt};
    }
    prev = next;
  }
  return std::nullopt;
}

ScriptedDemonstrator::ScriptedDemonstrator(DemonstratorConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed) {}

void ScriptedDemonstrator::begin_episode(const env::Env& env) {
  const env::EnvConfig& ecfg = env.config();
  const robot::Chain& chain = ecfg.chain;
  const int J = chain.dof();

  const double tilt = cfg_.tilt + uniform(rng_, -cfg_.tilt_jitter, cfg_.tilt_jitter);
  const double yaw = cfg_.yaw + uniform(rng_, -cfg_.yaw_jitter, cfg_.yaw_jitter);
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(J);
  std::vector<int> joints = cfg_.perturb_joints;
  if (joints.empty()) {
    for (int j = J - J / 2; j < J; ++j) joints.push_back(j);
  }
  for (int j : joints) {
    if (j < 0 || j >= J) throw ConfigError("demonstrator: perturbed joint index out of range");
    offset[j] = cfg_.delta_b > 0.0 ? uniform(rng_, -cfg_.delta_b, cfg_.delta_b) : 0.0;
  }

  const auto intercept = predict_intercept(ecfg, env.state().ball, cfg_.hit_plane_x);
  reachable_ = intercept.has_value();
  if (!intercept) {
    target_ = chain.home;
    return;
  }
  // Normal faces the incoming ball, tilted up and turned sideways.
  const physics::Vec3 normal(-std::cos(tilt) * std::cos(yaw), std::cos(tilt) * std::sin(yaw),
                             std::sin(tilt));
  // Seed IK with the paddle turned to face the opponent.
  Eigen::VectorXd seed = chain.home;
  for (int j = 0; j < J; ++j) {
    const robot::JointSpec& js = chain.joints[j];
    if (js.kind == robot::JointKind::revolute && js.axis.isApprox(physics::Vec3::UnitZ()) &&
        js.origin.norm() > 0.0) {
      seed[j] = std::clamp(M_PI / 2, js.lo, js.hi);
    }
  }
  double err = 0.0;
  Eigen::VectorXd q = robot::solve_paddle_ik(chain, intercept->position, normal, seed, &err);
  if ((offset.array() != 0.0).any()) {
    // Perturbed joints keep their offset; the rest re-place the paddle center.
    robot::IkOptions pos_only;
    pos_only.normal_weight = 0.0;
    pos_only.locked = joints;
    q = robot::solve_paddle_ik(chain, intercept->position, normal, chain.clamp(q + offset), &err,
                               pos_only);
  }
  reachable_ = err < 0.02;
  target_ = q;
  const double swing_speed = chain.joints[0].max_vel;
  swing_start_ = intercept->t - cfg_.swing / swing_speed;
  move_start_ = intercept->t - cfg_.ready_time;
}

Eigen::VectorXd ScriptedDemonstrator::act(const env::Env& env, const Eigen::VectorXd&) {
  if (reachable_ && env.state().ball.t < move_start_) return env.config().chain.home;
  Eigen::VectorXd cmd = target_;
  if (reachable_ && cfg_.swing > 0.0) {
    // Gantry target at the end of this control tick along a ramp that passes
    // the intercept at contact time.
    const double speed = env.config().chain.joints[0].max_vel;
    const double t_end = env.state().ball.t + 1.0 / env.config().control_hz;
    cmd[0] += std::clamp(cfg_.swing - speed * (t_end - swing_start_), -cfg_.swing, cfg_.swing);
  }
  return cmd;
}

}  // namespace ttgoals::bootstrap
