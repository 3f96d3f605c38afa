#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "ttgoals/env.hpp"

namespace ttgoals::bootstrap {

struct DemonstratorConfig {
  double hit_plane_x = 1.60;     // plane where the paddle meets the ball
  double tilt = 0.05;            // nominal upward tilt of the paddle normal (rad)
  double yaw = -0.05;            // nominal sideways turn of the paddle normal (rad)
  double tilt_jitter = 0.04;     // Uniform(-j, j) per episode
  double yaw_jitter = 0.15;
  double swing = 0.12;           // gantry-x travel either side of the intercept (m)
  double ready_time = 0.3;       // the arm leaves home this long before contact (s)
  std::vector<int> perturb_joints = {4, 5};  // empty: the last half of the chain
  double delta_b = 0.05;         // joint offset range for diversification
};

struct Intercept {
  physics::Vec3 position;
  physics::Vec3 velocity;
  double t = 0.0;
};

/// Forward-simulates the ball (including one own-side bounce) to the first
/// crossing of the plane x = plane_x.
std::optional<Intercept> predict_intercept(const env::EnvConfig& cfg,
                                           const physics::BallState& ball, double plane_x);

/// Scripted interception: predicts where the ball crosses the hitting plane,
/// solves IK for a paddle pose there with a randomized tilt, and holds home
/// until ready_time before contact. It then commands that pose cocked back
/// along the gantry x axis; the gantry target ramps forward at the joint's
/// speed limit, passing the intercept at contact time. Selected joints
/// receive an additive per-episode Uniform(-delta_b, delta_b) offset.
class ScriptedDemonstrator final : public env::Actor {
 public:
  ScriptedDemonstrator(DemonstratorConfig cfg, std::uint64_t seed);

  void begin_episode(const env::Env& env) override;
  Eigen::VectorXd act(const env::Env& env, const Eigen::VectorXd& obs) override;

  /// Reseeds the per-episode randomization stream.
  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  const Eigen::VectorXd& target() const { return target_; }
  bool reachable() const { return reachable_; }

 private:
  DemonstratorConfig cfg_;
  Rng rng_;
  Eigen::VectorXd target_;
  double swing_start_ = 0.0;
  double move_start_ = 0.0;
  bool reachable_ = false;
};

}  // namespace ttgoals::bootstrap
