#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <vector>

#include "ttgoals/physics.hpp"

namespace ttgoals::robot {

using physics::BallState;
using physics::Vec3;

enum class JointKind { prismatic, revolute };

/// One link of the chain. `origin` is the translation from the previous joint
/// frame to this joint's frame, applied before the joint motion.
struct JointSpec {
  JointKind kind = JointKind::revolute;
  Vec3 axis = Vec3::UnitZ();
  Vec3 origin = Vec3::Zero();
  double lo = -1.0;
  double hi = 1.0;
  double max_vel = 1.0;
  void validate() const;
};

/// Serial chain ending in a paddle disc.
struct Chain {
  std::string name = "gantry-arm";
  std::vector<JointSpec> joints;
  Vec3 tool_offset = Vec3::Zero();     // paddle center in the last joint frame
  Vec3 normal_local = Vec3::UnitY();   // paddle normal in the last joint frame
  Eigen::VectorXd home;                // home joint configuration

  int dof() const { return static_cast<int>(joints.size()); }
  Eigen::VectorXd lower() const;
  Eigen::VectorXd upper() const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;
  void validate() const;
};

/// 2 prismatic (x, z) + 4 revolute joints. At q = 0 the paddle stands
/// edge-forward: its normal points along +y, perpendicular to incoming balls.
Chain gantry_arm_preset();

/// 2 prismatic + 6 revolute joints, mirroring an 8-DOF arm-on-gantry.
Chain gantry_arm8_preset();

Chain chain_preset(const std::string& name);

struct RobotState {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
  double t = 0.0;
};

struct PaddlePose {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
  Vec3 velocity = Vec3::Zero();
};

/// Composes the per-joint rigid transforms in order. Velocity is zero.
PaddlePose forward_kinematics(const Chain& chain, const Eigen::VectorXd& q);

/// World transform of the last joint frame.
Eigen::Isometry3d chain_transform(const Chain& chain, const Eigen::VectorXd& q);

struct TrackResult {
  RobotState state;
  bool clamped = false;  // a target lay outside the joint limits
};

/// Moves each joint toward its (limit-clamped) target by at most max_vel*dt.
TrackResult track_targets(const Chain& chain, const RobotState& state,
                          const Eigen::VectorXd& cmd, double dt);

struct ContactModel {
  double paddle_radius = 0.1;
  double ball_radius = 0.02;
  double restitution = 0.8;
  double slab_tolerance = 0.012;
  void validate() const;
};

/// Disc reflection about the paddle normal, relative to the paddle velocity:
///   v' = v_p + (v - v_p) - (1 + e_p) ((v - v_p) . n) n
/// Returns nothing when the ball is outside the disc slab or separating.
std::optional<BallState> paddle_contact(const BallState& ball, const PaddlePose& paddle,
                                        const ContactModel& model);

struct IkOptions {
  double normal_weight = 0.3;  // meters per unit of normal error; 0 = position only
  std::vector<int> locked;     // joints held at their seed value
  int iterations = 60;
};

/// Damped least-squares inverse kinematics for a paddle center and normal
/// direction. Returns the limit-respecting solution found from `seed`;
/// residual reported through `error` when given.
Eigen::VectorXd solve_paddle_ik(const Chain& chain, const Vec3& center, const Vec3& normal,
                                const Eigen::VectorXd& seed, double* error = nullptr,
                                const IkOptions& options = {});

}  // namespace ttgoals::robot
