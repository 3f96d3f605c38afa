#include "ttgoals/robot.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ttgoals::robot {

void JointSpec::validate() const {
  if (!(lo < hi)) throw ConfigError("joint: lo must be below hi");
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw ConfigError("joint: axis must be a unit vector");
  if (!(max_vel > 0.0)) throw ConfigError("joint: max_vel must be positive");
}

Eigen::VectorXd Chain::lower() const {
  Eigen::VectorXd lo(dof());
  for (int i = 0; i < dof(); ++i) lo[i] = joints[i].lo;
  return lo;
}

Eigen::VectorXd Chain::upper() const {
  Eigen::VectorXd hi(dof());
  for (int i = 0; i < dof(); ++i) hi[i] = joints[i].hi;
  return hi;
}

Eigen::VectorXd Chain::clamp(const Eigen::VectorXd& q) const {
  return q.cwiseMax(lower()).cwiseMin(upper());
}

void Chain::validate() const {
  if (joints.empty()) throw ConfigError("chain: no joints");
  for (const auto& j : joints) j.validate();
  if (std::abs(normal_local.norm() - 1.0) > 1e-9) {
    throw ConfigError("chain: paddle normal must be a unit vector");
  }
  if (home.size() != dof()) throw ConfigError("chain: home pose dimension mismatch");
  for (int i = 0; i < dof(); ++i) {
    if (home[i] < joints[i].lo || home[i] > joints[i].hi) {
      throw ConfigError("chain: home pose outside joint limits");
    }
  }
}

namespace {

JointSpec prismatic(const Vec3& axis, const Vec3& origin, double lo, double hi, double vmax) {
  return {JointKind::prismatic, axis, origin, lo, hi, vmax};
}

JointSpec revolute(const Vec3& axis, const Vec3& origin, double lo, double hi, double vmax) {
  return {JointKind::revolute, axis, origin, lo, hi, vmax};
}

}  // namespace

Chain gantry_arm_preset() {
  Chain c;
  c.name = "gantry-arm";
  c.joints = {
      prismatic(Vec3::UnitX(), Vec3(1.70, 0.0, 0.0), -0.30, 0.30, 2.0),
      prismatic(Vec3::UnitZ(), Vec3::Zero(), -0.35, 0.45, 2.0),
      revolute(Vec3::UnitZ(), Vec3::Zero(), -1.4, 1.4, 6.0),      // shoulder yaw
      revolute(Vec3::UnitX(), Vec3::Zero(), -1.2, 1.2, 6.0),      // shoulder roll
      revolute(Vec3::UnitZ(), Vec3(0.0, 0.45, 0.0), -0.5, 2.4, 8.0),  // wrist yaw
      revolute(Vec3::UnitX(), Vec3::Zero(), -1.0, 1.0, 8.0),      // wrist pitch
  };
  c.tool_offset = Vec3::Zero();
  c.normal_local = Vec3::UnitY();
  c.home = Eigen::VectorXd::Zero(6);
  return c;
}

Chain gantry_arm8_preset() {
  Chain c;
  c.name = "gantry-arm8";
  c.joints = {
      prismatic(Vec3::UnitX(), Vec3(1.70, 0.0, 0.0), -0.30, 0.30, 2.0),
      prismatic(Vec3::UnitZ(), Vec3::Zero(), -0.35, 0.45, 2.0),
      revolute(Vec3::UnitZ(), Vec3::Zero(), -1.4, 1.4, 6.0),
      revolute(Vec3::UnitX(), Vec3::Zero(), -1.2, 1.2, 6.0),
      revolute(Vec3::UnitY(), Vec3(0.0, 0.25, 0.0), -1.0, 1.0, 6.0),   // upper-arm roll
      revolute(Vec3::UnitZ(), Vec3(0.0, 0.20, 0.0), -0.5, 2.4, 8.0),   // wrist yaw
      revolute(Vec3::UnitX(), Vec3::Zero(), -1.0, 1.0, 8.0),           // wrist pitch
      revolute(Vec3::UnitY(), Vec3::Zero(), -1.0, 1.0, 8.0),           // paddle roll
  };
  c.tool_offset = Vec3::Zero();
  c.normal_local = Vec3::UnitY();
  c.home = Eigen::VectorXd::Zero(8);
  return c;
}

Chain chain_preset(const std::string& name) {
  if (name == "gantry-arm") return gantry_arm_preset();
  if (name == "gantry-arm8") return gantry_arm8_preset();
  throw ConfigError("unknown robot preset '" + name + "'");
}

Eigen::Isometry3d chain_transform(const Chain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.dof()) {
    throw ShapeError("forward_kinematics: expected " + std::to_string(chain.dof()) +
                     " joint values, got " + std::to_string(q.size()));
  }
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  for (int i = 0; i < chain.dof(); ++i) {
    const JointSpec& j = chain.joints[i];
    T.translate(j.origin);
    if (j.kind == JointKind::prismatic) {
      T.translate(q[i] * j.axis);
    } else {
      T.rotate(Eigen::AngleAxisd(q[i], j.axis));
    }
  }
  return T;
}

PaddlePose forward_kinematics(const Chain& chain, const Eigen::VectorXd& q) {
  const Eigen::Isometry3d T = chain_transform(chain, q);
  PaddlePose pose;
  pose.center = T * chain.tool_offset;
  pose.normal = (T.linear() * chain.normal_local).normalized();
  pose.velocity.setZero();
  return pose;
}

TrackResult track_targets(const Chain& chain, const RobotState& state,
                          const Eigen::VectorXd& cmd, double dt) {
  if (!(dt > 0.0)) throw EnvError("track_targets: dt must be positive");
  if (cmd.size() != chain.dof()) throw ShapeError("track_targets: command dimension mismatch");
  TrackResult out;
  out.state.q.resize(chain.dof());
  out.state.qdot.resize(chain.dof());
  out.state.t = state.t + dt;
  for (int i = 0; i < chain.dof(); ++i) {
    const JointSpec& j = chain.joints[i];
    double target = cmd[i];
    if (target < j.lo || target > j.hi) out.clamped = true;
    target = std::clamp(target, j.lo, j.hi);
    const double max_step = j.max_vel * dt;
    const double delta = std::clamp(target - state.q[i], -max_step, max_step);
    out.state.q[i] = std::clamp(state.q[i] + delta, j.lo, j.hi);
    out.state.qdot[i] = (out.state.q[i] - state.q[i]) / dt;
  }
  return out;
}

void ContactModel::validate() const {
  if (!(paddle_radius > 0.0 && ball_radius > 0.0)) throw ConfigError("contact: radii must be positive");
  if (!(restitution >= 0.0 && restitution <= 1.0)) throw ConfigError("contact: e_p must be in [0,1]");
  if (!(slab_tolerance >= 0.0)) throw ConfigError("contact: slab tolerance must be non-negative");
}

std::optional<BallState> paddle_contact(const BallState& ball, const PaddlePose& paddle,
                                        const ContactModel& model) {
  const Vec3& n = paddle.normal;
  const Vec3 offset = ball.pos - paddle.center;
  const double dist = offset.dot(n);
  if (std::abs(dist) >= model.ball_radius + model.slab_tolerance) return std::nullopt;
  const Vec3 in_plane = offset - dist * n;
  if (in_plane.norm() > model.paddle_radius) return std::nullopt;
  const Vec3 rel = ball.vel - paddle.velocity;
  const double rel_n = rel.dot(n);
  // Approaching the face the ball is on (either face of the disc plays).
  const bool approaching = (dist >= 0.0) ? rel_n < 0.0 : rel_n > 0.0;
  if (!approaching) return std::nullopt;
  BallState out = ball;
  out.vel = paddle.velocity + rel - (1.0 + model.restitution) * rel_n * n;
  return out;
}

Eigen::VectorXd solve_paddle_ik(const Chain& chain, const Vec3& center, const Vec3& normal,
                                const Eigen::VectorXd& seed, double* error,
                                const IkOptions& options) {
  const Vec3 n_target = normal.normalized();
  auto residual = [&](const Eigen::VectorXd& q) {
    const PaddlePose p = forward_kinematics(chain, q);
    Eigen::Matrix<double, 6, 1> r;
    r.head<3>() = p.center - center;
    r.tail<3>() = options.normal_weight * (p.normal - n_target);
    return r;
  };

  const int n = chain.dof();
  std::vector<bool> free(n, true);
  for (int j : options.locked) {
    if (j >= 0 && j < n) free[j] = false;
  }
  Eigen::VectorXd q = chain.clamp(seed);
  Eigen::Matrix<double, 6, 1> r = residual(q);
  double lambda = 1e-3;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, n);
  for (int it = 0; it < options.iterations && r.norm() > 1e-9; ++it) {
    constexpr double h = 1e-7;
    for (int k = 0; k < n; ++k) {
      if (!free[k]) continue;
      Eigen::VectorXd qp = q;
      qp[k] += h;
      J.col(k) = (residual(qp) - r) / h;
    }
    const Eigen::MatrixXd A = J.transpose() * J + lambda * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd dq = A.ldlt().solve(-J.transpose() * r);
    const Eigen::VectorXd q_new = chain.clamp(q + dq);
    const Eigen::Matrix<double, 6, 1> r_new = residual(q_new);
    if (r_new.norm() < r.norm()) {
      q = q_new;
      r = r_new;
      lambda = std::max(lambda * 0.3, 1e-9);
    } else {
      lambda *= 10.0;
      if (lambda > 1e6) break;
    }
  }
  if (error) *error = r.norm();
  return q;
}

}  // namespace ttgoals::robot
