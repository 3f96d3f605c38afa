#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "ttgoals/errors.hpp"

namespace ttgoals::physics {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
using Vec3 = Vec3T<double>;
using Vec2 = Eigen::Vector2d;

/// Table frame: origin at the table center on the playing surface, +x toward
/// the robot, +z up. The opponent half is x in [-length/2, 0].
struct TableGeometry {
  double length = 2.74;
  double width = 1.525;
  double net_height = 0.1525;

  double half_length() const { return 0.5 * length; }
  double half_width() const { return 0.5 * width; }
  bool on_table(double x, double y) const {
    return std::abs(x) <= half_length() && std::abs(y) <= half_width();
  }
  bool on_robot_half(double x, double y) const { return x > 0.0 && on_table(x, y); }
  bool on_opponent_half(double x, double y) const { return x <= 0.0 && on_table(x, y); }
  void validate() const;
};

template <typename Scalar>
struct BallStateT {
  Vec3T<Scalar> pos = Vec3T<Scalar>::Zero();
  Vec3T<Scalar> vel = Vec3T<Scalar>::Zero();
  Scalar t = Scalar(0);
};
using BallState = BallStateT<double>;

/// dv/dt = g - k_d |v| v, no spin.
struct DragModel {
  double k_d = 0.1;
  double g = 9.81;
  void validate() const;
};

struct ThrowSpec {
  Vec3 launch_pos = Vec3(-1.6, 0.3, 0.35);
  Vec2 target_landing = Vec2(0.9, 0.25);
  double speed = 7.0;
  void validate() const;
};

struct LandingEvent {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
  Vec2 xy() const { return {x, y}; }
};

template <typename Scalar>
Vec3T<Scalar> ball_acceleration(const Vec3T<Scalar>& vel, const DragModel& drag) {
  Vec3T<Scalar> acc = -Scalar(drag.k_d) * vel.norm() * vel;
  acc.z() -= Scalar(drag.g);
  return acc;
}

/// One classical RK4 step of the drag ODE.
template <typename Scalar>
BallStateT<Scalar> step_ball(const BallStateT<Scalar>& s, Scalar dt, const DragModel& drag) {
  if (!(dt > Scalar(0))) throw IntegrationError("step_ball: dt must be positive");
  const Vec3T<Scalar>& v1 = s.vel;
  const Vec3T<Scalar> a1 = ball_acceleration(v1, drag);
  const Vec3T<Scalar> v2 = s.vel + Scalar(0.5) * dt * a1;
  const Vec3T<Scalar> a2 = ball_acceleration(v2, drag);
  const Vec3T<Scalar> v3 = s.vel + Scalar(0.5) * dt * a2;
  const Vec3T<Scalar> a3 = ball_acceleration(v3, drag);
  const Vec3T<Scalar> v4 = s.vel + dt * a3;
  const Vec3T<Scalar> a4 = ball_acceleration(v4, drag);

  BallStateT<Scalar> out;
  out.pos = s.pos + dt / Scalar(6) * (v1 + Scalar(2) * v2 + Scalar(2) * v3 + v4);
  out.vel = s.vel + dt / Scalar(6) * (a1 + Scalar(2) * a2 + Scalar(2) * a3 + a4);
  out.t = s.t + dt;
  if (!out.pos.allFinite() || !out.vel.allFinite()) {
    throw IntegrationError("step_ball: non-finite ball state");
  }
  return out;
}

/// Mechanical energy per unit mass.
inline double specific_energy(const BallState& s, const DragModel& drag) {
  return 0.5 * s.vel.squaredNorm() + drag.g * s.pos.z();
}

/// First downward crossing of z = 0, linearly interpolated between the
/// straddling samples. Throws on an empty path.
std::optional<LandingEvent> detect_landing(std::span<const BallState> path);

/// Same crossing search, but the crossing inside the straddling interval is
/// located by integrating a partial RK4 step from the upper sample. Exact for
/// drag-free flight; this is what the simulator uses.
std::optional<LandingEvent> detect_landing(std::span<const BallState> path,
                                           const DragModel& drag);

/// Exact crossing time offset (in [0, dt]) of z = 0 after `upper`.
BallState integrate_to_surface(const BallState& upper, double dt, const DragModel& drag);

BallState bounce_table(const BallState& state, double e_table, double mu_t);

/// Segment prev->next crosses x = 0 below the net top within the net span.
bool check_net(const BallState& prev, const BallState& next, const TableGeometry& geom);

/// Integrates free flight until the first downward z = 0 crossing.
std::optional<LandingEvent> simulate_landing(const BallState& start, const DragModel& drag,
                                             double dt = 1e-3, double max_time = 3.0);

/// Largest horizontal drag-free range from height z0 at the given speed.
double drag_free_max_range(double speed, double z0, double g);

/// Initial velocity of magnitude spec.speed whose flight lands on
/// spec.target_landing. Azimuth comes from geometry (no spin keeps the flight
/// in its vertical plane); elevation is the low root of the fixed-speed range
/// equation, refined under drag by safeguarded secant shooting.
Vec3 solve_throw(const ThrowSpec& spec, const DragModel& drag, double dt = 1e-3,
                 double tolerance = 1e-4);

}  // namespace ttgoals::physics
