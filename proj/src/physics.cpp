#include "ttgoals/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ttgoals::physics {

void TableGeometry::validate() const {
  if (!(length > 0.0 && width > 0.0 && net_height > 0.0)) {
    throw ConfigError("table geometry: length, width and net_height must be positive");
  }
}

void DragModel::validate() const {
  if (!(k_d >= 0.0)) throw ConfigError("drag: k_d must be non-negative");
  if (!(g > 0.0)) throw ConfigError("drag: gravity must be positive");
}

void ThrowSpec::validate() const {
  if (!(launch_pos.x() < 0.0)) throw ConfigError("throw: launch_pos.x must be on the opponent side");
  if (!(target_landing.x() > 0.0)) throw ConfigError("throw: target must be on the robot side");
  if (!(speed > 0.0)) throw ConfigError("throw: speed must be positive");
}

namespace {

// Index i of the first pair (i, i+1) straddling z = 0 while descending.
std::optional<std::size_t> find_straddle(std::span<const BallState> path) {
  if (path.empty()) throw IntegrationError("detect_landing: empty path");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const BallState& a = path[i];
    const BallState& b = path[i + 1];
    if (a.pos.z() > 0.0 && b.pos.z() <= 0.0 && b.vel.z() < 0.0) return i;
  }
  return std::nullopt;
}

}  // namespace

std::optional<LandingEvent> detect_landing(std::span<const BallState> path) {
  const auto i = find_straddle(path);
  if (!i) return std::nullopt;
  const BallState& a = path[*i];
  const BallState& b = path[*i + 1];
  const double f = a.pos.z() / (a.pos.z() - b.pos.z());
  return LandingEvent{a.pos.x() + f * (b.pos.x() - a.pos.x()),
                      a.pos.y() + f * (b.pos.y() - a.pos.y()), a.t + f * (b.t - a.t)};
}

BallState integrate_to_surface(const BallState& upper, double dt, const DragModel& drag) {
  if (upper.pos.z() <= 0.0) return upper;
  const BallState full = step_ball(upper, dt, drag);
  double tau = dt * upper.pos.z() / (upper.pos.z() - full.pos.z());
  tau = std::clamp(tau, 1e-15, dt);
  BallState s = step_ball(upper, tau, drag);
  for (int it = 0; it < 20 && std::abs(s.pos.z()) > 1e-14; ++it) {
    if (s.vel.z() == 0.0) break;
    tau = std::clamp(tau - s.pos.z() / s.vel.z(), 1e-15, dt);
    s = step_ball(upper, tau, drag);
  }
  return s;
}

std::optional<LandingEvent> detect_landing(std::span<const BallState> path,
                                           const DragModel& drag) {
  const auto i = find_straddle(path);
  if (!i) return std::nullopt;
  const BallState& a = path[*i];
  const double dt = path[*i + 1].t - a.t;
  if (!(dt > 0.0)) return detect_landing(path.subspan(*i, 2));
  const BallState s = integrate_to_surface(a, dt, drag);
  return LandingEvent{s.pos.x(), s.pos.y(), s.t};
}

BallState bounce_table(const BallState& state, double e_table, double mu_t) {
  if (!(e_table >= 0.0 && e_table <= 1.0)) throw ConfigError("bounce: e_table must be in [0,1]");
  if (!(mu_t >= 0.0 && mu_t <= 1.0)) throw ConfigError("bounce: mu_t must be in [0,1]");
  BallState out = state;
  out.vel.x() *= mu_t;
  out.vel.y() *= mu_t;
  out.vel.z() = -e_table * state.vel.z();
  out.pos.z() = std::abs(state.pos.z());
  return out;
}

bool check_net(const BallState& prev, const BallState& next, const TableGeometry& geom) {
  const double x0 = prev.pos.x();
  const double x1 = next.pos.x();
  if (x0 == x1) return false;
  if ((x0 > 0.0 && x1 > 0.0) || (x0 < 0.0 && x1 < 0.0)) return false;
  const double f = x0 / (x0 - x1);
  const double z = prev.pos.z() + f * (next.pos.z() - prev.pos.z());
  const double y = prev.pos.y() + f * (next.pos.y() - prev.pos.y());
  return z < geom.net_height && std::abs(y) <= geom.half_width();
}

std::optional<LandingEvent> simulate_landing(const BallState& start, const DragModel& drag,
                                             double dt, double max_time) {
  BallState prev = start;
  const double t_end = start.t + max_time;
  while (prev.t < t_end) {
    const BallState next = step_ball(prev, dt, drag);
    if (prev.pos.z() > 0.0 && next.pos.z() <= 0.0 && next.vel.z() < 0.0) {
      const BallState s = integrate_to_surface(prev, dt, drag);
      return LandingEvent{s.pos.x(), s.pos.y(), s.t};
    }
    prev = next;
  }
  return std::nullopt;
}

double drag_free_max_range(double speed, double z0, double g) {
  return speed / g * std::sqrt(speed * speed + 2.0 * g * std::max(z0, 0.0));
}

namespace {

Vec3 velocity_from_angles(double speed, double azimuth, double elevation) {
  return speed * Vec3(std::cos(elevation) * std::cos(azimuth),
                      std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
}

}  // namespace

Vec3 solve_throw(const ThrowSpec& spec, const DragModel& drag, double dt, double tolerance) {
  spec.validate();
  drag.validate();
  const Vec2 delta = spec.target_landing - spec.launch_pos.head<2>();
  const double range = delta.norm();
  const double azimuth = std::atan2(delta.y(), delta.x());
  const double z0 = spec.launch_pos.z();
  const double v = spec.speed;
  const double max_range = drag_free_max_range(v, z0, drag.g);

  auto unreachable = [&](const char* why) {
    std::ostringstream msg;
    msg << "solve_throw: target at horizontal distance " << range << " m is unreachable at "
        << v << " m/s (" << why << "; drag-free max range " << max_range << " m)";
    return SolverError(msg.str(), max_range);
  };

  // Fixed-speed range equation in u = tan(elevation):
  //   a u^2 - R u + (a - z0) = 0,  a = g R^2 / (2 v^2).
  const double a = drag.g * range * range / (2.0 * v * v);
  const double disc = range * range - 4.0 * a * (a - z0);
  if (disc < 0.0 || range > max_range) throw unreachable("beyond drag-free reach");
  const double elevation0 = std::atan((range - std::sqrt(disc)) / (2.0 * a));
  if (drag.k_d == 0.0) return velocity_from_angles(v, azimuth, elevation0);

  const Vec2 dir = delta / range;
  auto range_error = [&](double elevation) {
    BallState s;
    s.pos = spec.launch_pos;
    s.vel = velocity_from_angles(v, azimuth, elevation);
    const auto landing = simulate_landing(s, drag, dt, 10.0);
    if (!landing) return -range;
    return (landing->xy() - spec.launch_pos.head<2>()).dot(dir) - range;
  };

  // Drag shortens the flight, so the drag-free root undershoots. Walk the
  // elevation up until the range error changes sign or the range peaks.
  double lo = elevation0;
  double f_lo = range_error(lo);
  if (std::abs(f_lo) <= tolerance) return velocity_from_angles(v, azimuth, lo);
  double hi = lo;
  double f_hi = f_lo;
  const double step = 2.0 * std::numbers::pi / 180.0;
  while (f_hi < 0.0) {
    const double next = hi + step;
    if (next > std::numbers::pi / 3.0) throw unreachable("beyond reach under drag");
    const double f_next = range_error(next);
    if (f_next < f_hi && f_hi < 0.0) throw unreachable("beyond reach under drag");
    lo = hi;
    f_lo = f_hi;
    hi = next;
    f_hi = f_next;
  }
  if (f_lo > 0.0) throw unreachable("drag-free root overshoots");

  // Illinois-style safeguarded secant on the bracket [lo, hi].
  int side = 0;
  double x = hi;
  for (int it = 0; it < 100; ++it) {
    x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = range_error(x);
    if (std::abs(fx) <= tolerance) break;
    if (fx < 0.0) {
      lo = x;
      f_lo = fx;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = x;
      f_hi = fx;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  return velocity_from_angles(v, azimuth, x);
}

}  // namespace ttgoals::physics
