#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "ttgoals/physics.hpp"
#include "ttgoals/rng.hpp"
#include "ttgoals/robot.hpp"

namespace ttgoals::env {

using physics::BallState;
using physics::LandingEvent;
using physics::ThrowSpec;
using physics::Vec2;
using physics::Vec3;

enum class ObsLayout { flat_vel, flat, stacked };

inline constexpr int kStackDepth = 8;

std::string to_string(ObsLayout layout);
ObsLayout parse_layout(const std::string& name);

/// Flat: 3 (+3 velocity) + J + 2. Stacked: 8 * (J + 5), row-major.
int observation_size(ObsLayout layout, int joints);

/// Length of one goal-terminated row: the whole vector for flat layouts,
/// J + 5 for stacked. The goal occupies the last two slots of every row.
int goal_stride(ObsLayout layout, int joints);

/// Thrower distribution. Launch position, landing target and speed are drawn
/// uniformly from their boxes.
struct ThrowPreset {
  std::string name = "narrow";
  Vec3 launch_lo = Vec3(-1.6, 0.30, 0.35);
  Vec3 launch_hi = Vec3(-1.6, 0.30, 0.35);
  Vec2 target_lo = Vec2(0.85, 0.22);
  Vec2 target_hi = Vec2(0.95, 0.32);
  double speed_lo = 6.9;
  double speed_hi = 7.1;
};

ThrowPreset narrow_throws();
ThrowPreset varied_throws();
ThrowPreset throw_preset(const std::string& name);
ThrowSpec sample_throw(const ThrowPreset& preset, Rng& rng);

struct EnvConfig {
  physics::TableGeometry table;
  physics::DragModel drag;
  double e_table = 0.9;
  double mu_t = 0.95;
  robot::Chain chain = robot::gantry_arm_preset();
  robot::ContactModel contact;
  double control_hz = 100.0;
  double sim_dt = 1e-3;
  int max_steps = 200;
  double init_perturbation = 0.05;
  ThrowPreset throws = narrow_throws();
  ObsLayout layout = ObsLayout::flat_vel;
  double landing_margin = 0.2;  // extension of the opponent half accepted as a landing
  double out_x = 3.0;
  double out_y = 2.0;
  double out_z = 3.0;

  int joints() const { return chain.dof(); }
  int substeps() const;
  int obs_size() const { return observation_size(layout, joints()); }
  void validate() const;
};

enum class Event : std::uint32_t {
  hit = 1u << 0,
  bounce = 1u << 1,
  landed = 1u << 2,
  net = 1u << 3,
  out = 1u << 4,
  timeout = 1u << 5,
};

class EventSet {
 public:
  EventSet() = default;
  bool has(Event e) const { return (bits_ & static_cast<std::uint32_t>(e)) != 0; }
  void add(Event e) { bits_ |= static_cast<std::uint32_t>(e); }
  void merge(EventSet other) { bits_ |= other.bits_; }
  bool terminal() const;
  int terminal_count() const;
  std::uint32_t bits() const { return bits_; }
  std::vector<std::string> names() const;
  static EventSet from_names(const std::vector<std::string>& names);
  bool operator==(const EventSet&) const = default;

 private:
  std::uint32_t bits_ = 0;
};

/// Full simulator state. Copyable; the env owns exactly one.
struct EnvState {
  BallState ball;
  robot::RobotState robot;
  robot::PaddlePose paddle;
  ThrowSpec throw_spec;
  Vec2 goal = Vec2::Zero();
  int tick = 0;
  std::optional<int> hit_tick;
  int own_bounces = 0;
  std::optional<LandingEvent> landing;
  EventSet events;
  bool clamped = false;
  std::deque<Eigen::VectorXd> history;  // per-tick [q, ball pos], newest last
};

struct StepResult {
  Eigen::VectorXd obs;
  EventSet events;  // raised during this step
  bool terminal = false;
};

class Env {
 public:
  explicit Env(EnvConfig cfg);

  /// Home pose + per-joint Uniform(-d, d); throw sampled from the preset and
  /// solved for its initial velocity. Deterministic in (seed, config).
  Eigen::VectorXd reset(std::uint64_t seed, const Vec2& goal);

  /// Advances one control tick: substeps of ball integration interleaved with
  /// joint tracking, with contact, bounce, net, landing and bounds checks.
  StepResult step(const Eigen::VectorXd& cmd);

  Eigen::VectorXd observe() const { return build_observation(cfg_.layout); }
  Eigen::VectorXd build_observation(ObsLayout layout) const;

  void set_goal(const Vec2& goal) { state_.goal = goal; }
  bool terminal() const { return state_.events.terminal(); }
  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }

  /// Ball states at every substep since reset (for replay checks).
  const std::vector<BallState>& ball_path() const { return path_; }
  void record_path(bool on) { record_path_ = on; }

 private:
  void push_history();
  void terminate(Event cause, StepResult& result);

  EnvConfig cfg_;
  EnvState state_;
  bool record_path_ = false;
  std::vector<BallState> path_;
};

enum class Source { demo, ssp, eval };
std::string to_string(Source s);
Source parse_source(const std::string& s);

struct EpisodeMeta {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  ThrowSpec throw_spec;
  int model_id = -1;
  std::optional<Vec2> commanded_goal;
  Source source = Source::ssp;
  bool clamped = false;
};

struct Step {
  Eigen::VectorXd obs;
  Eigen::VectorXd act;
};

struct Trajectory {
  ObsLayout layout = ObsLayout::flat_vel;
  std::vector<Step> steps;
  std::optional<int> hit_index;
  std::optional<LandingEvent> landing;
  std::optional<Vec2> goal;
  EventSet events;
  EpisodeMeta meta;

  int length() const { return static_cast<int>(steps.size()); }
  int joints() const { return steps.empty() ? 0 : static_cast<int>(steps.front().act.size()); }
};

/// Anything that can drive the robot: learned policies see only the
/// observation, scripted demonstrators may also read the simulator state.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void begin_episode(const Env& env) { (void)env; }
  virtual Eigen::VectorXd act(const Env& env, const Eigen::VectorXd& obs) = 0;
};

/// Outputs a fixed command every tick.
class ConstantActor final : public Actor {
 public:
  explicit ConstantActor(Eigen::VectorXd cmd) : cmd_(std::move(cmd)) {}
  Eigen::VectorXd act(const Env&, const Eigen::VectorXd&) override { return cmd_; }

 private:
  Eigen::VectorXd cmd_;
};

/// Resets, then loops act -> (+noise) -> step until terminal. Recorded
/// actions are the executed ones (policy output plus noise).
Trajectory run_episode(const EnvConfig& cfg, Actor& actor, const Vec2& goal,
                       const Eigen::VectorXd& noise, std::uint64_t seed);

/// Re-simulates a recorded episode from its seed and actions; returns the
/// ball path at substep resolution.
std::vector<BallState> replay_ball_path(const EnvConfig& cfg, const Trajectory& traj);

}  // namespace ttgoals::env
