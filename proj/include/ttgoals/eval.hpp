#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ttgoals/env.hpp"
#include "ttgoals/policy.hpp"

namespace ttgoals::eval {

using physics::Vec2;

enum class GoalSet { five, uniform };

std::string to_string(GoalSet g);
GoalSet parse_goal_set(const std::string& name);

/// Default five goals: two deep corners, mid-table, two near-net points.
std::vector<Vec2> default_five_goals();

struct EvalConfig {
  GoalSet goals = GoalSet::uniform;
  int episodes = 200;        // uniform: total goals; five: attempts per goal
  int progress_episodes = 100;  // per training-progress row
  std::vector<double> thresholds = {0.30, 0.20};
  std::vector<Vec2> five_goals = default_five_goals();
  std::uint64_t seed = 20220;
  void validate() const;
};

struct Outcome {
  Vec2 goal = Vec2::Zero();
  std::optional<Vec2> landing;  // set only for balls that landed in the goal region
};

/// Threshold tests are inclusive. Every attempt counts in the denominator;
/// mean distance is over landed balls and absent when nothing landed.
struct Metrics {
  int n_attempts = 0;
  int n_landed = 0;
  std::optional<double> mean_dist;
  std::vector<double> thresholds;
  std::vector<double> pct_within;  // aligned with thresholds, in percent

  double pct(double threshold) const;
};

Metrics score(const std::vector<Outcome>& outcomes, const std::vector<double>& thresholds);

/// Uniform over the physical opponent half.
std::vector<Vec2> uniform_goals(const physics::TableGeometry& table, int n, std::uint64_t seed);

/// Noiseless rollouts, one per goal; episode i uses model i mod N and an
/// env seed derived from (seed, i).
std::vector<Outcome> rollout_goals(const std::vector<policy::PolicyParams>& models,
                                   const env::EnvConfig& env_cfg, const std::vector<Vec2>& goals,
                                   std::uint64_t seed);

Metrics evaluate(const std::vector<policy::PolicyParams>& models, const env::EnvConfig& env_cfg,
                 const std::vector<Vec2>& goals, const EvalConfig& cfg);

/// Goals from the config's goal set (uniform draws or the five goals each
/// repeated `episodes` times).
std::vector<Vec2> eval_goals(const EvalConfig& cfg, const physics::TableGeometry& table);

/// Fraction of the opponent half covered by a disc of radius `threshold`.
double coverage_ratio(double threshold, const physics::TableGeometry& table = {});

struct GoalTable {
  std::vector<std::string> labels;  // A..E then "avg"
  std::vector<Metrics> rows;
  std::string format() const;       // "label  pct30 | pct20" lines
};

GoalTable five_goal_eval(const std::vector<policy::PolicyParams>& models,
                         const env::EnvConfig& env_cfg, const EvalConfig& cfg);

/// Table rows from per-goal outcome lists.
GoalTable goal_table(const std::vector<std::vector<Outcome>>& per_goal,
                     const std::vector<double>& thresholds);

}  // namespace ttgoals::eval
