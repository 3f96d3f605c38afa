#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <vector>

#include "ttgoals/dataset.hpp"
#include "ttgoals/demonstrator.hpp"
#include "ttgoals/eval.hpp"
#include "ttgoals/policy.hpp"

namespace ttgoals::ssp {

using dataset::GoalRegion;
using physics::Vec2;

enum class Mode { goalseye, lfp, gcsl };

std::string to_string(Mode m);
Mode parse_mode(const std::string& name);

struct SspConfig {
  int warmup_steps = 1000;             // training on the demos before the first practice rollout
  int steps_between_ssp = 100;
  int num_ssp_per_iter = 20;
  double noise_scale = 0.05;          // b
  double goal_margin = 0.2;           // m
  int total_trajectory_budget = 3000; // demos plus attempted practice rollouts
  int checkpoint_every = 10;          // iterations; the final checkpoint is always written
  void validate() const;
};

/// Everything one training run needs; mirrors the config file sections.
struct RunConfig {
  env::EnvConfig env;
  policy::TrainConfig train;
  SspConfig ssp;
  eval::EvalConfig eval;
  bootstrap::DemonstratorConfig demonstrator;
  std::uint64_t seed = 0;
};

/// Opponent half extended past the back and side edges, never past the net.
GoalRegion goal_region(const physics::TableGeometry& table, double margin);

Vec2 sample_goal(const GoalRegion& region, Rng& rng);

/// Population std of every action of every episode, two passes.
Eigen::VectorXd compute_action_std(const dataset::Cache& demos);

/// z_j ~ Uniform(-b a_std_j, b a_std_j); zero where b a_std_j is zero.
Eigen::VectorXd sample_noise_vector(const Eigen::VectorXd& a_std, double b, Rng& rng);

struct IterationReport {
  int attempted = 0;
  int stored = 0;
  std::vector<int> per_model_attempted;
  std::vector<int> per_model_stored;
  std::optional<double> mean_dist;  // commanded goal to landing, stored episodes
  std::vector<Vec2> goals;          // commanded goals in rollout order
};

/// `n` rollouts (round-robin over models), each with a fresh goal, noise
/// vector and env seed drawn from `rng`; good episodes are relabeled and
/// appended. Episode ids continue from `next_id`, which is advanced.
IterationReport ssp_iteration(const policy::Ensemble& ens, const env::EnvConfig& env_cfg,
                              dataset::Cache& cache, const SspConfig& cfg,
                              const Eigen::VectorXd& a_std, int n, std::uint64_t& next_id,
                              Rng& rng);

struct ProgressRow {
  int iter = 0;
  int attempted = 0;
  int stored = 0;
  int cache_size = 0;
  std::optional<double> train_loss;
  double eval_pct_30 = 0.0;
  double eval_pct_20 = 0.0;
  std::optional<double> mean_dist;
};

std::string progress_header();
std::string progress_line(const ProgressRow& row);

struct RunResult {
  std::vector<ProgressRow> rows;
  eval::Metrics final_metrics;
  policy::Ensemble ensemble;
  dataset::Cache cache;
  int demos = 0;
  int attempted = 0;
  int stored = 0;
  int train_steps = 0;
};

/// Alternates steps_between_ssp train steps, a progress evaluation and one
/// practice iteration until the trajectory budget is spent, then trains and
/// evaluates once more. lfp trains the same schedule without practice; gcsl
/// starts from an empty cache without noise and skips training while the
/// cache is empty. When `out_dir` is given it receives config.json,
/// progress.csv, checkpoints/ and manifest.json.
RunResult run_training(const RunConfig& cfg, Mode mode, const dataset::Cache& demos,
                       int ensemble_size, const std::optional<std::filesystem::path>& out_dir,
                       const std::string& config_json = "");

}  // namespace ttgoals::ssp
