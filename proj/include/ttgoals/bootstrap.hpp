#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ttgoals/dataset.hpp"
#include "ttgoals/demonstrator.hpp"
#include "ttgoals/policy.hpp"

namespace ttgoals::bootstrap {

struct EsConfig {
  int population = 16;  // antithetic pairs, so even
  double sigma = 0.1;
  double step_size = 0.05;
  int iterations = 200;
  void validate() const;
};

/// Centered ranks in [-0.5, 0.5]; ties share their mean rank.
Eigen::VectorXd centered_ranks(const Eigen::VectorXd& fitness);

/// Perturbations theta + sigma * eps, eps ~ N(0, I) in antithetic pairs.
///   theta <- theta + alpha / (n sigma) * sum_i rank(f_i) eps_i
struct EsStep {
  Eigen::VectorXd theta;
  Eigen::VectorXd update;
  double mean_fitness = 0.0;
  double best_fitness = 0.0;
  Eigen::VectorXd best;  // best perturbed candidate of this step
};

EsStep es_step(const Eigen::VectorXd& theta,
               const std::function<double(const Eigen::VectorXd&)>& fitness, const EsConfig& cfg,
               Rng& rng);

struct EsResult {
  Eigen::VectorXd theta;        // after the last iteration
  Eigen::VectorXd best;         // best candidate seen
  double best_fitness = 0.0;
  std::vector<Eigen::VectorXd> trace;  // theta after each iteration
};

EsResult es_optimize(const Eigen::VectorXd& theta0,
                     const std::function<double(const Eigen::VectorXd&)>& fitness,
                     const EsConfig& cfg, std::uint64_t seed);

struct FitnessSpec {
  double contact = 1.0;
  double landed = 1.0;
  double center = 0.5;  // weight on minus the landing distance to the opponent-half center
  int episodes = 4;     // throws per fitness evaluation
  void validate() const;
};

/// Episode fitness under `spec` (without the per-evaluation averaging).
double episode_fitness(const env::Trajectory& traj, const FitnessSpec& spec,
                       const physics::TableGeometry& table);

/// ES over a small feedforward policy (hidden width `hidden`) whose output
/// bias starts at the home pose. Returns the best parameters found.
policy::PolicyParams es_train(const env::EnvConfig& env_cfg, const FitnessSpec& fitness,
                              const EsConfig& cfg, std::uint64_t seed, int hidden = 8);

struct Scatter {
  int attempts = 0;
  int hits = 0;
  int stored = 0;
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;  // landing bounding box
  std::vector<std::vector<int>> grid;  // 8 x 8 counts over the opponent half, [ix][iy]
  std::vector<physics::Vec2> landings;
  int occupied() const;
  double occupancy() const { return occupied() / 64.0; }
};

struct BootstrapResult {
  dataset::Cache demos;
  Scatter scatter;
};

/// Rolls the actor out with goals drawn from the opponent half until
/// n_demos episodes pass the filter, relabeling each. Throws EnvError when
/// fewer than 5% of the first 500 attempts hit the ball.
BootstrapResult generate_bootstrap(env::Actor& actor, int n_demos, const env::EnvConfig& env_cfg,
                                   std::uint64_t seed, double goal_margin = 0.2,
                                   int max_attempts = 1000000);

/// Scripted demonstrator source.
BootstrapResult generate_scripted(const DemonstratorConfig& demo_cfg, int n_demos,
                                  const env::EnvConfig& env_cfg, std::uint64_t seed,
                                  double goal_margin = 0.2);

void write_scatter_csv(const Scatter& s, const std::filesystem::path& path);
void write_scatter_svg(const Scatter& s, const physics::TableGeometry& table,
                       const std::filesystem::path& path);

/// Convex hull area of a point set (0 for fewer than three points).
double hull_area(std::vector<physics::Vec2> pts);

}  // namespace ttgoals::bootstrap
