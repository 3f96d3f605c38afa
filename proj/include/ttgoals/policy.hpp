#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "ttgoals/dataset.hpp"
#include "ttgoals/env.hpp"

namespace ttgoals::policy {

using dataset::WindowSample;

/// lstm: two gated recurrent layers. mlp: two tanh layers applied per tick,
/// meant for the stacked-frame observation.
enum class Arch { lstm, mlp };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& name);

struct PolicyConfig {
  Arch arch = Arch::lstm;
  int input_dim = 0;
  int hidden = 64;
  int joints = 0;
  void validate() const;
};

/// Fixed affine maps around the network: inputs are standardized, the head
/// predicts standardized actions. Identity unless fitted.
struct Normalizer {
  Eigen::VectorXd obs_mean;
  Eigen::VectorXd obs_scale;  // multiplies (obs - mean)
  Eigen::VectorXd act_mean;
  Eigen::VectorXd act_std;

  static Normalizer identity(int input_dim, int joints);
  /// Per-dimension mean and std over every step of every episode; std
  /// floored at `min_std`.
  static Normalizer fit(const dataset::Cache& cache, double min_std = 1e-2);
};

/// Tensors in a fixed order.
///   lstm: W0 (4H x (D+H)), b0 (4H), W1 (4H x 2H), b1 (4H), Wo (J x H), bo (J)
///   mlp:  W0 (H x D), b0 (H), W1 (H x H), b1 (H), Wo (J x H), bo (J)
/// Gate rows of the recurrent blocks are ordered input, forget, cell, output.
struct PolicyParams {
  PolicyConfig config;
  std::vector<Eigen::MatrixXd> tensors;
  Normalizer norm;

  static const std::vector<std::string>& names();
  Eigen::Index size() const;
  bool all_finite() const;
};

using Gradient = std::vector<Eigen::MatrixXd>;

PolicyParams zero_params(const PolicyConfig& cfg);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, forget
/// gate bias +1.
PolicyParams init_params(const PolicyConfig& cfg, Rng& rng);

struct RecurrentState {
  std::vector<Eigen::VectorXd> h;
  std::vector<Eigen::VectorXd> c;
};

RecurrentState initial_state(const PolicyParams& params);

/// Unrolls over one window (columns are ticks) from the zero state and
/// returns raw actions, J x T.
Eigen::MatrixXd forward(const PolicyParams& params, const Eigen::MatrixXd& obs_window);

/// One tick of streaming inference.
Eigen::VectorXd act(const PolicyParams& params, RecurrentState& state, const Eigen::VectorXd& obs);

/// Mean squared error between recorded and predicted actions over every
/// tick present in the batch, in the normalizer's action units:
///   L = 1/(N_ticks * J) * sum_i sum_t |(a_it - mu) / sigma - y_it|^2
double loss(const PolicyParams& params, const std::vector<WindowSample>& batch);

/// Loss and its exact gradient (backpropagation through time).
double loss_and_grad(const PolicyParams& params, const std::vector<WindowSample>& batch,
                     Gradient& grad);

Gradient grad(const PolicyParams& params, const std::vector<WindowSample>& batch);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int window = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  int hidden = 64;
  Arch arch = Arch::lstm;
  bool normalize = true;
  void validate() const;
};

struct AdamState {
  Gradient m;
  Gradient v;
  long step = 0;
  static AdamState zeros_like(const PolicyParams& params);
};

double global_norm(const Gradient& g);

/// Bias-corrected Adam update after clipping the gradient to clip_norm.
/// Returns the pre-update loss. A non-finite loss or gradient throws
/// TrainingError naming the episodes in the batch.
double train_step(PolicyParams& params, AdamState& opt, const std::vector<WindowSample>& batch,
                  const TrainConfig& cfg);

/// N models sharing one cache, each with its own optimizer state.
struct Ensemble {
  std::vector<PolicyParams> models;
  std::vector<AdamState> optimizers;
  int size() const { return static_cast<int>(models.size()); }
};

Ensemble make_ensemble(const PolicyConfig& cfg, int n, std::uint64_t seed);

/// Producing model of each rollout in an iteration: round-robin.
std::vector<int> rollout_assignment(int n_models, int n_rollouts);

/// Drives the env with a policy; the recurrent state resets each episode.
class PolicyActor final : public env::Actor {
 public:
  explicit PolicyActor(const PolicyParams& params) : params_(params) {}
  void begin_episode(const env::Env&) override { state_ = initial_state(params_); }
  Eigen::VectorXd act(const env::Env&, const Eigen::VectorXd& obs) override {
    return policy::act(params_, state_, obs);
  }

 private:
  const PolicyParams& params_;
  RecurrentState state_;
};

/// JSON tensor dump: architecture, observation layout, normalizer and every
/// tensor with its shape. Doubles are written round-trip exact.
void save_checkpoint(const std::vector<PolicyParams>& models, env::ObsLayout layout,
                     const std::filesystem::path& path);

struct Checkpoint {
  env::ObsLayout layout = env::ObsLayout::flat_vel;
  std::vector<PolicyParams> models;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ttgoals::policy
