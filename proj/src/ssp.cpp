#include "ttgoals/ssp.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace ttgoals::ssp {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::goalseye: return "goalseye";
    case Mode::lfp: return "lfp";
    case Mode::gcsl: return "gcsl";
  }
  return "goalseye";
}

Mode parse_mode(const std::string& name) {
  if (name == "goalseye") return Mode::goalseye;
  if (name == "lfp") return Mode::lfp;
  if (name == "gcsl") return Mode::gcsl;
  throw ConfigError("unknown training mode '" + name + "'");
}

void SspConfig::validate() const {
  if (warmup_steps < 0) throw ConfigError("ssp: warmup_steps must be >= 0");
  if (steps_between_ssp <= 0) throw ConfigError("ssp: steps_between_ssp must be > 0");
  if (num_ssp_per_iter <= 0) throw ConfigError("ssp: num_ssp_per_iter must be > 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("ssp: noise scale b must be >= 0");
  if (!(goal_margin >= 0.0)) throw ConfigError("ssp: goal margin must be >= 0");
  if (total_trajectory_budget < 0) throw ConfigError("ssp: budget must be >= 0");
  if (checkpoint_every <= 0) throw ConfigError("ssp: checkpoint_every must be > 0");
}

GoalRegion goal_region(const physics::TableGeometry& table, double margin) {
  return GoalRegion::opponent_half(table, margin);
}

Vec2 sample_goal(const GoalRegion& region, Rng& rng) {
  const double x = uniform(rng, region.x_lo, region.x_hi);
  const double y = uniform(rng, region.y_lo, region.y_hi);
  return {x, y};
}

Eigen::VectorXd compute_action_std(const dataset::Cache& demos) {
  if (demos.empty()) throw ContractViolation("compute_action_std: no demonstrations");
  const int J = demos.joints();
  const env::Trajectory& first = demos.episodes().front();
  if (first.steps.empty()) throw ContractViolation("compute_action_std: empty demonstration");
  // Two passes around a shift of the first action, so constant data gives exactly 0.
  const Eigen::VectorXd shift = first.steps.front().act;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(J);
  long n = 0;
  for (const auto& ep : demos.episodes()) {
    for (const auto& s : ep.steps) {
      mean += s.act - shift;
      ++n;
    }
  }
  mean /= static_cast<double>(n);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(J);
  for (const auto& ep : demos.episodes()) {
    for (const auto& s : ep.steps) var += (s.act - shift - mean).cwiseAbs2();
  }
  return (var / static_cast<double>(n)).cwiseSqrt();
}

Eigen::VectorXd sample_noise_vector(const Eigen::VectorXd& a_std, double b, Rng& rng) {
  if (!(b >= 0.0)) throw ConfigError("noise: b must be >= 0");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a_std.size());
  for (Eigen::Index j = 0; j < a_std.size(); ++j) {
    const double half = b * a_std[j];
    if (half > 0.0) z[j] = uniform(rng, -half, half);
  }
  return z;
}

IterationReport ssp_iteration(const policy::Ensemble& ens, const env::EnvConfig& env_cfg,
                              dataset::Cache& cache, const SspConfig& cfg,
                              const Eigen::VectorXd& a_std, int n, std::uint64_t& next_id,
                              Rng& rng) {
  IterationReport report;
  report.per_model_attempted.assign(ens.size(), 0);
  report.per_model_stored.assign(ens.size(), 0);
  const GoalRegion region = goal_region(env_cfg.table, cfg.goal_margin);
  const std::vector<int> owner = policy::rollout_assignment(ens.size(), n);
  double dist_sum = 0.0;
  for (int r = 0; r < n; ++r) {
    const int m = owner[r];
    const Vec2 goal = sample_goal(region, rng);
    const Eigen::VectorXd z = a_std.size() > 0 ? sample_noise_vector(a_std, cfg.noise_scale, rng)
                                               : Eigen::VectorXd();
    const std::uint64_t seed = rng();
    policy::PolicyActor actor(ens.models[m]);
    env::Trajectory t = env::run_episode(env_cfg, actor, goal, z, seed);
    t.meta.id = next_id++;
    t.meta.model_id = m;
    t.meta.source = env::Source::ssp;
    report.goals.push_back(goal);
    ++report.attempted;
    ++report.per_model_attempted[m];
    cache.record_attempt();
    if (!dataset::filter_good(t, cache.region())) continue;
    dist_sum += (t.landing->xy() - goal).norm();
    cache.append(dataset::relabel(t), env::Source::ssp);
    ++report.stored;
    ++report.per_model_stored[m];
  }
  if (report.stored > 0) report.mean_dist = dist_sum / report.stored;
  return report;
}

namespace {

std::string fmt(std::optional<double> v) {
  if (!v) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

// Mean loss over all models and steps, or nothing when the cache is empty.
std::optional<double> train_phase(policy::Ensemble& ens, const dataset::Cache& cache,
                                  const policy::TrainConfig& tc, int steps,
                                  std::vector<Rng>& rngs, int& step_count) {
  if (cache.empty()) return std::nullopt;
  double sum = 0.0;
  for (int m = 0; m < ens.size(); ++m) {
    for (int s = 0; s < steps; ++s) {
      const auto batch = dataset::sample_batch(cache, tc.batch_size, tc.window, rngs[m]);
      sum += policy::train_step(ens.models[m], ens.optimizers[m], batch, tc);
    }
  }
  step_count += steps;
  return sum / (static_cast<double>(steps) * ens.size());
}

void write_checkpoint(const policy::Ensemble& ens, env::ObsLayout layout,
                      const std::filesystem::path& path) {
  policy::save_checkpoint(ens.models, layout, path);
}

}  // namespace

std::string progress_header() {
  return "iter,attempted,stored,cache_size,train_loss,eval_pct_30cm,eval_pct_20cm,mean_dist";
}

std::string progress_line(const ProgressRow& r) {
  return std::to_string(r.iter) + "," + std::to_string(r.attempted) + "," +
         std::to_string(r.stored) + "," + std::to_string(r.cache_size) + "," + fmt(r.train_loss) +
         "," + fmt(r.eval_pct_30) + "," + fmt(r.eval_pct_20) + "," + fmt(r.mean_dist);
}

RunResult run_training(const RunConfig& cfg, Mode mode, const dataset::Cache& demos,
                       int ensemble_size, const std::optional<std::filesystem::path>& out_dir,
                       const std::string& config_json) {
  cfg.env.validate();
  cfg.train.validate();
  cfg.ssp.validate();
  cfg.eval.validate();
  if (ensemble_size < 1) throw ConfigError("train: ensemble size must be >= 1");
  const env::EnvConfig& ecfg = cfg.env;
  const SspConfig& sc = cfg.ssp;

  dataset::Cache cache(ecfg.layout, ecfg.joints(), goal_region(ecfg.table, sc.goal_margin));
  std::uint64_t next_id = 0;
  if (mode != Mode::gcsl) {
    if (!demos.empty() && (demos.layout() != ecfg.layout || demos.joints() != ecfg.joints())) {
      throw ConfigError("train: demos do not match the configured layout or joint count");
    }
    for (const auto& ep : demos.episodes()) {
      cache.append(ep, env::Source::demo);
      next_id = std::max(next_id, ep.meta.id + 1);
    }
  }
  const int n_demos = cache.demos_count();
  if (sc.total_trajectory_budget == 0 && n_demos == 0) {
    throw ConfigError("train: trajectory budget 0 with no demonstrations");
  }
  const int practice_budget = std::max(0, sc.total_trajectory_budget - n_demos);
  const int iterations = (practice_budget + sc.num_ssp_per_iter - 1) / sc.num_ssp_per_iter;

  policy::PolicyConfig pc;
  pc.arch = cfg.train.arch;
  pc.input_dim = ecfg.obs_size();
  pc.hidden = cfg.train.hidden;
  pc.joints = ecfg.joints();
  RunResult res;
  res.demos = n_demos;
  res.ensemble = policy::make_ensemble(pc, ensemble_size, stream_seed(cfg.seed, 3));
  if (cfg.train.normalize && n_demos > 0) {
    const policy::Normalizer norm = policy::Normalizer::fit(cache);
    for (auto& m : res.ensemble.models) m.norm = norm;
  }
  Eigen::VectorXd a_std;
  if (mode == Mode::goalseye && n_demos > 0) a_std = compute_action_std(cache);

  std::vector<Rng> train_rngs;
  for (int m = 0; m < ensemble_size; ++m) {
    train_rngs.emplace_back(stream_seed(cfg.seed, 1, static_cast<std::uint64_t>(m)));
  }
  Rng practice_rng(stream_seed(cfg.seed, 2));
  const std::vector<Vec2> progress_goals =
      eval::uniform_goals(ecfg.table, cfg.eval.progress_episodes, cfg.eval.seed);

  std::ofstream csv;
  std::filesystem::path ck_dir;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    ck_dir = *out_dir / "checkpoints";
    std::filesystem::create_directories(ck_dir);
    if (!config_json.empty()) {
      std::ofstream(*out_dir / "config.json") << config_json << '\n';
    }
    csv.open(*out_dir / "progress.csv");
    if (!csv) throw Error("train: cannot write progress.csv in " + out_dir->string());
    csv << progress_header() << '\n';
  }

  auto emit = [&](ProgressRow row) {
    const eval::Metrics m = eval::evaluate(res.ensemble.models, ecfg, progress_goals, cfg.eval);
    row.cache_size = static_cast<int>(cache.size());
    row.eval_pct_30 = m.pct(0.30);
    row.eval_pct_20 = m.pct(0.20);
    row.mean_dist = m.mean_dist;
    res.rows.push_back(row);
    if (csv.is_open()) csv << progress_line(row) << std::endl;
  };

  if (sc.warmup_steps > 0) {
    train_phase(res.ensemble, cache, cfg.train, sc.warmup_steps, train_rngs, res.train_steps);
  }
  int attempted_total = 0;
  for (int it = 0; it < iterations; ++it) {
    ProgressRow row;
    row.iter = it;
    row.train_loss =
        train_phase(res.ensemble, cache, cfg.train, sc.steps_between_ssp, train_rngs, res.train_steps);
    if (mode != Mode::lfp) {
      const int n = std::min(sc.num_ssp_per_iter, practice_budget - attempted_total);
      const IterationReport rep =
          ssp_iteration(res.ensemble, ecfg, cache, sc, a_std, n, next_id, practice_rng);
      attempted_total += rep.attempted;
      row.attempted = rep.attempted;
      row.stored = rep.stored;
      res.stored += rep.stored;
    }
    emit(row);
    if (out_dir && (it + 1) % sc.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%04d.json", it);
      write_checkpoint(res.ensemble, ecfg.layout, ck_dir / name);
    }
  }
  res.attempted = attempted_total;

  ProgressRow last;
  last.iter = iterations;
  last.train_loss =
      train_phase(res.ensemble, cache, cfg.train, sc.steps_between_ssp, train_rngs, res.train_steps);
  emit(last);

  res.cache = cache;
  res.final_metrics = eval::evaluate(res.ensemble.models, ecfg,
                                     eval::uniform_goals(ecfg.table, cfg.eval.episodes, cfg.eval.seed),
                                     cfg.eval);
  if (out_dir) {
    write_checkpoint(res.ensemble, ecfg.layout, ck_dir / "final.json");
    const eval::Metrics& fm = res.final_metrics;
    nlohmann::json manifest = {
        {"tool", "ttgoals"},
        {"version", "0.1.0"},
        {"mode", to_string(mode)},
        {"seed", cfg.seed},
        {"ensemble", ensemble_size},
        {"demos", n_demos},
        {"attempted", res.attempted},
        {"stored", res.stored},
        {"train_steps", res.train_steps},
        {"iterations", iterations + 1},
        {"final_eval",
         {{"episodes", fm.n_attempts},
          {"landed", fm.n_landed},
          {"pct_30cm", fm.pct(0.30)},
          {"pct_20cm", fm.pct(0.20)},
          {"mean_dist", fm.mean_dist ? nlohmann::json(*fm.mean_dist) : nlohmann::json(nullptr)}}},
    };
    std::ofstream(*out_dir / "manifest.json") << manifest.dump(2) << '\n';
  }
  return res;
}

}  // namespace ttgoals::ssp
