#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ttgoals/bootstrap.hpp"
#include "ttgoals/ssp.hpp"

using namespace ttgoals;
using namespace ttgoals::ssp;

namespace fs = std::filesystem;

namespace {

RunConfig small_run() {
  RunConfig c;
  c.env.control_hz = 50;
  c.train.hidden = 8;
  c.train.batch_size = 8;
  c.train.window = 8;
  c.ssp.warmup_steps = 20;
  c.ssp.steps_between_ssp = 10;
  c.ssp.num_ssp_per_iter = 5;
  c.ssp.total_trajectory_budget = 30;
  c.ssp.checkpoint_every = 2;
  c.eval.progress_episodes = 4;
  c.eval.episodes = 6;
  c.seed = 13;
  return c;
}

const dataset::Cache& demos10() {
  static const dataset::Cache d = [] {
    const RunConfig c = small_run();
    return bootstrap::generate_scripted(c.demonstrator, 10, c.env, 21).demos;
  }();
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

dataset::Cache one_episode_cache(const std::vector<Eigen::VectorXd>& acts) {
  Rng rng(1);
  dataset::Cache c(env::ObsLayout::flat_vel, static_cast<int>(acts.front().size()));
  env::Trajectory t;
  for (const auto& a : acts) {
    env::Step s;
    s.obs = Eigen::VectorXd::Zero(env::observation_size(env::ObsLayout::flat_vel, a.size()));
    s.act = a;
    t.steps.push_back(s);
  }
  t.hit_index = 0;
  t.landing = physics::LandingEvent{-0.5, 0.0, 1.0};
  c.append(dataset::relabel(t), env::Source::demo);
  return c;
}

}  // namespace

TEST_CASE("goal region and goal sampling") {
  const physics::TableGeometry table;
  const GoalRegion r0 = goal_region(table, 0.0);
  CHECK(r0.x_hi == 0.0);
  CHECK(r0.x_lo == doctest::Approx(-table.half_length()));
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const Vec2 g = sample_goal(r0, rng);
    CHECK(r0.contains(g));
  }
  const GoalRegion r = goal_region(table, 0.2);
  const double expected = 1.0 - table.half_length() * table.width / r.area();
  int outside = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 g = sample_goal(r, rng);
    CHECK(r.contains(g));
    outside += g.x() < -table.half_length() || std::abs(g.y()) > table.half_width();
  }
  CHECK(std::abs(outside / 10000.0 - expected) < 0.02);
}

TEST_CASE("action std") {
  const Eigen::Vector2d a(0.3, -0.1);
  CHECK(compute_action_std(one_episode_cache({a, a, a})).isZero(0.0));
  const Eigen::VectorXd s = compute_action_std(one_episode_cache(
      {Eigen::Vector2d(-1, 5), Eigen::Vector2d(1, 5), Eigen::Vector2d(-1, 5), Eigen::Vector2d(1, 5)}));
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == 0.0);

  // Two-pass oracle on the demo set, accumulated per episode in long double.
  const dataset::Cache& d = demos10();
  const int J = d.joints();
  std::vector<long double> mean(J, 0.0L), var(J, 0.0L);
  long n = 0;
  for (const auto& ep : d.episodes())
    for (const auto& st : ep.steps) {
      for (int j = 0; j < J; ++j) mean[j] += st.act[j];
      ++n;
    }
  for (auto& m : mean) m /= n;
  for (const auto& ep : d.episodes())
    for (const auto& st : ep.steps)
      for (int j = 0; j < J; ++j) var[j] += (st.act[j] - mean[j]) * (st.act[j] - mean[j]);
  const Eigen::VectorXd got = compute_action_std(d);
  for (int j = 0; j < J; ++j) CHECK(std::abs(got[j] - std::sqrt(static_cast<double>(var[j] / n))) < 1e-9);
  CHECK_THROWS_AS(compute_action_std(dataset::Cache(env::ObsLayout::flat_vel, 6)), ContractViolation);
}

TEST_CASE("noise vector") {
  Rng rng(2);
  Eigen::VectorXd a_std(3);
  a_std << 0.5, 0.0, 2.0;
  CHECK(sample_noise_vector(a_std, 0.0, rng).isZero(0.0));
  const double b = 0.1;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = sample_noise_vector(a_std, b, rng);
    CHECK(z[1] == 0.0);
    CHECK(std::abs(z[0]) <= b * a_std[0]);
    CHECK(std::abs(z[2]) <= b * a_std[2]);
    sum += z;
  }
  for (int j : {0, 2}) {
    const double sd = b * a_std[j] / std::sqrt(3.0);
    CHECK(std::abs(sum[j] / n) <= 3 * sd / std::sqrt(double(n)));
  }
  CHECK_THROWS_AS(sample_noise_vector(a_std, -0.1, rng), ConfigError);
}

TEST_CASE("noise is constant within an episode and b = 0 is noiseless") {
  const RunConfig c = small_run();
  Rng rng(3);
  const auto p = policy::init_params({policy::Arch::lstm, c.env.obs_size(), 8, c.env.joints()}, rng);
  const Eigen::VectorXd a_std = compute_action_std(demos10());
  const Eigen::VectorXd z = sample_noise_vector(a_std, 0.5, rng);
  policy::PolicyActor actor(p);
  const env::Trajectory t = env::run_episode(c.env, actor, Vec2(-0.6, 0.2), z, 99);
  policy::RecurrentState st = policy::initial_state(p);
  for (const auto& s : t.steps) CHECK((s.act - policy::act(p, st, s.obs) - z).norm() < 1e-12);

  const Eigen::VectorXd z0 = sample_noise_vector(a_std, 0.0, rng);
  const env::Trajectory a = env::run_episode(c.env, actor, Vec2(-0.6, 0.2), z0, 99);
  const env::Trajectory b =
      env::run_episode(c.env, actor, Vec2(-0.6, 0.2), Eigen::VectorXd::Zero(c.env.joints()), 99);
  REQUIRE(a.length() == b.length());
  for (int i = 0; i < a.length(); ++i) {
    CHECK(a.steps[i].act == b.steps[i].act);
    CHECK(a.steps[i].obs == b.steps[i].obs);
  }
}

TEST_CASE("ssp_iteration accounting") {
  const RunConfig c = small_run();
  const auto ens = policy::make_ensemble({policy::Arch::lstm, c.env.obs_size(), 8, c.env.joints()}, 5, 4);
  dataset::Cache cache(c.env.layout, c.env.joints(), goal_region(c.env.table, c.ssp.goal_margin));
  std::uint64_t next_id = 0;
  Rng rng(5);
  const Eigen::VectorXd a_std = compute_action_std(demos10());
  const IterationReport r = ssp_iteration(ens, c.env, cache, c.ssp, a_std, 10, next_id, rng);
  CHECK(r.attempted == 10);
  CHECK(next_id == 10);
  CHECK(cache.seen_count() == 10);
  for (int m = 0; m < 5; ++m) CHECK(r.per_model_attempted[m] == 2);
  // Untrained nets never hit from the edge-forward home pose.
  CHECK(r.stored == 0);
  CHECK(cache.size() == 0);
  for (const Vec2& g : r.goals) CHECK(cache.region().contains(g));
}

TEST_CASE("run_training schedule, budget and outputs") {
  const RunConfig c = small_run();
  const fs::path dir = fs::temp_directory_path() / "ttgoals_test_run_a";
  fs::remove_all(dir);
  const RunResult r = run_training(c, Mode::goalseye, demos10(), 1, dir, "{}");
  CHECK(r.demos == 10);
  CHECK(r.attempted == c.ssp.total_trajectory_budget - 10);
  int summed = 0;
  for (const auto& row : r.rows) summed += row.attempted;
  CHECK(summed == r.attempted);
  const int iterations = 4;
  REQUIRE(r.rows.size() == iterations + 1);
  CHECK(r.train_steps == c.ssp.warmup_steps + c.ssp.steps_between_ssp * (iterations + 1));
  CHECK(r.cache.demos_count() + r.cache.ssp_count() <= r.cache.seen_count());
  CHECK(r.cache.ssp_count() == r.stored);
  for (const auto& ep : r.cache.episodes()) CHECK(r.cache.region().contains(*ep.goal));

  CHECK(fs::exists(dir / "progress.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "checkpoints" / "final.json"));
  CHECK(fs::exists(dir / "checkpoints" / "iter_0001.json"));
  std::ifstream csv(dir / "progress.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == progress_header());
}

TEST_CASE("identical seeds give byte-identical runs") {
  const RunConfig c = small_run();
  const fs::path a = fs::temp_directory_path() / "ttgoals_test_det_a";
  const fs::path b = fs::temp_directory_path() / "ttgoals_test_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_training(c, Mode::goalseye, demos10(), 2, a);
  run_training(c, Mode::goalseye, demos10(), 2, b);
  CHECK(slurp(a / "progress.csv") == slurp(b / "progress.csv"));
  CHECK(slurp(a / "checkpoints" / "final.json") == slurp(b / "checkpoints" / "final.json"));
  CHECK(slurp(a / "checkpoints" / "iter_0001.json") == slurp(b / "checkpoints" / "iter_0001.json"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("a one-model ensemble follows the single-model path") {
  const RunConfig c = small_run();
  const RunResult r = run_training(c, Mode::goalseye, demos10(), 1, std::nullopt);

  // Hand-rolled loop with one parameter set, on the same random streams.
  const dataset::Cache& demos = demos10();
  dataset::Cache cache(c.env.layout, c.env.joints(), goal_region(c.env.table, c.ssp.goal_margin));
  for (const auto& ep : demos.episodes()) cache.append(ep, env::Source::demo);
  const policy::PolicyConfig pc{c.train.arch, c.env.obs_size(), c.train.hidden, c.env.joints()};
  policy::PolicyParams p = policy::make_ensemble(pc, 1, stream_seed(c.seed, 3)).models[0];
  p.norm = policy::Normalizer::fit(cache);
  policy::AdamState opt = policy::AdamState::zeros_like(p);
  const Eigen::VectorXd a_std = compute_action_std(cache);
  Rng train_rng(stream_seed(c.seed, 1, 0)), practice(stream_seed(c.seed, 2));
  auto train = [&](int steps) {
    for (int s = 0; s < steps; ++s) {
      policy::train_step(p, opt, dataset::sample_batch(cache, c.train.batch_size, c.train.window, train_rng),
                         c.train);
    }
  };
  std::uint64_t id = demos.size();
  train(c.ssp.warmup_steps);
  const GoalRegion region = goal_region(c.env.table, c.ssp.goal_margin);
  for (int it = 0; it < 4; ++it) {
    train(c.ssp.steps_between_ssp);
    for (int k = 0; k < c.ssp.num_ssp_per_iter; ++k) {
      const Vec2 goal = sample_goal(region, practice);
      const Eigen::VectorXd z = sample_noise_vector(a_std, c.ssp.noise_scale, practice);
      const std::uint64_t seed = practice();
      policy::PolicyActor actor(p);
      env::Trajectory t = env::run_episode(c.env, actor, goal, z, seed);
      t.meta.id = id++;
      t.meta.model_id = 0;
      if (dataset::filter_good(t, cache.region())) cache.append(dataset::relabel(t), env::Source::ssp);
    }
  }
  train(c.ssp.steps_between_ssp);

  CHECK(cache.size() == r.cache.size());
  for (std::size_t k = 0; k < p.tensors.size(); ++k) CHECK(p.tensors[k] == r.ensemble.models[0].tensors[k]);
}

TEST_CASE("degenerate schedules") {
  RunConfig c = small_run();
  c.ssp.total_trajectory_budget = 10;
  const RunResult lfp = run_training(c, Mode::goalseye, demos10(), 1, std::nullopt);
  CHECK(lfp.attempted == 0);
  CHECK(lfp.rows.size() == 1);

  c = small_run();
  const RunResult l = run_training(c, Mode::lfp, demos10(), 1, std::nullopt);
  CHECK(l.attempted == 0);
  CHECK(l.cache.size() == 10);

  c.ssp.total_trajectory_budget = 0;
  CHECK_THROWS_AS(run_training(c, Mode::gcsl, demos10(), 1, std::nullopt), ConfigError);

  c = small_run();
  c.ssp.total_trajectory_budget = 20;
  const RunResult g = run_training(c, Mode::gcsl, demos10(), 1, std::nullopt);
  CHECK(g.demos == 0);
  CHECK(g.attempted == 20);
  CHECK(g.stored == 0);
  CHECK(g.train_steps == 0);
}

TEST_CASE("progress line format") {
  ProgressRow row;
  row.iter = 3;
  row.attempted = 20;
  row.stored = 4;
  row.cache_size = 214;
  row.train_loss = 0.25;
  row.eval_pct_30 = 12.5;
  row.eval_pct_20 = 5.0;
  CHECK(progress_line(row) == "3,20,4,214,0.250000,12.500000,5.000000,nan");
  CHECK(parse_mode("lfp") == Mode::lfp);
  CHECK_THROWS_AS(parse_mode("rl"), ConfigError);
}
