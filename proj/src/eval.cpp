#include "ttgoals/eval.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace ttgoals::eval {

std::string to_string(GoalSet g) { return g == GoalSet::five ? "five" : "uniform"; }

GoalSet parse_goal_set(const std::string& name) {
  if (name == "five") return GoalSet::five;
  if (name == "uniform") return GoalSet::uniform;
  throw ConfigError("unknown goal set '" + name + "'");
}

std::vector<Vec2> default_five_goals() {
  return {Vec2(-1.10, -0.55), Vec2(-1.10, 0.55), Vec2(-0.70, 0.0), Vec2(-0.30, -0.55),
          Vec2(-0.30, 0.55)};
}

void EvalConfig::validate() const {
  if (episodes < 1 || progress_episodes < 1) throw ConfigError("eval: episode counts must be >= 1");
  if (thresholds.empty()) throw ConfigError("eval: no thresholds");
  for (double t : thresholds) {
    if (!(t > 0.0)) throw ConfigError("eval: thresholds must be positive");
  }
  if (five_goals.size() != 5) throw ConfigError("eval: five_goals needs exactly five points");
}

double Metrics::pct(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] == threshold) return pct_within[i];
  }
  throw ContractViolation("metrics: threshold not evaluated");
}

Metrics score(const std::vector<Outcome>& outcomes, const std::vector<double>& thresholds) {
  Metrics m;
  m.thresholds = thresholds;
  m.n_attempts = static_cast<int>(outcomes.size());
  std::vector<int> within(thresholds.size(), 0);
  double dist_sum = 0.0;
  for (const Outcome& o : outcomes) {
    if (!o.landing) continue;
    ++m.n_landed;
    const double d = (*o.landing - o.goal).norm();
    dist_sum += d;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (d <= thresholds[i]) ++within[i];
    }
  }
  if (m.n_landed > 0) m.mean_dist = dist_sum / m.n_landed;
  for (int w : within) {
    m.pct_within.push_back(m.n_attempts > 0 ? 100.0 * w / m.n_attempts : 0.0);
  }
  return m;
}

std::vector<Vec2> uniform_goals(const physics::TableGeometry& table, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec2> goals;
  goals.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = uniform(rng, -table.half_length(), 0.0);
    const double y = uniform(rng, -table.half_width(), table.half_width());
    goals.emplace_back(x, y);
  }
  return goals;
}

std::vector<Outcome> rollout_goals(const std::vector<policy::PolicyParams>& models,
                                   const env::EnvConfig& env_cfg, const std::vector<Vec2>& goals,
                                   std::uint64_t seed) {
  if (models.empty()) throw ContractViolation("evaluate: no models");
  for (const auto& m : models) {
    if (m.config.input_dim != env_cfg.obs_size() || m.config.joints != env_cfg.joints()) {
      throw ShapeError("evaluate: policy does not match the observation layout or joint count");
    }
  }
  std::vector<Outcome> out;
  out.reserve(goals.size());
  for (std::size_t i = 0; i < goals.size(); ++i) {
    policy::PolicyActor actor(models[i % models.size()]);
    const env::Trajectory t = env::run_episode(env_cfg, actor, goals[i], Eigen::VectorXd(),
                                               stream_seed(seed, i, 0x5eed));
    Outcome o{goals[i], std::nullopt};
    if (t.events.has(env::Event::landed)) o.landing = t.landing->xy();
    out.push_back(o);
  }
  return out;
}

Metrics evaluate(const std::vector<policy::PolicyParams>& models, const env::EnvConfig& env_cfg,
                 const std::vector<Vec2>& goals, const EvalConfig& cfg) {
  return score(rollout_goals(models, env_cfg, goals, cfg.seed), cfg.thresholds);
}

std::vector<Vec2> eval_goals(const EvalConfig& cfg, const physics::TableGeometry& table) {
  if (cfg.goals == GoalSet::uniform) return uniform_goals(table, cfg.episodes, cfg.seed);
  std::vector<Vec2> goals;
  for (const Vec2& g : cfg.five_goals) {
    for (int k = 0; k < cfg.episodes; ++k) goals.push_back(g);
  }
  return goals;
}

double coverage_ratio(double threshold, const physics::TableGeometry& table) {
  if (!(threshold > 0.0)) throw ConfigError("coverage_ratio: threshold must be positive");
  return std::numbers::pi * threshold * threshold / (table.half_length() * table.width);
}

std::string GoalTable::format() const {
  std::string s;
  char buf[96];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Metrics& m = rows[i];
    std::snprintf(buf, sizeof buf, "%-4s %5.1f | %5.1f\n", labels[i].c_str(), m.pct_within.at(0),
                  m.pct_within.at(1));
    s += buf;
  }
  return s;
}

GoalTable goal_table(const std::vector<std::vector<Outcome>>& per_goal,
                     const std::vector<double>& thresholds) {
  GoalTable table;
  std::vector<Outcome> all;
  for (std::size_t g = 0; g < per_goal.size(); ++g) {
    table.labels.push_back(std::string(1, static_cast<char>('A' + g)));
    table.rows.push_back(score(per_goal[g], thresholds));
    all.insert(all.end(), per_goal[g].begin(), per_goal[g].end());
  }
  table.labels.push_back("avg");
  table.rows.push_back(score(all, thresholds));
  return table;
}

GoalTable five_goal_eval(const std::vector<policy::PolicyParams>& models,
                         const env::EnvConfig& env_cfg, const EvalConfig& cfg) {
  EvalConfig five = cfg;
  five.goals = GoalSet::five;
  const std::vector<Outcome> outcomes =
      rollout_goals(models, env_cfg, eval_goals(five, env_cfg.table), cfg.seed);
  std::vector<std::vector<Outcome>> per_goal(cfg.five_goals.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    per_goal[i / cfg.episodes].push_back(outcomes[i]);
  }
  return goal_table(per_goal, cfg.thresholds);
}

}  // namespace ttgoals::eval
