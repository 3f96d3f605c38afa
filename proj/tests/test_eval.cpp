#include <doctest.h>

#include <cmath>

#include "ttgoals/eval.hpp"

using namespace ttgoals;
using namespace ttgoals::eval;

namespace {

Outcome at(const Vec2& goal, std::optional<Vec2> landing) { return {goal, landing}; }

policy::PolicyParams frozen_policy(const env::EnvConfig& cfg) {
  return policy::zero_params({policy::Arch::lstm, cfg.obs_size(), 8, cfg.joints()});
}

}  // namespace

TEST_CASE("score arithmetic") {
  const Vec2 g(-0.7, 0.0);
  const Metrics m = score({at(g, g), at(g, g + Vec2(0.25, 0)), at(g, g + Vec2(0, 0.5))}, {0.30, 0.20});
  CHECK(m.n_attempts == 3);
  CHECK(m.n_landed == 3);
  CHECK(m.pct(0.30) == doctest::Approx(200.0 / 3));
  CHECK(m.pct(0.20) == doctest::Approx(100.0 / 3));
  REQUIRE(m.mean_dist);
  CHECK(*m.mean_dist == doctest::Approx(0.25));

  const Metrics net = score({at(g, std::nullopt), at(g, std::nullopt)}, {0.30, 0.20});
  CHECK(net.pct(0.30) == 0.0);
  CHECK(net.pct(0.20) == 0.0);
  CHECK_FALSE(net.mean_dist);
  CHECK(net.n_landed == 0);

  const Metrics edge = score({at(Vec2(0, 0), Vec2(0.2, 0))}, {0.20});
  CHECK(edge.pct(0.20) == 100.0);
  CHECK_THROWS(m.pct(0.5));
}

TEST_CASE("pct_within shrinks with the threshold") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Outcome> out;
    for (int i = 0; i < 40; ++i) {
      const Vec2 g(uniform(rng, -1.3, -0.1), uniform(rng, -0.7, 0.7));
      if (uniform(rng, 0, 1) < 0.3) {
        out.push_back(at(g, std::nullopt));
      } else {
        out.push_back(at(g, g + Vec2(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5))));
      }
    }
    const Metrics m = score(out, {0.5, 0.4, 0.3, 0.2, 0.1});
    for (std::size_t k = 1; k < m.pct_within.size(); ++k) CHECK(m.pct_within[k] <= m.pct_within[k - 1]);
    for (double p : m.pct_within) CHECK((p >= 0.0 && p <= 100.0));
  }
}

TEST_CASE("coverage ratio") {
  const physics::TableGeometry t;
  const double half = t.half_length() * t.width;
  CHECK(coverage_ratio(0.30) == doctest::Approx(M_PI * 0.09 / half).epsilon(1e-14));
  CHECK(coverage_ratio(0.30) >= 0.130);
  CHECK(coverage_ratio(0.30) <= 0.140);
  CHECK(coverage_ratio(0.20) >= 0.057);
  CHECK(coverage_ratio(0.20) <= 0.063);
  CHECK(coverage_ratio(1e-6) < 1e-11);
  CHECK_THROWS_AS(coverage_ratio(0.0), ConfigError);
}

TEST_CASE("uniform goals lie on the opponent half") {
  const physics::TableGeometry t;
  const auto goals = uniform_goals(t, 2000, 3);
  REQUIRE(goals.size() == 2000);
  double mx = 0.0;
  for (const Vec2& g : goals) {
    CHECK(g.x() <= 0.0);
    CHECK(g.x() >= -t.half_length());
    CHECK(std::abs(g.y()) <= t.half_width());
    mx += g.x();
  }
  CHECK(mx / 2000 == doctest::Approx(-t.half_length() / 2).epsilon(0.05));
  CHECK(uniform_goals(t, 10, 3) == std::vector<Vec2>(goals.begin(), goals.begin() + 10));
}

TEST_CASE("goal table rows") {
  std::vector<std::vector<Outcome>> per_goal(5);
  for (int g = 0; g < 5; ++g) {
    for (int i = 0; i < 5; ++i) per_goal[g].push_back(at(Vec2(-0.5, 0.1 * g), Vec2(-0.5, 0.1 * g)));
  }
  const GoalTable t = goal_table(per_goal, {0.30, 0.20});
  REQUIRE(t.rows.size() == 6);
  CHECK(t.labels.front() == "A");
  CHECK(t.labels.back() == "avg");
  for (const Metrics& m : t.rows) {
    CHECK(m.pct(0.30) == 100.0);
    CHECK(m.pct(0.20) == 100.0);
  }
  CHECK(t.rows.back().n_attempts == 25);
  CHECK(t.format().find("100") != std::string::npos);
}

TEST_CASE("frozen policy scores zero on the five goals") {
  env::EnvConfig cfg;
  cfg.control_hz = 50;
  EvalConfig ec;
  ec.goals = GoalSet::five;
  ec.episodes = 5;
  const GoalTable t = five_goal_eval({frozen_policy(cfg)}, cfg, ec);
  REQUIRE(t.rows.size() == 6);
  CHECK(t.rows.back().n_attempts == 25);
  for (const Metrics& m : t.rows) {
    CHECK(m.pct(0.30) == 0.0);
    CHECK(m.pct(0.20) == 0.0);
  }
}

TEST_CASE("evaluate is deterministic") {
  env::EnvConfig cfg;
  cfg.control_hz = 50;
  EvalConfig ec;
  ec.episodes = 6;
  Rng rng(4);
  const auto p = policy::init_params({policy::Arch::lstm, cfg.obs_size(), 8, cfg.joints()}, rng);
  const auto goals = eval_goals(ec, cfg.table);
  CHECK(goals.size() == 6);
  const auto a = rollout_goals({p}, cfg, goals, 9), b = rollout_goals({p}, cfg, goals, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].goal == b[i].goal);
    CHECK(a[i].landing.has_value() == b[i].landing.has_value());
    if (a[i].landing) CHECK(*a[i].landing == *b[i].landing);
  }
}

TEST_CASE("config validation and names") {
  EvalConfig ec;
  ec.thresholds = {0.3, -0.1};
  CHECK_THROWS_AS(ec.validate(), ConfigError);
  ec = EvalConfig{};
  ec.episodes = 0;
  CHECK_THROWS_AS(ec.validate(), ConfigError);
  CHECK(parse_goal_set("five") == GoalSet::five);
  CHECK_THROWS_AS(parse_goal_set("six"), ConfigError);
  CHECK(default_five_goals().size() == 5);
}
