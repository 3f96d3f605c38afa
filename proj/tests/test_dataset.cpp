#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ttgoals/bootstrap.hpp"
#include "ttgoals/dataset.hpp"

using namespace ttgoals;
using namespace ttgoals::dataset;
using env::Event;
using env::ObsLayout;
using physics::Vec3;

namespace fs = std::filesystem;

namespace {

constexpr int kJ = 6;

Trajectory synthetic(Rng& rng, std::uint64_t id, int len, int hit, ObsLayout layout = ObsLayout::flat_vel) {
  Trajectory t;
  t.layout = layout;
  const int D = env::observation_size(layout, kJ);
  for (int i = 0; i < len; ++i) {
    env::Step s;
    s.obs = Eigen::VectorXd::NullaryExpr(D, [&] { return uniform(rng, -2, 2); });
    s.act = Eigen::VectorXd::NullaryExpr(kJ, [&] { return uniform(rng, -1, 1); });
    t.steps.push_back(s);
  }
  t.hit_index = hit;
  t.landing = physics::LandingEvent{uniform(rng, -1.3, -0.1), uniform(rng, -0.7, 0.7), uniform(rng, 0.5, 1.5)};
  t.goal = Vec2(uniform(rng, -1.3, -0.1), uniform(rng, -0.7, 0.7));
  t.events.add(Event::hit);
  t.events.add(Event::landed);
  t.meta.id = id;
  t.meta.seed = rng();
  t.meta.model_id = static_cast<int>(id % 3);
  t.meta.throw_spec.launch_pos = Vec3(-1.6, 0.3, 0.35);
  t.meta.throw_spec.target_landing = Vec2(0.9, 0.27);
  t.meta.throw_spec.speed = uniform(rng, 6.9, 7.1);
  return relabel(t);
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("ttgoals_test_" + name);
}

const Cache& scripted_demos() {
  static const Cache demos = [] {
    env::EnvConfig cfg;
    cfg.control_hz = 50;
    return bootstrap::generate_scripted(bootstrap::DemonstratorConfig{}, 12, cfg, 77).demos;
  }();
  return demos;
}

}  // namespace

TEST_CASE("relabel rewrites every goal slot and keeps the commanded goal") {
  Rng rng(1);
  for (ObsLayout lay : {ObsLayout::flat_vel, ObsLayout::flat, ObsLayout::stacked}) {
    Trajectory t = synthetic(rng, 1, 30, 10, lay);
    t.landing = physics::LandingEvent{-0.8, 0.3, 1.0};
    t.goal = Vec2(-0.2, -0.5);
    t.meta.commanded_goal.reset();
    const Trajectory r = relabel(t);
    CHECK(*r.goal == Vec2(-0.8, 0.3));
    CHECK(*r.meta.commanded_goal == Vec2(-0.2, -0.5));
    const int stride = env::goal_stride(lay, kJ);
    for (const auto& s : r.steps) {
      for (int off = stride - 2; off < s.obs.size(); off += stride) {
        CHECK(s.obs[off] == -0.8);
        CHECK(s.obs[off + 1] == 0.3);
      }
    }
    CHECK(same_episode(relabel(r), r));
    t.landing.reset();
    CHECK_THROWS_AS(relabel(t), NotRelabelable);
  }
}

TEST_CASE("filter_good") {
  Rng rng(2);
  const GoalRegion region;
  Trajectory t = synthetic(rng, 1, 20, 5);
  CHECK(filter_good(t, region));
  Trajectory nohit = t;
  nohit.hit_index.reset();
  CHECK_FALSE(filter_good(nohit, region));
  Trajectory net = t;
  net.landing.reset();
  CHECK_FALSE(filter_good(net, region));
  Trajectory far = t;
  far.landing->x = -2.5;
  CHECK_FALSE(filter_good(far, region));
}

TEST_CASE("a simulated net strike is filtered out") {
  env::EnvConfig cfg;
  cfg.control_hz = 50;
  bootstrap::DemonstratorConfig dc;
  dc.tilt = -0.1;
  dc.tilt_jitter = 0.0;
  dc.yaw_jitter = 0.0;
  bool found = false;
  for (std::uint64_t s = 0; s < 40 && !found; ++s) {
    bootstrap::ScriptedDemonstrator demo(dc, s);
    const Trajectory t =
        env::run_episode(cfg, demo, Vec2(-0.7, 0.0), Eigen::VectorXd::Zero(cfg.joints()), s);
    if (t.hit_index && t.events.has(Event::net)) {
      found = true;
      CHECK_FALSE(t.landing);
      CHECK_FALSE(filter_good(t, GoalRegion{}));
    }
  }
  CHECK(found);
}

TEST_CASE("sample_window interval arithmetic") {
  Rng rng(3);
  auto starts = [&](int len, int hit, int k) {
    const Trajectory t = synthetic(rng, 1, len, hit);
    int lo = 1 << 30, hi = -1;
    for (int i = 0; i < 4000; ++i) {
      const WindowSample w = sample_window(t, k, rng);
      CHECK(w.length() == std::min(k, len));
      lo = std::min(lo, w.start);
      hi = std::max(hi, w.start);
    }
    return std::pair{lo, hi};
  };
  CHECK(starts(120, 40, 96) == std::pair{0, 24});
  CHECK(starts(20, 12, 16) == std::pair{0, 4});
  CHECK(starts(10, 3, 16) == std::pair{0, 0});
  const Trajectory t = synthetic(rng, 1, 10, 3);
  CHECK_THROWS_AS(sample_window(t, 0, rng), ContractViolation);
}

TEST_CASE("10k windows all contain the hit") {
  Rng rng(4);
  std::vector<Trajectory> eps;
  for (int i = 0; i < 50; ++i) {
    const int len = std::uniform_int_distribution<int>(1, 150)(rng);
    const int hit = std::uniform_int_distribution<int>(0, len - 1)(rng);
    eps.push_back(synthetic(rng, i, len, hit));
  }
  for (int i = 0; i < 10000; ++i) {
    const Trajectory& t = eps[i % eps.size()];
    const int k = std::uniform_int_distribution<int>(1, 100)(rng);
    const WindowSample w = sample_window(t, k, rng);
    CHECK(w.start <= *t.hit_index);
    CHECK(*t.hit_index < w.start + w.length());
    CHECK(w.obs.col(0) == t.steps[w.start].obs);
  }
}

TEST_CASE("cache counters and contract") {
  Rng rng(5);
  Cache c(ObsLayout::flat_vel, kJ);
  for (int i = 0; i < 27; ++i) c.append(synthetic(rng, i, 20, 5), Source::demo);
  CHECK(c.demos_count() == 27);
  CHECK(c.seen_count() == 27);
  c.record_attempt();
  CHECK(c.size() == 27);
  CHECK(c.seen_count() == 28);
  CHECK_THROWS_AS(c.append(synthetic(rng, 3, 20, 5), Source::ssp), ContractViolation);

  Trajectory raw = synthetic(rng, 100, 20, 5);
  raw.goal = Vec2(0.1, 0.1);
  CHECK_THROWS_AS(c.append(raw, Source::ssp), ContractViolation);
  Trajectory nohit = synthetic(rng, 101, 20, 5);
  nohit.hit_index.reset();
  CHECK_THROWS_AS(c.append(nohit, Source::ssp), ContractViolation);
  c.append(synthetic(rng, 102, 20, 5), Source::ssp);
  CHECK(c.ssp_count() == 1);
  CHECK(c.demos_count() + c.ssp_count() <= c.seen_count());
}

TEST_CASE("sample_batch") {
  Rng rng(6);
  Cache c(ObsLayout::flat_vel, kJ);
  Rng r0(1);
  CHECK_THROWS_AS(sample_batch(c, 4, 8, r0), ContractViolation);
  c.append(synthetic(rng, 9, 30, 12), Source::demo);
  CHECK(sample_batch(c, 0, 8, r0).empty());
  for (const auto& w : sample_batch(c, 16, 8, r0)) CHECK(w.episode_id == 9);
  for (int i = 10; i < 20; ++i) c.append(synthetic(rng, i, 30, 12), Source::demo);
  Rng a(77), b(77);
  const auto ba = sample_batch(c, 32, 8, a), bb = sample_batch(c, 32, 8, b);
  for (int i = 0; i < 32; ++i) {
    CHECK(ba[i].episode_id == bb[i].episode_id);
    CHECK(ba[i].start == bb[i].start);
  }
}

TEST_CASE("JSONL round-trip on random caches") {
  Rng rng(7);
  const fs::path p = temp_file("roundtrip.jsonl");
  for (int trial = 0; trial < 100; ++trial) {
    const ObsLayout lay = static_cast<ObsLayout>(trial % 3);
    Cache c(lay, kJ);
    const int n = trial % 5;
    for (int i = 0; i < n; ++i) {
      const int len = std::uniform_int_distribution<int>(1, 12)(rng);
      Trajectory t = synthetic(rng, 1000 * trial + i, len, len / 2, lay);
      t.meta.source = i % 2 ? Source::ssp : Source::demo;
      if (i == 1) t.meta.commanded_goal.reset();
      c.append(t, t.meta.source);
    }
    save_jsonl(c, p);
    const Cache d = load_jsonl(p);
    REQUIRE(d.size() == c.size());
    CHECK(d.layout() == c.layout());
    CHECK(d.joints() == c.joints());
    CHECK(d.demos_count() == c.demos_count());
    CHECK(d.ssp_count() == c.ssp_count());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(same_episode(c.episodes()[i], d.episodes()[i]));
  }
  fs::remove(p);
}

TEST_CASE("JSONL line counts and parse errors") {
  Rng rng(8);
  const fs::path p = temp_file("lines.jsonl");
  auto count_lines = [&] {
    std::ifstream in(p);
    int n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
  };
  Cache c(ObsLayout::flat_vel, kJ);
  save_jsonl(c, p);
  CHECK(count_lines() == 1);
  for (int i = 0; i < 3; ++i) c.append(synthetic(rng, i, 10, 4), Source::demo);
  save_jsonl(c, p);
  CHECK(count_lines() == 4);

  std::string text;
  {
    std::ifstream in(p);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::ofstream(p) << text.substr(0, text.size() - 40);
  try {
    load_jsonl(p);
    FAIL("truncated file loaded");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  fs::remove(p);
}

TEST_CASE("scripted demos: relabeled goal equals the replayed landing") {
  const Cache& demos = scripted_demos();
  REQUIRE(demos.size() == 12);
  env::EnvConfig cfg;
  cfg.control_hz = 50;
  for (const Trajectory& t : demos.episodes()) {
    REQUIRE(t.hit_index);
    const auto path = env::replay_ball_path(cfg, t);
    // Landing search over the flight after the ball crossed to the far side.
    std::size_t from = path.size();
    while (from > 0 && path[from - 1].pos.x() <= 0.0) --from;
    REQUIRE(from > 0);
    const auto land = physics::detect_landing(std::span(path).subspan(from - 1), cfg.drag);
    REQUIRE(land);
    CHECK(std::abs(land->x - t.goal->x()) < 1e-9);
    CHECK(std::abs(land->y - t.goal->y()) < 1e-9);
  }
}
