#include "ttgoals/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ttgoals::dataset {

using nlohmann::json;

GoalRegion GoalRegion::opponent_half(const physics::TableGeometry& table, double margin) {
  if (!(margin >= 0.0)) throw ConfigError("goal region: margin must be >= 0");
  return {-table.half_length() - margin, 0.0, -table.half_width() - margin,
          table.half_width() + margin};
}

void GoalRegion::validate() const {
  if (!(x_lo < x_hi && y_lo < y_hi)) throw ConfigError("goal region: empty rectangle");
}

void write_goal(Eigen::Ref<Eigen::VectorXd> obs, env::ObsLayout layout, int joints,
                const Vec2& goal) {
  const int stride = env::goal_stride(layout, joints);
  if (obs.size() % stride != 0) throw ShapeError("write_goal: observation size mismatch");
  for (int end = stride; end <= obs.size(); end += stride) obs.segment(end - 2, 2) = goal;
}

Trajectory relabel(const Trajectory& traj) {
  if (!traj.landing) throw NotRelabelable("relabel: episode has no landing");
  Trajectory out = traj;
  const Vec2 goal = traj.landing->xy();
  out.goal = goal;
  const int J = traj.joints();
  for (env::Step& s : out.steps) write_goal(s.obs, traj.layout, J, goal);
  if (!out.meta.commanded_goal) out.meta.commanded_goal = traj.goal;
  return out;
}

bool filter_good(const Trajectory& traj, const GoalRegion& region) {
  return traj.hit_index.has_value() && traj.landing.has_value() &&
         region.contains(traj.landing->xy());
}

WindowSample sample_window(const Trajectory& traj, int k, Rng& rng) {
  if (k < 1) throw ContractViolation("sample_window: k must be >= 1");
  if (!traj.hit_index) throw ContractViolation("sample_window: episode has no hit");
  const int len = traj.length();
  const int hit = *traj.hit_index;
  if (hit < 0 || hit >= len) throw ContractViolation("sample_window: hit index out of range");
  int start = 0;
  int n = len;
  if (len >= k) {
    const int lo = std::max(0, hit - k + 1);
    const int hi = std::min(hit, len - k);
    start = std::uniform_int_distribution<int>(lo, hi)(rng);
    n = k;
  }
  WindowSample w;
  const int D = static_cast<int>(traj.steps.front().obs.size());
  const int J = traj.joints();
  w.obs.resize(D, n);
  w.act.resize(J, n);
  for (int t = 0; t < n; ++t) {
    w.obs.col(t) = traj.steps[start + t].obs;
    w.act.col(t) = traj.steps[start + t].act;
  }
  w.goal = traj.goal.value_or(Vec2::Zero());
  w.episode_id = traj.meta.id;
  w.start = start;
  return w;
}

Cache::Cache(env::ObsLayout layout, int joints, GoalRegion region)
    : layout_(layout), joints_(joints), region_(region) {
  region_.validate();
}

void Cache::append(const Trajectory& traj, Source source) {
  if (!filter_good(traj, region_)) throw ContractViolation("cache: episode fails the filter");
  if (!traj.goal || (*traj.goal - traj.landing->xy()).norm() != 0.0) {
    throw ContractViolation("cache: episode is not relabeled");
  }
  if (traj.layout != layout_ || traj.joints() != joints_) {
    throw ContractViolation("cache: episode layout or joint count differs from the cache");
  }
  if (source == Source::eval) throw ContractViolation("cache: evaluation episodes are not stored");
  if (!ids_.insert(traj.meta.id).second) {
    throw ContractViolation("cache: duplicate episode id " + std::to_string(traj.meta.id));
  }
  episodes_.push_back(traj);
  episodes_.back().meta.source = source;
  if (source == Source::demo) {
    ++demos_count_;
  } else {
    ++ssp_count_;
  }
  seen_count_ = std::max(seen_count_, demos_count_ + ssp_count_);
}

std::vector<WindowSample> sample_batch(const Cache& cache, int batch_size, int k, Rng& rng) {
  if (batch_size < 0) throw ContractViolation("sample_batch: negative batch size");
  std::vector<WindowSample> out;
  if (batch_size == 0) return out;
  if (cache.empty()) throw ContractViolation("sample_batch: cache is empty");
  std::uniform_int_distribution<std::size_t> pick(0, cache.size() - 1);
  out.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) out.push_back(sample_window(cache.episodes()[pick(rng)], k, rng));
  return out;
}

namespace {

bool same_vec(const std::optional<Vec2>& a, const std::optional<Vec2>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b;
}

}  // namespace

bool same_episode(const Trajectory& a, const Trajectory& b) {
  if (a.layout != b.layout || a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    if (a.steps[i].obs.size() != b.steps[i].obs.size() || a.steps[i].obs != b.steps[i].obs) return false;
    if (a.steps[i].act.size() != b.steps[i].act.size() || a.steps[i].act != b.steps[i].act) return false;
  }
  if (a.hit_index != b.hit_index || !(a.events == b.events)) return false;
  if (a.landing.has_value() != b.landing.has_value()) return false;
  if (a.landing && (a.landing->x != b.landing->x || a.landing->y != b.landing->y ||
                    a.landing->t != b.landing->t)) {
    return false;
  }
  if (!same_vec(a.goal, b.goal)) return false;
  const env::EpisodeMeta& m = a.meta;
  const env::EpisodeMeta& n = b.meta;
  return m.id == n.id && m.seed == n.seed && m.model_id == n.model_id && m.source == n.source &&
         m.clamped == n.clamped && same_vec(m.commanded_goal, n.commanded_goal) &&
         m.throw_spec.launch_pos == n.throw_spec.launch_pos &&
         m.throw_spec.target_landing == n.throw_spec.target_landing &&
         m.throw_spec.speed == n.throw_spec.speed;
}

namespace {

json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json opt_xy(const std::optional<Vec2>& p) {
  return p ? json::array({p->x(), p->y()}) : json(nullptr);
}

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::optional<Vec2> opt_xy_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw std::invalid_argument("expected an [x, y] pair");
  return Vec2(v[0], v[1]);
}

json episode_json(const Trajectory& t) {
  json steps = json::array();
  for (const env::Step& s : t.steps) steps.push_back({{"obs", vec_json(s.obs)}, {"act", vec_json(s.act)}});
  json landing = nullptr;
  if (t.landing) landing = json::array({t.landing->x, t.landing->y});
  const env::EpisodeMeta& m = t.meta;
  json meta = {
      {"id", m.id},
      {"seed", m.seed},
      {"model_id", m.model_id},
      {"source", env::to_string(m.source)},
      {"commanded_goal", opt_xy(m.commanded_goal)},
      {"clamped", m.clamped},
      {"landing_t", t.landing ? json(t.landing->t) : json(nullptr)},
      {"throw",
       {{"launch", vec_json(m.throw_spec.launch_pos)},
        {"target", vec_json(m.throw_spec.target_landing)},
        {"speed", m.throw_spec.speed}}},
  };
  return {{"steps", std::move(steps)},
          {"hit_index", t.hit_index ? json(*t.hit_index) : json(nullptr)},
          {"landing", std::move(landing)},
          {"goal", opt_xy(t.goal)},
          {"events", t.events.names()},
          {"meta", std::move(meta)}};
}

Trajectory episode_from(const json& j, env::ObsLayout layout, int joints) {
  Trajectory t;
  t.layout = layout;
  const int D = env::observation_size(layout, joints);
  for (const json& s : j.at("steps")) {
    env::Step step{vec_from(s.at("obs")), vec_from(s.at("act"))};
    if (step.obs.size() != D || step.act.size() != joints) {
      throw std::invalid_argument("step dimensions do not match the manifest");
    }
    t.steps.push_back(std::move(step));
  }
  if (!j.at("hit_index").is_null()) t.hit_index = j.at("hit_index").get<int>();
  const json& meta = j.at("meta");
  if (auto xy = opt_xy_from(j.at("landing"))) {
    const json& lt = meta.at("landing_t");
    t.landing = physics::LandingEvent{xy->x(), xy->y(), lt.is_null() ? 0.0 : lt.get<double>()};
  }
  t.goal = opt_xy_from(j.at("goal"));
  t.events = env::EventSet::from_names(j.at("events").get<std::vector<std::string>>());
  env::EpisodeMeta& m = t.meta;
  m.id = meta.at("id").get<std::uint64_t>();
  m.seed = meta.at("seed").get<std::uint64_t>();
  m.model_id = meta.at("model_id").get<int>();
  m.source = env::parse_source(meta.at("source").get<std::string>());
  m.commanded_goal = opt_xy_from(meta.at("commanded_goal"));
  m.clamped = meta.at("clamped").get<bool>();
  const json& th = meta.at("throw");
  const Eigen::VectorXd launch = vec_from(th.at("launch"));
  const Eigen::VectorXd target = vec_from(th.at("target"));
  if (launch.size() != 3 || target.size() != 2) throw std::invalid_argument("bad throw spec");
  m.throw_spec.launch_pos = launch;
  m.throw_spec.target_landing = target;
  m.throw_spec.speed = th.at("speed").get<double>();
  return t;
}

}  // namespace

void save_jsonl(const Cache& cache, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_jsonl: cannot open " + path.string());
  const json manifest = {{"version", 1},
                         {"joint_count", cache.joints()},
                         {"obs_layout", env::to_string(cache.layout())}};
  out << manifest.dump() << '\n';
  for (const Trajectory& t : cache.episodes()) out << episode_json(t).dump() << '\n';
  if (!out) throw Error("save_jsonl: write failed for " + path.string());
}

Cache load_jsonl(const std::filesystem::path& path, const GoalRegion& region) {
  std::ifstream in(path);
  if (!in) throw Error("load_jsonl: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing manifest", 1);
  env::ObsLayout layout;
  int joints = 0;
  try {
    const json manifest = json::parse(line);
    if (manifest.at("version").get<int>() != 1) throw std::invalid_argument("unsupported version");
    joints = manifest.at("joint_count").get<int>();
    layout = env::parse_layout(manifest.at("obs_layout").get<std::string>());
    if (joints <= 0) throw std::invalid_argument("joint_count must be positive");
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what(), 1);
  }

  Cache cache(layout, joints, region);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Trajectory t;
    try {
      t = episode_from(json::parse(line), layout, joints);
    } catch (const std::exception& e) {
      throw ParseError(e.what(), lineno);
    }
    try {
      cache.append(t, t.meta.source);
    } catch (const ContractViolation& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return cache;
}

}  // namespace ttgoals::dataset
