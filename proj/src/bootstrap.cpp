#include "ttgoals/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace ttgoals::bootstrap {

void EsConfig::validate() const {
  if (population < 2 || population % 2 != 0) {
    throw ConfigError("es: population must be even and >= 2");
  }
  if (!(sigma > 0.0)) throw ConfigError("es: sigma must be positive");
  if (!(step_size > 0.0)) throw ConfigError("es: step size must be positive");
  if (iterations < 0) throw ConfigError("es: iterations must be >= 0");
}

Eigen::VectorXd centered_ranks(const Eigen::VectorXd& f) {
  const Eigen::Index n = f.size();
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return f[a] < f[b]; });
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && f[idx[j + 1]] == f[idx[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j);
    for (Eigen::Index k = i; k <= j; ++k) r[idx[k]] = mean_rank;
    i = j + 1;
  }
  if (n > 1) r = r / static_cast<double>(n - 1) - Eigen::VectorXd::Constant(n, 0.5);
  else r.setZero();
  return r;
}

EsStep es_step(const Eigen::VectorXd& theta,
               const std::function<double(const Eigen::VectorXd&)>& fitness, const EsConfig& cfg,
               Rng& rng) {
  cfg.validate();
  const int n = cfg.population;
  const Eigen::Index d = theta.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd eps(d, n);
  for (int p = 0; p < n / 2; ++p) {
    for (Eigen::Index k = 0; k < d; ++k) eps(k, 2 * p) = normal(rng);
    eps.col(2 * p + 1) = -eps.col(2 * p);
  }
  Eigen::VectorXd f(n);
  EsStep out;
  int best = 0;
  for (int i = 0; i < n; ++i) {
    f[i] = fitness(theta + cfg.sigma * eps.col(i));
    if (f[i] > f[best]) best = i;
  }
  const Eigen::VectorXd r = centered_ranks(f);
  // Summed pair by pair so that equal ranks within a pair cancel exactly.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (int p = 0; p < n / 2; ++p) sum += (r[2 * p] - r[2 * p + 1]) * eps.col(2 * p);
  out.update = cfg.step_size / (n * cfg.sigma) * sum;
  out.theta = theta + out.update;
  out.mean_fitness = f.mean();
  out.best_fitness = f[best];
  out.best = theta + cfg.sigma * eps.col(best);
  return out;
}

EsResult es_optimize(const Eigen::VectorXd& theta0,
                     const std::function<double(const Eigen::VectorXd&)>& fitness,
                     const EsConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  EsResult res;
  res.theta = theta0;
  res.best = theta0;
  res.best_fitness = fitness(theta0);
  for (int it = 0; it < cfg.iterations; ++it) {
    EsStep s = es_step(res.theta, fitness, cfg, rng);
    if (s.best_fitness > res.best_fitness) {
      res.best_fitness = s.best_fitness;
      res.best = s.best;
    }
    res.theta = std::move(s.theta);
    res.trace.push_back(res.theta);
  }
  return res;
}

void FitnessSpec::validate() const {
  if (contact < 0.0 || landed < 0.0 || center < 0.0) throw ConfigError("fitness: weights must be >= 0");
  if (contact + landed + center <= 0.0) throw ConfigError("fitness: all weights are zero");
  if (episodes < 1) throw ConfigError("fitness: episodes must be >= 1");
}

double episode_fitness(const env::Trajectory& traj, const FitnessSpec& spec,
                       const physics::TableGeometry& table) {
  double f = 0.0;
  if (traj.hit_index) f += spec.contact;
  if (traj.events.has(env::Event::landed)) f += spec.landed;
  if (traj.landing) {
    const physics::Vec2 center(-0.5 * table.half_length(), 0.0);
    f -= spec.center * (traj.landing->xy() - center).norm();
  } else {
    // No landing: charge the largest distance on the table.
    f -= spec.center * std::hypot(1.5 * table.half_length(), table.width);
  }
  return f;
}

namespace {

Eigen::VectorXd flatten(const policy::PolicyParams& p) {
  Eigen::VectorXd v(p.size());
  Eigen::Index n = 0;
  for (const auto& t : p.tensors) {
    v.segment(n, t.size()) = Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
    n += t.size();
  }
  return v;
}

void unflatten(const Eigen::VectorXd& v, policy::PolicyParams& p) {
  Eigen::Index n = 0;
  for (auto& t : p.tensors) {
    Eigen::Map<Eigen::VectorXd>(t.data(), t.size()) = v.segment(n, t.size());
    n += t.size();
  }
}

}  // namespace

policy::PolicyParams es_train(const env::EnvConfig& env_cfg, const FitnessSpec& fitness,
                              const EsConfig& cfg, std::uint64_t seed, int hidden) {
  cfg.validate();
  fitness.validate();
  policy::PolicyConfig pc;
  pc.arch = policy::Arch::mlp;
  pc.input_dim = env_cfg.obs_size();
  pc.hidden = hidden;
  pc.joints = env_cfg.joints();
  Rng init_rng(stream_seed(seed, 0, 1));
  policy::PolicyParams base = policy::init_params(pc, init_rng);
  base.tensors[5].col(0) = env_cfg.chain.home;
  base.tensors[4] *= 0.1;

  auto f = [&](const Eigen::VectorXd& theta) {
    policy::PolicyParams p = base;
    unflatten(theta, p);
    policy::PolicyActor actor(p);
    double total = 0.0;
    // Common random numbers: every candidate sees the same throws.
    for (int e = 0; e < fitness.episodes; ++e) {
      const env::Trajectory t = env::run_episode(env_cfg, actor, physics::Vec2(-0.7, 0.0),
                                                 Eigen::VectorXd(), stream_seed(seed, 0, e + 2));
      total += episode_fitness(t, fitness, env_cfg.table);
    }
    return total / fitness.episodes;
  };
  const EsResult res = es_optimize(flatten(base), f, cfg, stream_seed(seed, 1));
  unflatten(res.best, base);
  return base;
}

int Scatter::occupied() const {
  int n = 0;
  for (const auto& col : grid) {
    for (int c : col) n += c > 0;
  }
  return n;
}

BootstrapResult generate_bootstrap(env::Actor& actor, int n_demos, const env::EnvConfig& env_cfg,
                                   std::uint64_t seed, double goal_margin, int max_attempts) {
  if (n_demos < 0) throw ConfigError("bootstrap: n_demos must be >= 0");
  const physics::TableGeometry& table = env_cfg.table;
  const dataset::GoalRegion region = dataset::GoalRegion::opponent_half(table, goal_margin);
  BootstrapResult out{dataset::Cache(env_cfg.layout, env_cfg.joints(), region), {}};
  Scatter& s = out.scatter;
  s.grid.assign(8, std::vector<int>(8, 0));
  s.x_lo = s.y_lo = std::numeric_limits<double>::infinity();
  s.x_hi = s.y_hi = -std::numeric_limits<double>::infinity();
  Rng goal_rng(stream_seed(seed, 0, 0xb0));
  std::uint64_t id = 0;
  while (s.stored < n_demos) {
    if (s.attempts >= max_attempts) throw EnvError("bootstrap: attempt limit reached");
    if (s.attempts == 500 && s.hits < 25) {
      throw EnvError("bootstrap: hit rate " + std::to_string(s.hits) +
                     "/500 is below 5%; the demonstrator cannot reach these throws");
    }
    const physics::Vec2 goal(uniform(goal_rng, region.x_lo, region.x_hi),
                             uniform(goal_rng, region.y_lo, region.y_hi));
    env::Trajectory t = env::run_episode(env_cfg, actor, goal, Eigen::VectorXd(),
                                         stream_seed(seed, static_cast<std::uint64_t>(s.attempts), 0xb1));
    ++s.attempts;
    out.demos.record_attempt();
    if (t.hit_index) ++s.hits;
    if (!dataset::filter_good(t, region)) continue;
    t.meta.id = id++;
    t.meta.source = env::Source::demo;
    out.demos.append(dataset::relabel(t), env::Source::demo);
    ++s.stored;
    const physics::Vec2 p = t.landing->xy();
    s.landings.push_back(p);
    s.x_lo = std::min(s.x_lo, p.x());
    s.x_hi = std::max(s.x_hi, p.x());
    s.y_lo = std::min(s.y_lo, p.y());
    s.y_hi = std::max(s.y_hi, p.y());
    if (table.on_opponent_half(p.x(), p.y())) {
      const int ix = std::min(7, static_cast<int>((p.x() + table.half_length()) / table.half_length() * 8));
      const int iy = std::min(7, static_cast<int>((p.y() + table.half_width()) / table.width * 8));
      ++s.grid[ix][iy];
    }
  }
  if (s.stored == 0) s.x_lo = s.x_hi = s.y_lo = s.y_hi = 0.0;
  return out;
}

BootstrapResult generate_scripted(const DemonstratorConfig& demo_cfg, int n_demos,
                                  const env::EnvConfig& env_cfg, std::uint64_t seed,
                                  double goal_margin) {
  ScriptedDemonstrator demo(demo_cfg, stream_seed(seed, 0, 0xde));
  return generate_bootstrap(demo, n_demos, env_cfg, seed, goal_margin);
}

void write_scatter_csv(const Scatter& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("bootstrap: cannot write " + path.string());
  char buf[128];
  out << "# attempts " << s.attempts << ", hits " << s.hits << ", stored " << s.stored
      << ", occupied cells " << s.occupied() << "/64\n";
  std::snprintf(buf, sizeof buf, "# bbox x [%.4f, %.4f] y [%.4f, %.4f]\n", s.x_lo, s.x_hi, s.y_lo,
                s.y_hi);
  out << buf << "x,y\n";
  for (const auto& p : s.landings) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", p.x(), p.y());
    out << buf;
  }
}

void write_scatter_svg(const Scatter& s, const physics::TableGeometry& table,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("bootstrap: cannot write " + path.string());
  // 200 px per meter; table x runs left to right from the back edge to the net.
  const double k = 200.0;
  const double pad = 40.0;
  const double w = table.half_length() * k;
  const double h = table.width * k;
  auto px = [&](double x) { return pad + (x + table.half_length()) * k; };
  auto py = [&](double y) { return pad + (table.half_width() - y) * k; };
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n",
                w + 2 * pad, h + 2 * pad);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"#2a5d8f\" stroke=\"white\"/>\n",
                pad, pad, w, h);
  out << buf;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (s.grid.empty() || s.grid[i][j] == 0) continue;
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"#ffffff\" fill-opacity=\"0.15\"/>\n",
                    pad + i * w / 8, pad + (7 - j) * h / 8, w / 8, h / 8);
      out << buf;
    }
  }
  for (const auto& p : s.landings) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"orange\"/>\n",
                  px(p.x()), py(p.y()));
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">%d landings, %d/64 cells</text>\n",
                pad, s.stored, s.occupied());
  out << buf << "</svg>\n";
}

double hull_area(std::vector<physics::Vec2> pts) {
  if (pts.size() < 3) return 0.0;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const physics::Vec2& o, const physics::Vec2& a, const physics::Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<physics::Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double area = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(area);
}

}  // namespace ttgoals::bootstrap
