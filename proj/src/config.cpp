#include "ttgoals/config.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ttgoals::config {

using nlohmann::json;
using physics::Vec2;
using physics::Vec3;

namespace {

// Reads typed fields out of one JSON object and remembers which keys were
// consumed, so leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    out = v.get<double>();
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    out = v.get<int>();
  }

  void get(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void get(const std::string& key, Vec2& out) { fixed(key, out.data(), 2); }
  void get(const std::string& key, Vec3& out) { fixed(key, out.data(), 3); }

  void get(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
    out.clear();
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  void get(const std::string& key, std::vector<int>& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of integers");
    out.clear();
    for (const json& e : v) {
      if (!e.is_number_integer()) throw ConfigError(where(key) + ": expected an array of integers");
      out.push_back(e.get<int>());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + where(key) + "'");
    }
  }

 private:
  void fixed(const std::string& key, double* out, int n) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_array() || static_cast<int>(v.size()) != n) {
      throw ConfigError(where(key) + ": expected " + std::to_string(n) + " numbers");
    }
    for (int i = 0; i < n; ++i) {
      if (!v[i].is_number()) throw ConfigError(where(key) + ": expected numbers");
      out[i] = v[i].get<double>();
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

robot::JointKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "prismatic") return robot::JointKind::prismatic;
  if (s == "revolute") return robot::JointKind::revolute;
  throw ConfigError(where + ": joint kind must be prismatic or revolute");
}

std::string kind_name(robot::JointKind k) {
  return k == robot::JointKind::prismatic ? "prismatic" : "revolute";
}

void read_physics(Section s, env::EnvConfig& e) {
  s.get("k_d", e.drag.k_d);
  s.get("g", e.drag.g);
  s.get("e_table", e.e_table);
  s.get("mu_t", e.mu_t);
  s.get("sim_dt", e.sim_dt);
  if (s.has("table")) {
    Section t(s.raw("table"), "physics.table");
    t.get("length", e.table.length);
    t.get("width", e.table.width);
    t.get("net_height", e.table.net_height);
    t.finish();
  }
  s.finish();
}

void read_robot(Section s, env::EnvConfig& e) {
  robot::Chain& c = e.chain;
  if (s.has("preset")) {
    std::string name;
    s.get("preset", name);
    c = robot::chain_preset(name);
  }
  if (s.has("joints")) {
    const json& arr = s.raw("joints");
    if (!arr.is_array() || arr.empty()) throw ConfigError("robot.joints: expected a non-empty array");
    c.joints.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "robot.joints[" + std::to_string(i) + "]";
      Section js(arr[i], path);
      robot::JointSpec spec;
      std::string kind = "revolute";
      js.get("kind", kind);
      spec.kind = parse_kind(kind, path);
      js.get("axis", spec.axis);
      js.get("origin", spec.origin);
      js.get("lo", spec.lo);
      js.get("hi", spec.hi);
      js.get("max_vel", spec.max_vel);
      js.finish();
      c.joints.push_back(spec);
    }
    c.name = "custom";
    c.home = Eigen::VectorXd::Zero(c.dof());
  }
  s.get("name", c.name);
  s.get("tool_offset", c.tool_offset);
  s.get("normal_local", c.normal_local);
  if (s.has("home")) {
    std::vector<double> home;
    s.get("home", home);
    if (static_cast<int>(home.size()) != c.dof()) {
      throw ConfigError("robot.home: expected " + std::to_string(c.dof()) + " values");
    }
    c.home = Eigen::Map<const Eigen::VectorXd>(home.data(), c.dof());
  }
  if (s.has("contact")) {
    Section ct(s.raw("contact"), "robot.contact");
    ct.get("paddle_radius", e.contact.paddle_radius);
    ct.get("ball_radius", e.contact.ball_radius);
    ct.get("restitution", e.contact.restitution);
    ct.get("slab_tolerance", e.contact.slab_tolerance);
    ct.finish();
  }
  s.finish();
}

void read_throws(const json& j, env::ThrowPreset& p) {
  if (j.is_string()) {
    p = env::throw_preset(j.get<std::string>());
    return;
  }
  Section s(j, "env.throws");
  if (s.has("preset")) {
    std::string name;
    s.get("preset", name);
    p = env::throw_preset(name);
  }
  s.get("name", p.name);
  s.get("launch_lo", p.launch_lo);
  s.get("launch_hi", p.launch_hi);
  s.get("target_lo", p.target_lo);
  s.get("target_hi", p.target_hi);
  s.get("speed_lo", p.speed_lo);
  s.get("speed_hi", p.speed_hi);
  s.finish();
}

void read_env(Section s, env::EnvConfig& e) {
  s.get("control_hz", e.control_hz);
  s.get("max_steps", e.max_steps);
  s.get("init_perturbation", e.init_perturbation);
  if (s.has("throws")) read_throws(s.raw("throws"), e.throws);
  if (s.has("layout")) {
    std::string layout;
    s.get("layout", layout);
    e.layout = env::parse_layout(layout);
  }
  s.get("landing_margin", e.landing_margin);
  s.get("out_x", e.out_x);
  s.get("out_y", e.out_y);
  s.get("out_z", e.out_z);
  s.finish();
}

void read_train(Section s, policy::TrainConfig& t) {
  s.get("learning_rate", t.learning_rate);
  s.get("batch_size", t.batch_size);
  s.get("window", t.window);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("epsilon", t.epsilon);
  s.get("clip_norm", t.clip_norm);
  s.get("hidden", t.hidden);
  if (s.has("arch")) {
    std::string arch;
    s.get("arch", arch);
    t.arch = policy::parse_arch(arch);
  }
  s.get("normalize", t.normalize);
  s.finish();
}

void read_ssp(Section s, ssp::SspConfig& c) {
  s.get("warmup_steps", c.warmup_steps);
  s.get("steps_between_ssp", c.steps_between_ssp);
  s.get("num_ssp_per_iter", c.num_ssp_per_iter);
  s.get("noise_scale", c.noise_scale);
  s.get("goal_margin", c.goal_margin);
  s.get("total_trajectory_budget", c.total_trajectory_budget);
  s.get("checkpoint_every", c.checkpoint_every);
  s.finish();
}

void read_eval(Section s, eval::EvalConfig& c) {
  if (s.has("goals")) {
    std::string goals;
    s.get("goals", goals);
    c.goals = eval::parse_goal_set(goals);
  }
  s.get("episodes", c.episodes);
  s.get("progress_episodes", c.progress_episodes);
  s.get("thresholds", c.thresholds);
  s.get("seed", c.seed);
  if (s.has("five_goals")) {
    const json& arr = s.raw("five_goals");
    if (!arr.is_array() || arr.size() != 5) throw ConfigError("eval.five_goals: expected 5 points");
    for (std::size_t i = 0; i < 5; ++i) {
      if (!arr[i].is_array() || arr[i].size() != 2 || !arr[i][0].is_number() ||
          !arr[i][1].is_number()) {
        throw ConfigError("eval.five_goals: each goal is [x, y]");
      }
      c.five_goals[i] = Vec2(arr[i][0].get<double>(), arr[i][1].get<double>());
    }
  }
  s.finish();
}

void read_bootstrap(Section s, BootstrapConfig& b) {
  bootstrap::DemonstratorConfig& d = b.demonstrator;
  s.get("hit_plane_x", d.hit_plane_x);
  s.get("tilt", d.tilt);
  s.get("yaw", d.yaw);
  s.get("tilt_jitter", d.tilt_jitter);
  s.get("yaw_jitter", d.yaw_jitter);
  s.get("swing", d.swing);
  s.get("ready_time", d.ready_time);
  s.get("perturb_joints", d.perturb_joints);
  s.get("delta_b", d.delta_b);
  s.get("max_attempts", b.max_attempts);
  s.get("es_hidden", b.es_hidden);
  if (s.has("es")) {
    Section es(s.raw("es"), "bootstrap.es");
    es.get("population", b.es.population);
    es.get("sigma", b.es.sigma);
    es.get("step_size", b.es.step_size);
    es.get("iterations", b.es.iterations);
    es.finish();
  }
  if (s.has("fitness")) {
    Section f(s.raw("fitness"), "bootstrap.fitness");
    f.get("contact", b.fitness.contact);
    f.get("landed", b.fitness.landed);
    f.get("center", b.fitness.center);
    f.get("episodes", b.fitness.episodes);
    f.finish();
  }
  s.finish();
}

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

Config parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Config cfg;
  Section top(doc, "");
  top.get("seed", cfg.run.seed);
  if (top.has("physics")) read_physics(Section(top.raw("physics"), "physics"), cfg.run.env);
  if (top.has("robot")) read_robot(Section(top.raw("robot"), "robot"), cfg.run.env);
  if (top.has("env")) read_env(Section(top.raw("env"), "env"), cfg.run.env);
  if (top.has("train")) read_train(Section(top.raw("train"), "train"), cfg.run.train);
  if (top.has("ssp")) read_ssp(Section(top.raw("ssp"), "ssp"), cfg.run.ssp);
  if (top.has("eval")) read_eval(Section(top.raw("eval"), "eval"), cfg.run.eval);
  if (top.has("bootstrap")) read_bootstrap(Section(top.raw("bootstrap"), "bootstrap"), cfg.bootstrap);
  top.finish();

  cfg.run.demonstrator = cfg.bootstrap.demonstrator;
  cfg.run.env.validate();
  cfg.run.train.validate();
  cfg.run.ssp.validate();
  cfg.run.eval.validate();
  cfg.bootstrap.es.validate();
  cfg.bootstrap.fitness.validate();
  if (cfg.bootstrap.es_hidden < 1) throw ConfigError("bootstrap.es_hidden must be >= 1");
  if (cfg.bootstrap.max_attempts < 1) throw ConfigError("bootstrap.max_attempts must be >= 1");
  return cfg;
}

void apply_seed_override(Config& cfg) {
  const char* s = std::getenv("TTGOALS_SEED");
  if (!s || !*s) return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || *end != '\0' || s[0] == '-') {
    throw ConfigError(std::string("TTGOALS_SEED is not a non-negative integer: ") + s);
  }
  cfg.run.seed = v;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config cfg = parse_config(ss.str());
  apply_seed_override(cfg);
  return cfg;
}

std::string dump_config(const Config& cfg) {
  const env::EnvConfig& e = cfg.run.env;
  const robot::Chain& c = e.chain;
  json joints = json::array();
  for (const robot::JointSpec& j : c.joints) {
    joints.push_back({{"kind", kind_name(j.kind)},
                      {"axis", vec(j.axis)},
                      {"origin", vec(j.origin)},
                      {"lo", j.lo},
                      {"hi", j.hi},
                      {"max_vel", j.max_vel}});
  }
  const env::ThrowPreset& tp = e.throws;
  const policy::TrainConfig& t = cfg.run.train;
  const ssp::SspConfig& s = cfg.run.ssp;
  const eval::EvalConfig& ev = cfg.run.eval;
  json five = json::array();
  for (const Vec2& g : ev.five_goals) five.push_back(vec(g));
  const BootstrapConfig& b = cfg.bootstrap;
  const bootstrap::DemonstratorConfig& d = b.demonstrator;

  json doc = {
      {"seed", cfg.run.seed},
      {"physics",
       {{"k_d", e.drag.k_d},
        {"g", e.drag.g},
        {"e_table", e.e_table},
        {"mu_t", e.mu_t},
        {"sim_dt", e.sim_dt},
        {"table",
         {{"length", e.table.length}, {"width", e.table.width}, {"net_height", e.table.net_height}}}}},
      {"robot",
       {{"name", c.name},
        {"joints", joints},
        {"tool_offset", vec(c.tool_offset)},
        {"normal_local", vec(c.normal_local)},
        {"home", vec(c.home)},
        {"contact",
         {{"paddle_radius", e.contact.paddle_radius},
          {"ball_radius", e.contact.ball_radius},
          {"restitution", e.contact.restitution},
          {"slab_tolerance", e.contact.slab_tolerance}}}}},
      {"env",
       {{"control_hz", e.control_hz},
        {"max_steps", e.max_steps},
        {"init_perturbation", e.init_perturbation},
        {"throws",
         {{"name", tp.name},
          {"launch_lo", vec(tp.launch_lo)},
          {"launch_hi", vec(tp.launch_hi)},
          {"target_lo", vec(tp.target_lo)},
          {"target_hi", vec(tp.target_hi)},
          {"speed_lo", tp.speed_lo},
          {"speed_hi", tp.speed_hi}}},
        {"layout", env::to_string(e.layout)},
        {"landing_margin", e.landing_margin},
        {"out_x", e.out_x},
        {"out_y", e.out_y},
        {"out_z", e.out_z}}},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"window", t.window},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"epsilon", t.epsilon},
        {"clip_norm", t.clip_norm},
        {"hidden", t.hidden},
        {"arch", policy::to_string(t.arch)},
        {"normalize", t.normalize}}},
      {"ssp",
       {{"warmup_steps", s.warmup_steps},
        {"steps_between_ssp", s.steps_between_ssp},
        {"num_ssp_per_iter", s.num_ssp_per_iter},
        {"noise_scale", s.noise_scale},
        {"goal_margin", s.goal_margin},
        {"total_trajectory_budget", s.total_trajectory_budget},
        {"checkpoint_every", s.checkpoint_every}}},
      {"eval",
       {{"goals", eval::to_string(ev.goals)},
        {"episodes", ev.episodes},
        {"progress_episodes", ev.progress_episodes},
        {"thresholds", ev.thresholds},
        {"seed", ev.seed},
        {"five_goals", five}}},
      {"bootstrap",
       {{"hit_plane_x", d.hit_plane_x},
        {"tilt", d.tilt},
        {"yaw", d.yaw},
        {"tilt_jitter", d.tilt_jitter},
        {"yaw_jitter", d.yaw_jitter},
        {"swing", d.swing},
        {"ready_time", d.ready_time},
        {"perturb_joints", d.perturb_joints},
        {"delta_b", d.delta_b},
        {"max_attempts", b.max_attempts},
        {"es_hidden", b.es_hidden},
        {"es",
         {{"population", b.es.population},
          {"sigma", b.es.sigma},
          {"step_size", b.es.step_size},
          {"iterations", b.es.iterations}}},
        {"fitness",
         {{"contact", b.fitness.contact},
          {"landed", b.fitness.landed},
          {"center", b.fitness.center},
          {"episodes", b.fitness.episodes}}}}},
  };
  return doc.dump(2);
}

}  // namespace ttgoals::config
