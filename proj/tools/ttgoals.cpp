#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ttgoals/bootstrap.hpp"
#include "ttgoals/config.hpp"
#include "ttgoals/report.hpp"
#include "ttgoals/ssp.hpp"

namespace fs = std::filesystem;
using namespace ttgoals;
using nlohmann::json;

namespace {

json metrics_json(const eval::Metrics& m) {
  json j = {{"n_attempts", m.n_attempts}, {"n_landed", m.n_landed}};
  j["mean_dist"] = m.mean_dist ? json(*m.mean_dist) : json(nullptr);
  json pct = json::object();
  for (std::size_t i = 0; i < m.thresholds.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "%.2f", m.thresholds[i]);
    pct[key] = m.pct_within[i];
  }
  j["pct_within"] = pct;
  return j;
}

void print_scatter(const bootstrap::Scatter& s) {
  std::printf("attempts %d  hits %d  stored %d  occupied cells %d/64 (%.0f%%)\n", s.attempts, s.hits,
              s.stored, s.occupied(), 100.0 * s.occupancy());
  if (s.stored > 0) {
    std::printf("landing bbox x [%.3f, %.3f]  y [%.3f, %.3f]\n", s.x_lo, s.x_hi, s.y_lo, s.y_hi);
  }
}

int cmd_bootstrap(const fs::path& cfg_path, const fs::path& out, int n, const std::string& source) {
  const config::Config cfg = config::load_config(cfg_path);
  const ssp::RunConfig& run = cfg.run;
  bootstrap::BootstrapResult res;
  if (source == "scripted") {
    res = bootstrap::generate_scripted(run.demonstrator, n, run.env, run.seed, run.ssp.goal_margin);
  } else {
    std::printf("training ES demonstrator (%d iterations, population %d)\n", cfg.bootstrap.es.iterations,
                cfg.bootstrap.es.population);
    const policy::PolicyParams params = bootstrap::es_train(
        run.env, cfg.bootstrap.fitness, cfg.bootstrap.es, run.seed, cfg.bootstrap.es_hidden);
    policy::PolicyActor actor(params);
    res = bootstrap::generate_bootstrap(actor, n, run.env, run.seed, run.ssp.goal_margin,
                                        cfg.bootstrap.max_attempts);
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  dataset::save_jsonl(res.demos, out);
  fs::path csv = out, svg = out;
  csv.replace_extension(".scatter.csv");
  svg.replace_extension(".scatter.svg");
  bootstrap::write_scatter_csv(res.scatter, csv);
  bootstrap::write_scatter_svg(res.scatter, run.env.table, svg);
  print_scatter(res.scatter);
  std::printf("wrote %s, %s, %s\n", out.c_str(), csv.c_str(), svg.c_str());
  return 0;
}

int cmd_train(const fs::path& cfg_path, const fs::path& demos_path, const fs::path& out,
              const std::string& mode_name, int ensemble) {
  const config::Config cfg = config::load_config(cfg_path);
  const ssp::Mode mode = ssp::parse_mode(mode_name);
  const dataset::Cache demos = dataset::load_jsonl(demos_path);
  const ssp::RunResult res =
      ssp::run_training(cfg.run, mode, demos, ensemble, out, config::dump_config(cfg));
  for (const auto& row : res.rows) {
    std::printf("iter %3d  attempted %3d  stored %3d  cache %5d  pct30 %5.1f  pct20 %5.1f\n", row.iter,
                row.attempted, row.stored, row.cache_size, row.eval_pct_30, row.eval_pct_20);
  }
  const eval::Metrics& m = res.final_metrics;
  std::printf("final: %d episodes, %d landed, pct30 %.1f, pct20 %.1f\n", m.n_attempts, m.n_landed,
              m.pct(0.30), m.pct(0.20));
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& cfg_path, const std::string& goals, int n,
             const fs::path& out) {
  const config::Config cfg = config::load_config(cfg_path);
  const policy::Checkpoint ck = policy::load_checkpoint(ckpt_path);
  if (ck.layout != cfg.run.env.layout) {
    throw ConfigError("eval: checkpoint layout " + env::to_string(ck.layout) +
                      " does not match the config layout " + env::to_string(cfg.run.env.layout));
  }
  eval::EvalConfig ec = cfg.run.eval;
  ec.goals = eval::parse_goal_set(goals);
  ec.episodes = n;
  ec.validate();
  json doc = {{"checkpoint", ckpt_path.string()}, {"goals", goals}, {"n", n}, {"seed", ec.seed}};
  if (ec.goals == eval::GoalSet::five) {
    const eval::GoalTable table = eval::five_goal_eval(ck.models, cfg.run.env, ec);
    std::cout << table.format();
    json rows = json::object();
    for (std::size_t i = 0; i + 1 < table.labels.size(); ++i) {
      json r = metrics_json(table.rows[i]);
      r["goal"] = {ec.five_goals[i].x(), ec.five_goals[i].y()};
      rows[table.labels[i]] = r;
    }
    doc["per_goal"] = rows;
    doc["aggregate"] = metrics_json(table.rows.back());
  } else {
    const eval::Metrics m =
        eval::evaluate(ck.models, cfg.run.env, eval::eval_goals(ec, cfg.run.env.table), ec);
    std::printf("%d episodes, %d landed, pct30 %.1f, pct20 %.1f\n", m.n_attempts, m.n_landed,
                m.pct(0.30), m.pct(0.20));
    doc["aggregate"] = metrics_json(m);
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream(out) << doc.dump(2) << '\n';
  return 0;
}

std::vector<int> parse_counts(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != tok.size()) throw ConfigError("--demo-counts: '" + tok + "' is not an integer");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--demo-counts: empty list");
  return out;
}

int cmd_ablate(const fs::path& cfg_path, const std::string& counts, const fs::path& out,
               int seeds) {
  const config::Config cfg = config::load_config(cfg_path);
  report::AblationOptions opt;
  opt.demo_counts = parse_counts(counts);
  opt.seeds = seeds;
  const auto runs = report::ablate_demos(cfg, opt, out);
  std::printf("%8s %12s %12s\n", "demos", "efficiency", "pct30");
  for (int c : opt.demo_counts) {
    std::vector<double> eff, p30;
    for (const auto& r : runs) {
      if (r.demos == c) eff.push_back(r.final_efficiency), p30.push_back(r.final_pct_30);
    }
    std::printf("%8d %12.3f %12.1f   (median over %zu seeds)\n", c, report::median(eff),
                report::median(p30), eff.size());
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_plot(const fs::path& run, const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  report::emit_learning_curve(run, out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned table-tennis practice: demos, training, evaluation"};
  app.require_subcommand(1);

  fs::path cfg, out, demos, ckpt, run;
  int n = 0, ensemble = 1, seeds = 3;
  std::string source = "scripted", mode = "goalseye", goals = "uniform", counts;

  auto* boot = app.add_subcommand("bootstrap", "generate demonstrations as JSONL");
  boot->add_option("--config", cfg, "run config JSON")->required();
  boot->add_option("--out", out, "output demos.jsonl")->required();
  boot->add_option("--n", n, "number of stored demonstrations")->required()->check(CLI::NonNegativeNumber);
  boot->add_option("--source", source, "demo source")->check(CLI::IsMember({"scripted", "es"}));

  auto* train = app.add_subcommand("train", "train a policy, with or without practice");
  train->add_option("--config", cfg, "run config JSON")->required();
  train->add_option("--demos", demos, "demos.jsonl")->required();
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--mode", mode, "training mode")->check(CLI::IsMember({"goalseye", "lfp", "gcsl"}));
  train->add_option("--ensemble", ensemble, "models sharing the cache")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt, "checkpoint JSON")->required();
  ev->add_option("--config", cfg, "run config JSON")->required();
  ev->add_option("--goals", goals, "goal set")->required()->check(CLI::IsMember({"five", "uniform"}));
  ev->add_option("--n", n, "uniform: goals; five: attempts per goal")->required()->check(CLI::PositiveNumber);
  ev->add_option("--out", out, "metrics.json")->required();

  auto* abl = app.add_subcommand("ablate", "demo-count ablation");
  abl->add_option("--config", cfg, "run config JSON")->required();
  abl->add_option("--demo-counts", counts, "comma-separated counts, 0 = no demos")->required();
  abl->add_option("--out", out, "output directory")->required();
  abl->add_option("--seeds", seeds, "seeds per count")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "learning curves of a run or a directory of runs");
  plot->add_option("--run", run, "run directory")->required();
  plot->add_option("--out", out, "output SVG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*boot) return cmd_bootstrap(cfg, out, n, source);
    if (*train) return cmd_train(cfg, demos, out, mode, ensemble);
    if (*ev) return cmd_eval(ckpt, cfg, goals, n, out);
    if (*abl) return cmd_ablate(cfg, counts, out, seeds);
    if (*plot) return cmd_plot(run, out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "ttgoals: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ttgoals: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
