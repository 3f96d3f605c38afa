#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ttgoals/config.hpp"
#include "ttgoals/ssp.hpp"

namespace ttgoals::report {

/// Parses a progress CSV written by run_training. Throws ParseError on a
/// malformed line and Error on an empty file.
std::vector<ssp::ProgressRow> read_progress(const std::filesystem::path& path);

/// One run's learning curve. x counts every trajectory seen so far: demos
/// plus attempted practice rollouts.
struct Curve {
  std::vector<double> x;
  std::vector<double> pct_30;
  std::vector<double> pct_20;
  std::vector<std::optional<double>> mean_dist;
};

Curve curve_from_rows(const std::vector<ssp::ProgressRow>& rows, int demos);

/// Pointwise mean and population std over runs sharing one schedule.
struct Band {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;
};

enum class Metric { pct_30, pct_20, mean_dist };

Band band(const std::vector<Curve>& runs, Metric metric);

/// Run directories under `root`: the root itself when it holds a
/// progress.csv, else every immediate subdirectory that does, sorted.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root);

/// Loads a run's curve, reading the demo count from manifest.json.
Curve load_curve(const std::filesystem::path& run_dir);

/// Writes `svg` with one panel per metric, each a mean polyline over a
/// mean +/- std band, and a CSV next to it (same stem) with the plotted
/// values. Path coordinates are data values under a group transform.
void emit_learning_curve(const std::filesystem::path& run_root, const std::filesystem::path& svg);

/// Points of every <path class="mean"> in an SVG produced above, in order.
std::vector<std::vector<std::pair<double, double>>> parse_mean_paths(const std::string& svg);

struct AblationRun {
  int demos = 0;
  std::uint64_t seed = 0;
  int attempted = 0;
  int stored = 0;
  double final_efficiency = 0.0;  // stored / attempted over the tail window
  double final_pct_30 = 0.0;
  double final_pct_20 = 0.0;
  std::vector<double> efficiency;  // per practice iteration
};

struct AblationOptions {
  std::vector<int> demo_counts = {0, 10, 100, 1000};
  int seeds = 3;
  int tail_attempts = 200;  // window for the final efficiency
};

/// Tail efficiency of one run: stored over attempted across the last
/// iterations holding at least `tail_attempts` attempts (or all of them).
double tail_efficiency(const std::vector<ssp::ProgressRow>& rows, int tail_attempts);

/// Runs the pipeline per (count, seed) at the config's total budget:
/// scripted demos, then goalseye training (gcsl for a count of 0). Seeds
/// are cfg.seed + s. Writes DIR/n<count>/seed<s>/ run dirs, ablation.csv,
/// efficiency.csv, curves.svg and efficiency.svg.
std::vector<AblationRun> ablate_demos(const config::Config& cfg, const AblationOptions& opt,
                                      const std::filesystem::path& out_dir);

/// Median of `v` (mean of the middle pair for even sizes).
double median(std::vector<double> v);

}  // namespace ttgoals::report
