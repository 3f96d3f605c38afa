#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include "ttgoals/env.hpp"
#include "ttgoals/rng.hpp"

namespace ttgoals::dataset {

using env::Source;
using env::Trajectory;
using physics::Vec2;

/// Axis-aligned goal rectangle in the table plane. The default is the
/// opponent half grown by `margin` past the back and side edges.
struct GoalRegion {
  double x_lo = -1.57;
  double x_hi = 0.0;
  double y_lo = -0.9625;
  double y_hi = 0.9625;

  static GoalRegion opponent_half(const physics::TableGeometry& table, double margin);
  bool contains(const Vec2& p) const {
    return p.x() >= x_lo && p.x() <= x_hi && p.y() >= y_lo && p.y() <= y_hi;
  }
  double area() const { return (x_hi - x_lo) * (y_hi - y_lo); }
  void validate() const;
};

/// Goal rewritten to the landing point, in the goal field and in every
/// observation's goal slots. The commanded goal stays in meta.
Trajectory relabel(const Trajectory& traj);

/// Hit, landed, and the landing lies inside `region`.
bool filter_good(const Trajectory& traj, const GoalRegion& region);

/// Writes `goal` into the last two slots of every goal-terminated row.
void write_goal(Eigen::Ref<Eigen::VectorXd> obs, env::ObsLayout layout, int joints,
                const Vec2& goal);

/// Subsequence of one stored episode. Columns are ticks.
struct WindowSample {
  Eigen::MatrixXd obs;  // obs_dim x len
  Eigen::MatrixXd act;  // J x len
  Vec2 goal = Vec2::Zero();
  std::uint64_t episode_id = 0;
  int start = 0;

  int length() const { return static_cast<int>(obs.cols()); }
};

/// A window of min(k, len) ticks that contains the hit tick, start drawn
/// uniformly from the valid range.
WindowSample sample_window(const Trajectory& traj, int k, Rng& rng);

/// Append-only episode store. Every episode in it has been relabeled and
/// passed filter_good.
class Cache {
 public:
  Cache() = default;
  Cache(env::ObsLayout layout, int joints, GoalRegion region = {});

  void append(const Trajectory& traj, Source source);
  void record_attempt(int n = 1) { seen_count_ += n; }

  const std::vector<Trajectory>& episodes() const { return episodes_; }
  std::size_t size() const { return episodes_.size(); }
  bool empty() const { return episodes_.empty(); }
  int demos_count() const { return demos_count_; }
  int ssp_count() const { return ssp_count_; }
  int seen_count() const { return seen_count_; }
  env::ObsLayout layout() const { return layout_; }
  int joints() const { return joints_; }
  const GoalRegion& region() const { return region_; }
  void set_region(const GoalRegion& region) { region_ = region; }

 private:
  env::ObsLayout layout_ = env::ObsLayout::flat_vel;
  int joints_ = 0;
  GoalRegion region_;
  std::vector<Trajectory> episodes_;
  std::set<std::uint64_t> ids_;
  int demos_count_ = 0;
  int ssp_count_ = 0;
  int seen_count_ = 0;
};

/// batch_size episodes uniformly with replacement, one window from each.
std::vector<WindowSample> sample_batch(const Cache& cache, int batch_size, int k, Rng& rng);

bool same_episode(const Trajectory& a, const Trajectory& b);

/// Line 1 is a manifest, then one episode per line. The attempt counter is
/// not persisted; a loaded cache has seen_count equal to its size.
void save_jsonl(const Cache& cache, const std::filesystem::path& path);
Cache load_jsonl(const std::filesystem::path& path, const GoalRegion& region = {});

}  // namespace ttgoals::dataset
