#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qlcd/dataset.hpp"
#include "qlcd/plan.hpp"
#include "qlcd/tracknet.hpp"

namespace qlcd {

/// Crash iff the maximum position error strictly exceeds the threshold.
bool classify_crash(double max_error, double threshold);

struct PlannerSpec {
  enum class Kind { MinSnap, Lcd };
  Kind kind = Kind::MinSnap;
  /// Used for planning when kind == Lcd, and (if present) for label
  /// predictions in the per-task rows regardless of kind.
  const TrackNetModel* model = nullptr;
  PlanOptions options;

  std::string name() const {
    return kind == Kind::MinSnap ? "minsnap" : "lcd";
  }
};

struct EvalConfig {
  int tasks = 50;
  std::uint64_t seed = 1;  // task namespace disjoint from collection seeds
  DomainConfig domain;
  double v_avg = 2.0;
  VehiclePreset preset;
  RolloutConfig rollout;
  int workers = 1;  // output identical for any worker count
};

struct TaskEval {
  std::uint64_t task_seed = 0;
  std::string planner;
  double max_error_m = 0.0;
  bool crashed = false;
  double label_pred = 0.0;  // NaN without a model
  double snap_cost = 0.0;   // NaN when planning failed
  double sat_fraction = 0.0;
};

struct EvalResult {
  std::string planner;
  int tasks = 0;
  int crashes = 0;
  double crash_rate = 0.0;  // percent
  double mean_error = 0.0;  // over non-crashed tasks (NaN if none)
  double max_error = 0.0;   // over non-crashed tasks (NaN if none)
  double mean_sat = 0.0;
  std::vector<TaskEval> rows;
};

/// Plans and rolls out `tasks` sampled tasks. Task list and rollout noise
/// depend only on (seed, task index), so two planners evaluated with the
/// same config see identical tasks and noise — a paired comparison.
/// Planner failures count as crashes.
EvalResult evaluate(const PlannerSpec& planner, const EvalConfig& config);

void write_eval_csv(const std::vector<TaskEval>& rows,
                    const std::filesystem::path& path);
std::vector<TaskEval> read_eval_csv(const std::filesystem::path& path);

struct SweepConfig {
  int points = 5;
  double drag_xy_lo = 0.002;
  double drag_xy_hi = 0.008;
  double drag_z_lo = 0.007;
  double drag_z_hi = 0.013;
  bool retrain = true;  // collect + train per drag setting
  CollectConfig collect;
  TrainConfig train;
  EvalConfig eval;
  PlanOptions plan_options;
  const TrackNetModel* shared_model = nullptr;  // used when !retrain
};

struct SweepRow {
  Eigen::Vector3d drag;
  EvalResult minsnap;
  EvalResult lcd;
};

/// Evenly spaced drag settings across the configured ranges; per setting
/// optionally collects and trains a fresh model, then evaluates both
/// planners paired. Completed rows are flushed to the CSV immediately.
std::vector<SweepRow> drag_sweep(const SweepConfig& config,
                                 const std::filesystem::path& csv_path);

}  // namespace qlcd
