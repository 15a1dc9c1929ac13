#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "qlcd/minsnap.hpp"
#include "qlcd/quad_params.hpp"
#include "qlcd/rng.hpp"
#include "qlcd/rollout.hpp"

namespace qlcd {

/// Waypoint sampling region and spacing limits.
struct DomainConfig {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(10.0);
  double spacing_min = 1.0;  // m between consecutive waypoints
  double spacing_max = 3.0;
  int waypoints = 4;

  void validate() const;
};

/// First waypoint uniform in the box; each successor uniform over the
/// spherical shell [spacing_min, spacing_max] around its predecessor
/// (volume-uniform radius), rejection-sampled into the box with at most
/// 1000 attempts per waypoint. Yaw is zero everywhere. Throws
/// SamplingExhausted when the box keeps rejecting candidates.
WaypointSet sample_waypoints(Rng& rng, const DomainConfig& config);

/// One labeled task. `skipped` marks tasks whose plan/solve failed; they
/// are kept in the dataset file as comment entries and excluded from
/// training features.
struct RolloutRecord {
  std::uint64_t seed = 0;
  WaypointSet waypoints;
  Eigen::VectorXd durations;
  Eigen::VectorXd coefficients;
  double label = 0.0;
  double max_error = 0.0;
  bool crashed = false;
  Eigen::Vector3d drag = Eigen::Vector3d::Zero();
  bool skipped = false;
};

struct CollectConfig {
  int tasks = 5000;
  std::uint64_t master_seed = 1;
  DomainConfig domain;
  double v_avg = 2.0;
  VehiclePreset preset;
  RolloutConfig rollout;
  int workers = 1;

  void validate() const;
};

/// Seed-namespace tags keep training and evaluation task streams
/// disjoint for any master seed.
inline constexpr std::uint64_t kCollectStream = 0x636f6c6c65637431ULL;
inline constexpr std::uint64_t kEvalStream = 0x6576616c7461736bULL;
inline constexpr std::uint64_t kRolloutStream = 0x726f6c6c6e6f7365ULL;

inline std::uint64_t task_seed(std::uint64_t master, std::uint64_t stream,
                               int index) {
  return mix64(mix64(master, stream), static_cast<std::uint64_t>(index));
}

/// Samples, plans (min-snap), and rolls out every task. Task i depends
/// only on task_seed(master_seed, kCollectStream, i), and results are
/// stored by task index, so the output is identical for any worker count.
std::vector<RolloutRecord> collect(const CollectConfig& config);

/// Text dataset: header `QLCD-DATASET v1 n=<n> s=<s>`, then one
/// comma-separated record per line (skipped tasks as comment lines).
void save_dataset(const std::vector<RolloutRecord>& records, int order,
                  int segments, const std::filesystem::path& path);
std::vector<RolloutRecord> load_dataset(const std::filesystem::path& path,
                                        int* order = nullptr,
                                        int* segments = nullptr);

/// Feature matrix (one row per usable record, coefficients as features)
/// and label vector.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> to_features(
    const std::vector<RolloutRecord>& records);

/// Seeded permutation split (train, validation); same protocol as train().
std::pair<std::vector<int>, std::vector<int>> split(int n, double fraction,
                                                    Rng& rng);

/// Waypoint list file: one `x y z [yaw]` line per waypoint; `#` comments.
WaypointSet load_waypoints(const std::filesystem::path& path);
void save_waypoints(const WaypointSet& wps, const std::filesystem::path& path);

}  // namespace qlcd
