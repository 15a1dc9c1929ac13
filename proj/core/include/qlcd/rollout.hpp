#pragma once

#include <filesystem>
#include <vector>

#include "qlcd/flatness_control.hpp"
#include "qlcd/quad_dynamics.hpp"
#include "qlcd/trajectory.hpp"

namespace qlcd {

struct RolloutConfig {
  double control_dt = 0.01;      // 100 Hz controller
  int substeps = 5;              // 500 Hz integration
  double settle_time = 1.0;      // s simulated past the trajectory end
  double crash_threshold = 1.5;  // m, strict >

  /// Throws DimensionMismatch on invalid settings.
  void validate() const;
};

struct RolloutResult {
  double label = 0.0;         // integral of squared pos + wrapped-yaw error
  double max_error = 0.0;     // m
  bool crashed = false;
  double sat_fraction = 0.0;  // fraction of control ticks that saturated
};

/// One controller-tick sample for plotting/inspection.
struct RolloutSample {
  double t = 0.0;
  Eigen::Vector3d ref_position = Eigen::Vector3d::Zero();
  double ref_yaw = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

/// Simulates the closed loop from rest at the trajectory start (identity
/// attitude, rotors at hover speed) for the trajectory duration plus the
/// settle time. The label accrues (|e_pos|^2 + wrap(e_yaw)^2) * dt per
/// controller tick. Crossing the crash threshold ends the run early and
/// pads the label with threshold^2 * (remaining time) so crash labels
/// dominate; diverged or singular states count as crashes the same way.
/// Pass `rng` for motor noise, nullptr for a noise-free run; `trace`
/// (optional) receives one sample per executed tick.
RolloutResult rollout_cost(const PiecewiseTrajectory& traj,
                           const VehiclePreset& preset,
                           const RolloutConfig& config, Rng* rng,
                           std::vector<RolloutSample>* trace = nullptr);

/// Rollout log: header line, then one `t ref_xyz ref_yaw xyz yaw` row per
/// tick. Throws IoFailure / ShapeCorruption / FormatVersionMismatch.
void save_rollout_log(const std::vector<RolloutSample>& trace,
                      const std::filesystem::path& path);
std::vector<RolloutSample> load_rollout_log(const std::filesystem::path& path);

}  // namespace qlcd
