#pragma once

#include <Eigen/Dense>
#include <filesystem>

namespace qlcd {

/// Flat outputs and the derivatives the controller consumes, all world
/// frame. Positions through snap, yaw through acceleration.
struct FlatReference {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  Eigen::Vector3d jerk = Eigen::Vector3d::Zero();
  Eigen::Vector3d snap = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
  double yaw_accel = 0.0;

  bool all_finite() const;
};

/// Piecewise polynomial in the four flat outputs (x, y, z, yaw).
///
/// Coefficient layout: segment-major, outputs x, y, z, yaw within a
/// segment, ascending powers of segment-local time (seconds, unscaled).
/// Total length 4*segments*(order+1).
struct PiecewiseTrajectory {
  int order = 7;
  int segments = 0;
  Eigen::VectorXd durations;     // one per segment, > 0
  Eigen::VectorXd coefficients;  // 4*segments*(order+1)

  int coeffs_per_output() const { return order + 1; }
  int coeff_index(int segment, int output, int power) const {
    return (segment * 4 + output) * (order + 1) + power;
  }
  double coeff(int segment, int output, int power) const {
    return coefficients[coeff_index(segment, output, power)];
  }
  double& coeff(int segment, int output, int power) {
    return coefficients[coeff_index(segment, output, power)];
  }

  double total_duration() const { return durations.sum(); }

  /// Throws DimensionMismatch if the shape invariants do not hold.
  void validate() const;
};

/// Value and first `max_deriv` derivatives of one output at local time t.
/// Returns a vector of length max_deriv+1.
Eigen::VectorXd eval_output(const PiecewiseTrajectory& traj, int segment,
                            int output, double local_t, int max_deriv);

/// Evaluates the trajectory at global time t. Segment boundaries belong
/// to the right segment (the final time to the last). Throws OutOfDomain
/// for t outside [0, total_duration].
FlatReference eval_reference(const PiecewiseTrajectory& traj, double t);

/// Text format: header `n s`, durations, then all coefficients,
/// whitespace-separated with enough digits to round-trip doubles.
void save_trajectory(const PiecewiseTrajectory& traj,
                     const std::filesystem::path& path);
PiecewiseTrajectory load_trajectory(const std::filesystem::path& path);

}  // namespace qlcd
