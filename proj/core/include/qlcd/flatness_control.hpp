#pragma once

#include <Eigen/Dense>

#include "qlcd/quad_dynamics.hpp"
#include "qlcd/quad_params.hpp"
#include "qlcd/trajectory.hpp"

namespace qlcd {

struct DesiredAttitude {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // R_d
  Eigen::Vector3d body_rates = Eigen::Vector3d::Zero();     // omega_d
  Eigen::Vector3d body_rate_dot = Eigen::Vector3d::Zero();  // d/dt omega_d
};

/// Differential-flatness map: desired attitude, body rates and their
/// derivative from a flat reference. The body z axis points along the
/// specific-thrust direction g*z_W - r_dd (drag is left to feedback);
/// omega_d comes from the jerk in closed form and its derivative from a
/// symmetric finite difference along the reference. Throws
/// FlatnessSingularity when the desired acceleration cancels gravity or
/// the yaw direction degenerates.
DesiredAttitude flat_to_attitude(const FlatReference& ref,
                                 const QuadParams& params);

/// Geometric tracking controller on SE(3). Thrust is the projection of
/// the desired specific force onto the current body z axis; the moment
/// uses the standard rotation/rate errors with inertia feedforward.
BodyWrench se3_control(const QuadState& state, const FlatReference& ref,
                       const DesiredAttitude& att, const ControlGains& gains,
                       const QuadParams& params);

/// Closed-loop trajectory tracker: evaluates the reference, augments the
/// desired acceleration with bounded position/velocity feedback before
/// the flatness map (so attitude leans toward the reference), and runs
/// the SE(3) law. Query times are clamped to the trajectory's domain, so
/// past the end it regulates about the final waypoint.
class TrackingController {
 public:
  TrackingController(PiecewiseTrajectory traj, VehiclePreset preset);

  BodyWrench command(const QuadState& state, double t) const;
  FlatReference reference(double t) const;

  const PiecewiseTrajectory& trajectory() const { return traj_; }
  const VehiclePreset& preset() const { return preset_; }
  double duration() const { return total_; }

 private:
  PiecewiseTrajectory traj_;
  VehiclePreset preset_;
  double total_;
};

}  // namespace qlcd
