#pragma once

#include <Eigen/Dense>

#include "qlcd/quad_params.hpp"
#include "qlcd/rng.hpp"

namespace qlcd {

/// Full vehicle state. `rotation` maps body to world coordinates; rotor
/// speeds are part of the state because the motors respond with a
/// first-order lag.
struct QuadState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d body_rates = Eigen::Vector3d::Zero();  // body frame
  Eigen::Vector4d rotor_speeds = Eigen::Vector4d::Zero();  // rad/s

  bool all_finite() const;
};

/// Collective thrust magnitude (along -z_B) plus body moment.
struct BodyWrench {
  double thrust = 0.0;            // N
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();  // N m
};

struct AllocationResult {
  Eigen::Vector4d rotor_speeds;   // rad/s, after clamping
  Eigen::Vector4d rotor_forces;   // N, after clamping
  bool saturated = false;         // any rotor hit a speed limit
};

/// Maps a desired wrench to rotor speeds for the X configuration:
/// rotor 0 front-right (+x,+y quadrant has rotor 0 at (+l,+l) with
/// l = arm_length/sqrt(2)), numbered counterclockwise, spin directions
/// alternating (+,-,+,-). Out-of-range per-rotor thrusts are clamped and
/// flagged.
AllocationResult allocate(const BodyWrench& wrench, const QuadParams& params);

/// Exact wrench produced by a set of rotor speeds.
BodyWrench wrench_of(const Eigen::Vector4d& rotor_speeds,
                     const QuadParams& params);

/// Hover rotor speed: each rotor carries mg/4.
double hover_rotor_speed(const QuadParams& params);

/// Equilibrium state at the origin.
QuadState hover_state(const QuadParams& params);

/// Time derivative of the state for a fixed (already noise-corrupted)
/// rotor speed command. Exposed for integrator verification.
struct QuadStateDeriv {
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;
  Eigen::Matrix3d rotation;
  Eigen::Vector3d body_rates;
  Eigen::Vector4d rotor_speeds;
};
QuadStateDeriv state_derivative(const QuadState& state,
                                const Eigen::Vector4d& rotor_cmd,
                                const QuadParams& params);

struct StepResult {
  QuadState state;
  Eigen::Vector4d rotor_cmd;  // noisy, clamped command the motors tracked
  bool saturated = false;     // allocation clamped a rotor
};

/// Advances the state by `dt` under a wrench command. The command is
/// allocated to rotor speeds, corrupted once by Gaussian noise (sigma_m)
/// if `rng` is given, clamped, and held for the whole step while the
/// state is integrated with `substeps` RK4 steps. The rotation is
/// re-orthonormalized after each substep. Throws NonFiniteState if the
/// result diverges.
StepResult step(const QuadState& state, const BodyWrench& command,
                const QuadParams& params, double dt, Rng* rng = nullptr,
                int substeps = 1);

}  // namespace qlcd
