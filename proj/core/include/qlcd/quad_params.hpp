#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qlcd {

/// Physical vehicle parameters. SI units throughout.
///
/// Frame convention (used by the whole library): the world z axis points
/// along gravity, so free fall accelerates toward +z_W. The body z axis
/// coincides with z_W at hover and the rotors push the airframe toward
/// -z_B. Translational dynamics: m*r_dd = m*g*z_W - f*R*z_B - R*D*R^T*v.
struct QuadParams {
  double mass = 0.030;             // kg
  Eigen::Vector3d inertia{1.43e-5, 1.43e-5, 2.89e-5};  // diag(J), kg m^2
  double gravity = 9.81;           // m/s^2
  double arm_length = 0.046;       // m, rotor distance from center
  double k_f = 2.3e-8;             // N/(rad/s)^2
  double k_m = 7.8e-10;            // N m/(rad/s)^2
  double omega_min = 0.0;          // rad/s
  // Max rotor speed sets the thrust headroom over hover (~1.38x here);
  // aggressive references saturate the motors and crash at this margin.
  double omega_max = 2100.0;       // rad/s
  double tau_m = 0.005;            // s, first-order motor time constant
  double sigma_m = 100.0;          // rad/s, command noise std
  Eigen::Vector3d drag{0.005, 0.005, 0.010};  // body-frame diag, N/(m/s)

  /// Returns a description of the first violated invariant, if any.
  std::optional<std::string> violation() const;
};

/// Scalar gains of the geometric tracking controller.
struct ControlGains {
  double k_x = 0.48;       // N/m
  double k_v = 0.228;      // N/(m/s)
  double k_R = 5.15e-2;    // N m/rad
  double k_omega = 1.54e-3;  // N m/(rad/s)

  std::optional<std::string> violation() const;
};

/// Parameters and gains travel together: the gains are tuned for the
/// vehicle they fly.
struct VehiclePreset {
  QuadParams params;
  ControlGains gains;
};

using Overrides = std::vector<std::pair<std::string, double>>;

/// Built-in preset by name. Throws UnknownPreset.
VehiclePreset make_preset(const std::string& name);

/// Applies key overrides ("mass", "d_x", "k_x", ...) to a preset and
/// validates the result. Throws InvalidOverride on unknown keys or
/// invariant violations.
VehiclePreset apply_overrides(VehiclePreset base, const Overrides& overrides);

/// Preset plus overrides in one call. Throws UnknownPreset, InvalidOverride.
QuadParams make_params(const std::string& preset, const Overrides& overrides);

/// Preset file: one `name = value` per line, `#` starts a comment.
/// Unlisted keys keep the base preset's values.
VehiclePreset load_preset_file(const std::filesystem::path& path,
                               const VehiclePreset& base);
void save_preset_file(const VehiclePreset& preset,
                      const std::filesystem::path& path);

}  // namespace qlcd
