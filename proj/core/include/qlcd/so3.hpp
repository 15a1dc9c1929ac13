#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

namespace qlcd {

/// hat: R^3 -> so(3), so that hat(a) * b == a x b.
inline Eigen::Matrix3d hat(const Eigen::Vector3d& a) {
  Eigen::Matrix3d m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
      -a.y(), a.x(), 0.0;
  return m;
}

/// vee: inverse of hat on antisymmetric matrices.
inline Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

/// Projects a near-rotation back onto SO(3) (unit-quaternion round trip).
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

/// Heading of the body x axis in the world x-y plane.
inline double yaw_of(const Eigen::Matrix3d& r) {
  return std::atan2(r(1, 0), r(0, 0));
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a + M_PI, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - M_PI;
}

}  // namespace qlcd
