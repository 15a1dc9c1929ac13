#include "qlcd/quad_dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "qlcd/errors.hpp"
#include "qlcd/so3.hpp"

namespace qlcd {
namespace {

// Rotor layout (top view, x forward, y right, z down):
//
//     1 (cw)        0 (ccw)        y
//        \         /               ^
//         \       /                |
//          ---+---          x <----+   (z into page)
//         /       \.
//        /         \.
//     2 (ccw)       3 (cw)
//
// Positions r_i = (x_i, y_i, 0) with |r_i| = arm_length; a rotor thrust
// f_i acts along -z_B, contributing moment (-y_i f_i, x_i f_i, s_i k_m/k_f f_i).
constexpr double kSignX[4] = {+1.0, -1.0, -1.0, +1.0};
constexpr double kSignY[4] = {+1.0, +1.0, -1.0, -1.0};
constexpr double kSpin[4] = {+1.0, -1.0, +1.0, -1.0};

QuadState axpy(const QuadState& s, double a, const QuadStateDeriv& d) {
  QuadState r;
  r.position = s.position + a * d.position;
  r.velocity = s.velocity + a * d.velocity;
  r.rotation = s.rotation + a * d.rotation;
  r.body_rates = s.body_rates + a * d.body_rates;
  r.rotor_speeds = s.rotor_speeds + a * d.rotor_speeds;
  return r;
}

}  // namespace

bool QuadState::all_finite() const {
  return position.allFinite() && velocity.allFinite() &&
         rotation.allFinite() && body_rates.allFinite() &&
         rotor_speeds.allFinite();
}

AllocationResult allocate(const BodyWrench& wrench, const QuadParams& p) {
  const double l = p.arm_length / std::sqrt(2.0);
  const double gamma = p.k_m / p.k_f;
  // The mixer rows ([1,1,1,1], moments) are mutually orthogonal, so the
  // inverse is the transpose with rows rescaled.
  Eigen::Vector4d f;
  for (int i = 0; i < 4; ++i) {
    f[i] = 0.25 * (wrench.thrust - kSignY[i] * wrench.moment.x() / l +
                   kSignX[i] * wrench.moment.y() / l +
                   kSpin[i] * wrench.moment.z() / gamma);
  }
  const double f_min = p.k_f * p.omega_min * p.omega_min;
  const double f_max = p.k_f * p.omega_max * p.omega_max;
  AllocationResult out;
  out.saturated = false;
  for (int i = 0; i < 4; ++i) {
    const double clamped = std::clamp(f[i], f_min, f_max);
    if (clamped != f[i]) out.saturated = true;
    out.rotor_forces[i] = clamped;
    out.rotor_speeds[i] = std::sqrt(clamped / p.k_f);
  }
  return out;
}

BodyWrench wrench_of(const Eigen::Vector4d& rotor_speeds,
                     const QuadParams& p) {
  const double l = p.arm_length / std::sqrt(2.0);
  const double gamma = p.k_m / p.k_f;
  BodyWrench w;
  w.thrust = 0.0;
  w.moment.setZero();
  for (int i = 0; i < 4; ++i) {
    const double f = p.k_f * rotor_speeds[i] * rotor_speeds[i];
    w.thrust += f;
    w.moment.x() += -kSignY[i] * l * f;
    w.moment.y() += kSignX[i] * l * f;
    w.moment.z() += kSpin[i] * gamma * f;
  }
  return w;
}

double hover_rotor_speed(const QuadParams& p) {
  return std::sqrt(p.mass * p.gravity / (4.0 * p.k_f));
}

QuadState hover_state(const QuadParams& p) {
  QuadState s;
  s.rotor_speeds.setConstant(hover_rotor_speed(p));
  return s;
}

QuadStateDeriv state_derivative(const QuadState& s,
                                const Eigen::Vector4d& rotor_cmd,
                                const QuadParams& p) {
  const BodyWrench w = wrench_of(s.rotor_speeds, p);
  const Eigen::Vector3d z_w = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d body_v = s.rotation.transpose() * s.velocity;
  const Eigen::Vector3d drag_w =
      s.rotation * p.drag.asDiagonal() * body_v;

  QuadStateDeriv d;
  d.position = s.velocity;
  d.velocity = p.gravity * z_w -
               (w.thrust / p.mass) * (s.rotation * z_w) - drag_w / p.mass;
  d.rotation = s.rotation * hat(s.body_rates);
  const Eigen::Vector3d J = p.inertia;
  const Eigen::Vector3d Jw = J.cwiseProduct(s.body_rates);
  d.body_rates =
      (w.moment - s.body_rates.cross(Jw)).cwiseQuotient(J);
  d.rotor_speeds = (rotor_cmd - s.rotor_speeds) / p.tau_m;
  return d;
}

StepResult step(const QuadState& state, const BodyWrench& command,
                const QuadParams& p, double dt, Rng* rng, int substeps) {
  if (!(dt > 0.0) || substeps < 1)
    throw DimensionMismatch("step requires dt > 0 and substeps >= 1");

  AllocationResult alloc = allocate(command, p);
  Eigen::Vector4d cmd = alloc.rotor_speeds;
  if (rng != nullptr && p.sigma_m > 0.0) {
    for (int i = 0; i < 4; ++i)
      cmd[i] = std::clamp(cmd[i] + p.sigma_m * rng->normal(), p.omega_min,
                          p.omega_max);
  }

  QuadState s = state;
  const double h = dt / substeps;
  for (int k = 0; k < substeps; ++k) {
    const QuadStateDeriv k1 = state_derivative(s, cmd, p);
    const QuadStateDeriv k2 = state_derivative(axpy(s, 0.5 * h, k1), cmd, p);
    const QuadStateDeriv k3 = state_derivative(axpy(s, 0.5 * h, k2), cmd, p);
    const QuadStateDeriv k4 = state_derivative(axpy(s, h, k3), cmd, p);
    QuadStateDeriv sum = k1;
    sum.position += 2.0 * k2.position + 2.0 * k3.position + k4.position;
    sum.velocity += 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity;
    sum.rotation += 2.0 * k2.rotation + 2.0 * k3.rotation + k4.rotation;
    sum.body_rates +=
        2.0 * k2.body_rates + 2.0 * k3.body_rates + k4.body_rates;
    sum.rotor_speeds +=
        2.0 * k2.rotor_speeds + 2.0 * k3.rotor_speeds + k4.rotor_speeds;
    s = axpy(s, h / 6.0, sum);
    s.rotation = orthonormalize(s.rotation);
  }
  if (!s.all_finite())
    throw NonFiniteState("state diverged during integration");
  return StepResult{s, cmd, alloc.saturated};
}

}  // namespace qlcd
