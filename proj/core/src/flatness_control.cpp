#include "qlcd/flatness_control.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "qlcd/errors.hpp"
#include "qlcd/so3.hpp"

namespace qlcd {
namespace {

constexpr double kSingularTol = 1e-6;
constexpr double kOmegaFdStep = 1e-3;  // s
// Feedback acceleration fed into the flatness map is bounded (as a
// multiple of g) so large position errors cannot push the desired thrust
// vector through zero.
constexpr double kMaxFeedbackAccelG = 0.6;

// Rotation and body rates for one reference point.
std::pair<Eigen::Matrix3d, Eigen::Vector3d> attitude_once(
    const FlatReference& ref, const QuadParams& p) {
  const Eigen::Vector3d z_w = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d tau = p.gravity * z_w - ref.acceleration;
  const double c = tau.norm();
  if (c < kSingularTol)
    throw FlatnessSingularity("desired acceleration cancels gravity");
  const Eigen::Vector3d b3 = tau / c;

  const Eigen::Vector3d x_c(std::cos(ref.yaw), std::sin(ref.yaw), 0.0);
  const Eigen::Vector3d u = x_c - b3.dot(x_c) * b3;
  const double u_norm = u.norm();
  if (u_norm < kSingularTol)
    throw FlatnessSingularity("yaw direction parallel to thrust axis");
  const Eigen::Vector3d b1 = u / u_norm;
  const Eigen::Vector3d b2 = b3.cross(b1);

  Eigen::Matrix3d R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b3;

  // tau_dot = -jerk; project out the component along b3.
  const Eigen::Vector3d b3_dot = -(ref.jerk - b3.dot(ref.jerk) * b3) / c;
  const double pr = -b3_dot.dot(b2);
  const double qr = b3_dot.dot(b1);
  const Eigen::Vector3d x_c_dot =
      ref.yaw_rate * Eigen::Vector3d(-std::sin(ref.yaw), std::cos(ref.yaw), 0.0);
  const Eigen::Vector3d u_dot = x_c_dot -
                                (b3_dot.dot(x_c) + b3.dot(x_c_dot)) * b3 -
                                b3.dot(x_c) * b3_dot;
  const double rr = u_dot.dot(b2) / u_norm;
  return {R, Eigen::Vector3d(pr, qr, rr)};
}

// Taylor-shifts a reference by h using its own derivatives (top
// derivatives held constant).
FlatReference shift_reference(const FlatReference& ref, double h) {
  FlatReference s = ref;
  s.t = ref.t + h;
  s.position = ref.position + h * ref.velocity +
               (h * h / 2.0) * ref.acceleration +
               (h * h * h / 6.0) * ref.jerk +
               (h * h * h * h / 24.0) * ref.snap;
  s.velocity = ref.velocity + h * ref.acceleration +
               (h * h / 2.0) * ref.jerk + (h * h * h / 6.0) * ref.snap;
  s.acceleration = ref.acceleration + h * ref.jerk + (h * h / 2.0) * ref.snap;
  s.jerk = ref.jerk + h * ref.snap;
  s.yaw = ref.yaw + h * ref.yaw_rate + (h * h / 2.0) * ref.yaw_accel;
  s.yaw_rate = ref.yaw_rate + h * ref.yaw_accel;
  return s;
}

}  // namespace

DesiredAttitude flat_to_attitude(const FlatReference& ref,
                                 const QuadParams& params) {
  DesiredAttitude att;
  auto [R, omega] = attitude_once(ref, params);
  att.rotation = R;
  att.body_rates = omega;
  const double h = kOmegaFdStep;
  const Eigen::Vector3d omega_plus =
      attitude_once(shift_reference(ref, h), params).second;
  const Eigen::Vector3d omega_minus =
      attitude_once(shift_reference(ref, -h), params).second;
  att.body_rate_dot = (omega_plus - omega_minus) / (2.0 * h);
  return att;
}

BodyWrench se3_control(const QuadState& state, const FlatReference& ref,
                       const DesiredAttitude& att, const ControlGains& gains,
                       const QuadParams& params) {
  const Eigen::Vector3d z_w = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d e_x = state.position - ref.position;
  const Eigen::Vector3d e_v = state.velocity - ref.velocity;

  const Eigen::Matrix3d& R = state.rotation;
  const Eigen::Matrix3d& Rd = att.rotation;
  const Eigen::Matrix3d err = Rd.transpose() * R - R.transpose() * Rd;
  const Eigen::Vector3d e_R = 0.5 * vee(err);
  const Eigen::Vector3d omega_d_body = R.transpose() * Rd * att.body_rates;
  const Eigen::Vector3d e_omega = state.body_rates - omega_d_body;

  // Thrust: projection of the desired specific force onto the actual
  // body z axis. With thrust acting along -z_B and gravity along +z_W,
  // positive errors demand more thrust.
  const Eigen::Vector3d force_des = gains.k_x * e_x + gains.k_v * e_v +
                                    params.mass * params.gravity * z_w -
                                    params.mass * ref.acceleration;
  BodyWrench cmd;
  cmd.thrust = force_des.dot(R * z_w);

  const Eigen::Vector3d J = params.inertia;
  const Eigen::Vector3d Jw = J.cwiseProduct(state.body_rates);
  const Eigen::Vector3d feedforward =
      J.cwiseProduct(hat(state.body_rates) * omega_d_body -
                     R.transpose() * Rd * att.body_rate_dot);
  cmd.moment = -gains.k_R * e_R - gains.k_omega * e_omega +
               state.body_rates.cross(Jw) - feedforward;
  return cmd;
}

TrackingController::TrackingController(PiecewiseTrajectory traj,
                                       VehiclePreset preset)
    : traj_(std::move(traj)), preset_(std::move(preset)) {
  traj_.validate();
  if (auto why = preset_.params.violation())
    throw InvalidOverride("invalid parameters: " + *why);
  if (auto why = preset_.gains.violation())
    throw InvalidOverride("invalid gains: " + *why);
  total_ = traj_.total_duration();
}

FlatReference TrackingController::reference(double t) const {
  return eval_reference(traj_, std::clamp(t, 0.0, total_));
}

BodyWrench TrackingController::command(const QuadState& state,
                                       double t) const {
  const FlatReference ref = reference(t);
  const auto& p = preset_.params;
  const auto& g = preset_.gains;

  // The attitude is built from a feedback-augmented acceleration so the
  // vehicle banks toward the reference instead of only thrusting along
  // the feedforward axis.
  Eigen::Vector3d fb = -(g.k_x * (state.position - ref.position) +
                         g.k_v * (state.velocity - ref.velocity)) /
                       p.mass;
  const double fb_max = kMaxFeedbackAccelG * p.gravity;
  if (fb.norm() > fb_max) fb *= fb_max / fb.norm();
  FlatReference aug = ref;
  aug.acceleration += fb;

  const DesiredAttitude att = flat_to_attitude(aug, p);
  return se3_control(state, ref, att, g, p);
}

}  // namespace qlcd
