#include "qlcd/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "qlcd/errors.hpp"

namespace qlcd {

bool FlatReference::all_finite() const {
  return std::isfinite(t) && position.allFinite() && velocity.allFinite() &&
         acceleration.allFinite() && jerk.allFinite() && snap.allFinite() &&
         std::isfinite(yaw) && std::isfinite(yaw_rate) &&
         std::isfinite(yaw_accel);
}

void PiecewiseTrajectory::validate() const {
  if (segments < 1) throw DimensionMismatch("trajectory needs >= 1 segment");
  if (order < 7)
    throw DimensionMismatch("polynomial order must be >= 7 for snap problems");
  if (durations.size() != segments)
    throw DimensionMismatch("duration count != segment count");
  for (int i = 0; i < segments; ++i)
    if (!(durations[i] > 0.0) || !std::isfinite(durations[i]))
      throw DimensionMismatch("segment durations must be positive");
  const int expected = 4 * segments * (order + 1);
  if (coefficients.size() != expected)
    throw DimensionMismatch("coefficient vector has wrong length");
  if (!coefficients.allFinite())
    throw DimensionMismatch("coefficients must be finite");
}

Eigen::VectorXd eval_output(const PiecewiseTrajectory& traj, int segment,
                            int output, double local_t, int max_deriv) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(max_deriv + 1);
  const int n = traj.order;
  // Horner per derivative order; the factorial-style prefix j(j-1)..(j-d+1)
  // is carried along explicitly.
  for (int d = 0; d <= max_deriv; ++d) {
    double acc = 0.0;
    for (int j = n; j >= d; --j) {
      double w = 1.0;
      for (int k = 0; k < d; ++k) w *= static_cast<double>(j - k);
      acc = acc * local_t + w * traj.coeff(segment, output, j);
    }
    out[d] = acc;
  }
  return out;
}

FlatReference eval_reference(const PiecewiseTrajectory& traj, double t) {
  traj.validate();
  const double total = traj.total_duration();
  if (!(t >= 0.0) || !(t <= total))
    throw OutOfDomain("t = " + std::to_string(t) + " outside [0, " +
                      std::to_string(total) + "]");
  // Boundaries belong to the segment on the right; the final instant to
  // the last segment.
  int seg = 0;
  double local_t = t;
  while (seg + 1 < traj.segments && local_t >= traj.durations[seg]) {
    local_t -= traj.durations[seg];
    ++seg;
  }
  local_t = std::min(local_t, traj.durations[seg]);

  FlatReference ref;
  ref.t = t;
  for (int axis = 0; axis < 3; ++axis) {
    const Eigen::VectorXd v = eval_output(traj, seg, axis, local_t, 4);
    ref.position[axis] = v[0];
    ref.velocity[axis] = v[1];
    ref.acceleration[axis] = v[2];
    ref.jerk[axis] = v[3];
    ref.snap[axis] = v[4];
  }
  const Eigen::VectorXd y = eval_output(traj, seg, 3, local_t, 2);
  ref.yaw = y[0];
  ref.yaw_rate = y[1];
  ref.yaw_accel = y[2];
  return ref;
}

void save_trajectory(const PiecewiseTrajectory& traj,
                     const std::filesystem::path& path) {
  traj.validate();
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write trajectory file " + path.string());
  out << traj.order << " " << traj.segments << "\n";
  char buf[64];
  for (int i = 0; i < traj.segments; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.durations[i]);
    out << buf << (i + 1 == traj.segments ? "\n" : " ");
  }
  for (int i = 0; i < traj.segments; ++i) {
    for (int o = 0; o < 4; ++o) {
      for (int j = 0; j <= traj.order; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.coeff(i, o, j));
        out << buf << (j == traj.order ? "\n" : " ");
      }
    }
  }
  if (!out) throw IoFailure("write failed for " + path.string());
}

PiecewiseTrajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open trajectory file " + path.string());
  PiecewiseTrajectory traj;
  if (!(in >> traj.order >> traj.segments))
    throw ShapeCorruption("trajectory file " + path.string() +
                          ": bad header, expected `n s`");
  if (traj.order < 1 || traj.segments < 1 || traj.segments > 1000000)
    throw ShapeCorruption("trajectory file " + path.string() +
                          ": implausible header values");
  traj.durations.resize(traj.segments);
  for (int i = 0; i < traj.segments; ++i)
    if (!(in >> traj.durations[i]))
      throw ShapeCorruption("trajectory file " + path.string() +
                            ": truncated durations");
  const int total = 4 * traj.segments * (traj.order + 1);
  traj.coefficients.resize(total);
  for (int i = 0; i < total; ++i)
    if (!(in >> traj.coefficients[i]))
      throw ShapeCorruption("trajectory file " + path.string() +
                            ": truncated coefficients");
  double extra;
  if (in >> extra)
    throw ShapeCorruption("trajectory file " + path.string() +
                          ": trailing data");
  traj.validate();
  return traj;
}

}  // namespace qlcd
