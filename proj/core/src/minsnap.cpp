#include "qlcd/minsnap.hpp"

#include <cmath>
#include <utility>

#include "qlcd/errors.hpp"

namespace qlcd {
namespace {

constexpr int kOutputs = 4;
constexpr int kContinuityDepth = 3;  // continuity through jerk

// j (j-1) ... (j-d+1)
double falling(int j, int d) {
  double w = 1.0;
  for (int k = 0; k < d; ++k) w *= static_cast<double>(j - k);
  return w;
}

int rows_per_output(int s) { return 2 * s + 6 + kContinuityDepth * (s - 1); }

// Constraint rows in either the unscaled monomial basis (local time in
// seconds) or the per-segment scaled basis tau = t/T. Row order: per
// output, interpolation (start, end per segment), rest boundary at the
// two ends (vel/acc/jerk), continuity through jerk at interior points.
void assemble_constraints(const WaypointSet& wps,
                          const Eigen::VectorXd& durations, int n,
                          bool scaled, Eigen::MatrixXd& A,
                          Eigen::VectorXd& b) {
  const int s = static_cast<int>(wps.size()) - 1;
  const int nc = n + 1;
  const int cols = kOutputs * s * nc;
  const int rows = kOutputs * rows_per_output(s);
  A.setZero(rows, cols);
  b.setZero(rows);

  auto base = [&](int seg, int out) { return (seg * kOutputs + out) * nc; };
  // Derivative-d row of segment seg at its start or end.
  auto fill_deriv = [&](int row, int seg, int out, int d, bool at_end,
                        double sign) {
    const double T = durations[seg];
    if (at_end) {
      for (int j = d; j <= n; ++j) {
        const double w =
            scaled ? falling(j, d) / std::pow(T, d)
                   : falling(j, d) * std::pow(T, static_cast<double>(j - d));
        A(row, base(seg, out) + j) += sign * w;
      }
    } else {
      const double w =
          scaled ? falling(d, d) / std::pow(T, d) : falling(d, d);
      A(row, base(seg, out) + d) += sign * w;
    }
  };

  int row = 0;
  for (int out = 0; out < kOutputs; ++out) {
    auto waypoint_value = [&](int i) {
      return out < 3 ? wps.positions[i][out] : wps.yaws[i];
    };
    for (int seg = 0; seg < s; ++seg) {
      fill_deriv(row, seg, out, 0, /*at_end=*/false, 1.0);
      b[row++] = waypoint_value(seg);
      fill_deriv(row, seg, out, 0, /*at_end=*/true, 1.0);
      b[row++] = waypoint_value(seg + 1);
    }
    for (int d = 1; d <= 3; ++d) fill_deriv(row++, 0, out, d, false, 1.0);
    for (int d = 1; d <= 3; ++d) fill_deriv(row++, s - 1, out, d, true, 1.0);
    for (int i = 1; i < s; ++i) {
      for (int d = 1; d <= kContinuityDepth; ++d) {
        fill_deriv(row, i - 1, out, d, true, 1.0);
        fill_deriv(row, i, out, d, false, -1.0);
        ++row;
      }
    }
  }
}

Eigen::MatrixXd scaled_snap_hessian(const Eigen::VectorXd& durations, int n) {
  const int s = static_cast<int>(durations.size());
  const int nc = n + 1;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(kOutputs * s * nc,
                                            kOutputs * s * nc);
  for (int seg = 0; seg < s; ++seg) {
    const double t7 = std::pow(durations[seg], 7);
    for (int out = 0; out < kOutputs; ++out) {
      const int b = (seg * kOutputs + out) * nc;
      for (int j = 4; j <= n; ++j)
        for (int k = 4; k <= n; ++k)
          H(b + j, b + k) =
              falling(j, 4) * falling(k, 4) / ((j + k - 7) * t7);
    }
  }
  return H;
}

}  // namespace

void WaypointSet::validate() const {
  if (positions.size() < 2)
    throw DimensionMismatch("waypoint set needs >= 2 waypoints");
  if (yaws.size() != positions.size())
    throw DimensionMismatch("yaw count != waypoint count");
  for (const auto& p : positions)
    if (!p.allFinite())
      throw DimensionMismatch("waypoint coordinates must be finite");
  for (double y : yaws)
    if (!std::isfinite(y)) throw DimensionMismatch("yaw must be finite");
}

WaypointSet waypoints_from_positions(std::vector<Eigen::Vector3d> positions) {
  WaypointSet wps;
  wps.yaws.assign(positions.size(), 0.0);
  wps.positions = std::move(positions);
  return wps;
}

Eigen::VectorXd time_allocation(const WaypointSet& wps, double v_avg) {
  wps.validate();
  if (!(v_avg > 0.0)) throw DimensionMismatch("v_avg must be positive");
  const int s = static_cast<int>(wps.size()) - 1;
  Eigen::VectorXd T(s);
  for (int i = 0; i < s; ++i) {
    const double d = (wps.positions[i + 1] - wps.positions[i]).norm();
    if (d < 1e-9)
      throw DegenerateSegment("waypoints " + std::to_string(i) + " and " +
                              std::to_string(i + 1) + " coincide");
    T[i] = d / v_avg;
  }
  return T;
}

Eigen::MatrixXd snap_hessian(const Eigen::VectorXd& durations, int n) {
  if (n < 4) throw DimensionMismatch("snap Hessian needs degree >= 4");
  const int s = static_cast<int>(durations.size());
  const int nc = n + 1;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(kOutputs * s * nc,
                                            kOutputs * s * nc);
  for (int seg = 0; seg < s; ++seg) {
    const double T = durations[seg];
    for (int out = 0; out < kOutputs; ++out) {
      const int b = (seg * kOutputs + out) * nc;
      for (int j = 4; j <= n; ++j)
        for (int k = 4; k <= n; ++k)
          H(b + j, b + k) = falling(j, 4) * falling(k, 4) *
                            std::pow(T, static_cast<double>(j + k - 7)) /
                            (j + k - 7);
    }
  }
  return H;
}

void require_full_row_rank(const Eigen::MatrixXd& A, double tol) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  qr.setThreshold(tol);
  if (qr.rank() < A.rows())
    throw RankDeficiency("constraint matrix has dependent rows (rank " +
                         std::to_string(qr.rank()) + " of " +
                         std::to_string(A.rows()) + ")");
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> constraint_system(
    const WaypointSet& wps, const Eigen::VectorXd& durations, int n) {
  wps.validate();
  const int s = static_cast<int>(wps.size()) - 1;
  if (durations.size() != s)
    throw DimensionMismatch("need one duration per segment");
  for (int i = 0; i < s; ++i)
    if (!(durations[i] > 0.0))
      throw DegenerateSegment("segment durations must be positive");
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  assemble_constraints(wps, durations, n, /*scaled=*/false, A, b);
  require_full_row_rank(A);
  return {std::move(A), std::move(b)};
}

QpSystem build_qp(const WaypointSet& wps, const Eigen::VectorXd& durations,
                  int n) {
  QpSystem qp;
  qp.H = snap_hessian(durations, n);
  std::tie(qp.A, qp.b) = constraint_system(wps, durations, n);
  return qp;
}

QpSystem build_qp_scaled(const WaypointSet& wps,
                         const Eigen::VectorXd& durations, int n) {
  wps.validate();
  if (durations.size() != static_cast<int>(wps.size()) - 1)
    throw DimensionMismatch("need one duration per segment");
  QpSystem qp;
  qp.H = scaled_snap_hessian(durations, n);
  assemble_constraints(wps, durations, n, /*scaled=*/true, qp.A, qp.b);
  require_full_row_rank(qp.A);
  return qp;
}

Eigen::VectorXd basis_scale(const Eigen::VectorXd& durations, int n) {
  const int s = static_cast<int>(durations.size());
  const int nc = n + 1;
  Eigen::VectorXd d(kOutputs * s * nc);
  for (int seg = 0; seg < s; ++seg)
    for (int out = 0; out < kOutputs; ++out)
      for (int j = 0; j <= n; ++j)
        d[(seg * kOutputs + out) * nc + j] =
            std::pow(durations[seg], static_cast<double>(j));
  return d;
}

Eigen::MatrixXd feature_map(const Eigen::VectorXd& durations, int n) {
  const int s = static_cast<int>(durations.size());
  const int nc = n + 1;
  const int dim = kOutputs * s * nc;
  // Per (segment, output) block of n+1 rows: velocity at tau {1/4, 3/4},
  // acceleration at tau {0, 1/3, 2/3, 1}, jerk at tau {1/4, 3/4}. All in
  // SI units, so the same feature means the same physics in every task.
  // Absolute positions are deliberately absent: the dynamics are
  // translation invariant, and position features only offer the model
  // spurious shortcuts.
  struct Probe {
    int deriv;
    double tau;
  };
  static constexpr Probe kProbes[] = {{1, 0.25}, {1, 0.75}, {2, 0.0},
                                      {2, 1.0 / 3.0}, {2, 2.0 / 3.0},
                                      {2, 1.0},   {3, 0.25}, {3, 0.75}};
  static_assert(sizeof(kProbes) / sizeof(kProbes[0]) == 8);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
  for (int seg = 0; seg < s; ++seg)
    for (int out = 0; out < kOutputs; ++out) {
      const int base = (seg * kOutputs + out) * nc;
      for (int p = 0; p < nc && p < 8; ++p) {
        const auto [q, tau] = kProbes[p];
        const double t = tau * durations[seg];
        for (int j = q; j <= n; ++j) {
          double fall = 1.0;
          for (int k = 0; k < q; ++k) fall *= j - k;
          M(base + p, base + j) = fall * std::pow(t, j - q);
        }
      }
    }
  return M;
}

Eigen::MatrixXd accel_energy_form(const Eigen::VectorXd& durations, int n) {
  const int s = static_cast<int>(durations.size());
  const int nc = n + 1;
  const int dim = kOutputs * s * nc;
  const Eigen::MatrixXd M = feature_map(durations, n);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim, dim);
  // Probes 2..5 are the acceleration samples (see feature_map); uniform
  // weights T/4 give a rectangle-rule estimate of integral |a|^2 dt per
  // xyz output.
  for (int seg = 0; seg < s; ++seg)
    for (int out = 0; out < 3; ++out) {
      const int base = (seg * kOutputs + out) * nc;
      for (int p = 2; p <= 5 && p < nc; ++p)
        Q += (durations[seg] / 4.0) * M.row(base + p).transpose() *
             M.row(base + p);
    }
  return Q;
}

PiecewiseTrajectory solve_minsnap(const WaypointSet& wps,
                                  const Eigen::VectorXd& durations, int n) {
  wps.validate();
  if (n < 7)
    throw DimensionMismatch("rest-to-rest snap problems need degree >= 7");
  const int s = static_cast<int>(wps.size()) - 1;
  if (durations.size() != s)
    throw DimensionMismatch("need one duration per segment");
  const int nc = n + 1;
  const int N = kOutputs * s * nc;

  // Factor the KKT system in the tau = t/T basis where it is well
  // conditioned, then refine against the unscaled system so the returned
  // residuals hold in the basis the coefficients are reported in.
  Eigen::MatrixXd A_s;
  Eigen::VectorXd b_s;
  assemble_constraints(wps, durations, n, /*scaled=*/true, A_s, b_s);
  const Eigen::MatrixXd H_s = scaled_snap_hessian(durations, n);
  const int M = static_cast<int>(A_s.rows());

  Eigen::MatrixXd K_s = Eigen::MatrixXd::Zero(N + M, N + M);
  K_s.topLeftCorner(N, N) = 2.0 * H_s;
  K_s.topRightCorner(N, M) = A_s.transpose();
  K_s.bottomLeftCorner(M, N) = A_s;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K_s);

  // diag scale: scaled coefficient j = unscaled * T^j.
  const Eigen::VectorXd d_scale = basis_scale(durations, n);

  const auto qp = build_qp(wps, durations, n);  // unscaled, rank-checked
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N + M, N + M);
  K.topLeftCorner(N, N) = 2.0 * qp.H;
  K.topRightCorner(N, M) = qp.A.transpose();
  K.bottomLeftCorner(M, N) = qp.A;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + M);
  rhs.tail(M) = qp.b;

  // P maps unscaled KKT vectors into the scaled solve's space:
  // P = blockdiag(1/d_scale on coefficients, identity on multipliers).
  auto precond_solve = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd rs = r;
    rs.head(N).array() /= d_scale.array();
    Eigen::VectorXd xs = lu.solve(rs);
    xs.head(N).array() /= d_scale.array();
    return xs;
  };

  Eigen::VectorXd x = precond_solve(rhs);
  for (int it = 0; it < 3; ++it) x += precond_solve(rhs - K * x);

  PiecewiseTrajectory traj;
  traj.order = n;
  traj.segments = s;
  traj.durations = durations;
  traj.coefficients = x.head(N);
  const Eigen::VectorXd lambda = x.tail(M);

  if (!x.allFinite()) throw SingularKkt("KKT solve produced non-finite values");
  const double feas = (qp.A * traj.coefficients - qp.b).lpNorm<Eigen::Infinity>();
  const double stat = (2.0 * qp.H * traj.coefficients +
                       qp.A.transpose() * lambda)
                          .lpNorm<Eigen::Infinity>();
  if (feas >= 1e-8 || stat >= 1e-6)
    throw SingularKkt("KKT residuals out of tolerance (feasibility " +
                      std::to_string(feas) + ", stationarity " +
                      std::to_string(stat) + ")");
  return traj;
}

PiecewiseTrajectory solve_minsnap(const WaypointSet& wps, double v_avg) {
  return solve_minsnap(wps, time_allocation(wps, v_avg), 7);
}

double snap_cost(const PiecewiseTrajectory& traj) {
  traj.validate();
  const Eigen::MatrixXd H = snap_hessian(traj.durations, traj.order);
  return traj.coefficients.dot(H * traj.coefficients);
}

}  // namespace qlcd
