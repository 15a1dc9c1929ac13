#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "qlcd/trajectory.hpp"

namespace qlcd {

struct WaypointSet {
  std::vector<Eigen::Vector3d> positions;
  std::vector<double> yaws;  // one per waypoint

  std::size_t size() const { return positions.size(); }
  /// Throws DimensionMismatch unless there are >= 2 finite waypoints with
  /// matching yaw count.
  void validate() const;
};

/// Positions with all yaws zero.
WaypointSet waypoints_from_positions(std::vector<Eigen::Vector3d> positions);

/// Equality-constrained QP: min c'Hc s.t. Ac = b, in the unscaled
/// monomial basis shared with PiecewiseTrajectory.
struct QpSystem {
  Eigen::MatrixXd H;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// T_i = ||w_{i+1} - w_i|| / v_avg. Throws DegenerateSegment when
/// consecutive waypoints coincide.
Eigen::VectorXd time_allocation(const WaypointSet& wps, double v_avg);

/// Block-diagonal snap Hessian over segments and the four flat outputs:
/// c'Hc = sum of integral |4th derivative|^2 over every output.
Eigen::MatrixXd snap_hessian(const Eigen::VectorXd& durations, int n);

/// Interpolation, rest-boundary, and continuity-through-jerk rows.
/// Throws RankDeficiency if the assembled rows are not independent.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> constraint_system(
    const WaypointSet& wps, const Eigen::VectorXd& durations, int n);

/// snap_hessian + constraint_system in one structure.
QpSystem build_qp(const WaypointSet& wps, const Eigen::VectorXd& durations,
                  int n);

/// The same QP in the per-segment tau = t/T basis, where the KKT system
/// is well conditioned. basis_scale maps unscaled coefficients c into
/// that basis elementwise: c_scaled = basis_scale .* c.
QpSystem build_qp_scaled(const WaypointSet& wps,
                         const Eigen::VectorXd& durations, int n);
Eigen::VectorXd basis_scale(const Eigen::VectorXd& durations, int n);

/// Linear map from unscaled coefficients to the learning features used
/// by the tracking-cost model: per segment and output, samples of the
/// physical velocity, acceleration, and jerk along the segment (SI
/// units, segment-local tau grid). Same dimension as c. Two
/// trajectories that bend the same way produce nearby features no
/// matter which task they came from, so the fleet of training tasks
/// covers the region a planner's reshaping explores -- which is what
/// keeps the model's gradients meaningful there.
Eigen::MatrixXd feature_map(const Eigen::VectorXd& durations, int n);

/// Quadrature form of integrated squared acceleration over the feature
/// probe grid, in the same coefficient basis as the map: E(c) = c' Q c.
/// The planner uses it to cap how control-hungry an iterate may get.
Eigen::MatrixXd accel_energy_form(const Eigen::VectorXd& durations, int n);

/// Throws RankDeficiency when A's rows are dependent (relative tolerance
/// on the QR diagonal).
void require_full_row_rank(const Eigen::MatrixXd& A, double tol = 1e-10);

/// Solves the KKT system [[2H, A'],[A, 0]] for the snap-optimal
/// trajectory. The solve runs in a per-segment time-scaled basis for
/// conditioning and polishes with iterative refinement; residuals are
/// verified on the unscaled system. Throws SingularKkt if the system
/// cannot be solved to tolerance.
PiecewiseTrajectory solve_minsnap(const WaypointSet& wps,
                                  const Eigen::VectorXd& durations,
                                  int n = 7);
PiecewiseTrajectory solve_minsnap(const WaypointSet& wps, double v_avg);

/// c'Hc for an existing trajectory.
double snap_cost(const PiecewiseTrajectory& traj);

}  // namespace qlcd
