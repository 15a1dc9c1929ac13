#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "qlcd/minsnap.hpp"
#include "qlcd/tracknet.hpp"
#include "qlcd/trajectory.hpp"

namespace qlcd {

struct PlanOptions {
  double lambda = 1.0;     // weight on the learned tracking penalty
  int max_iterations = 200;
  double step_init = 1.0;
  double backtrack = 0.5;  // step shrink factor in the line search
  double armijo = 1e-4;
  double tolerance = 1e-6;  // relative objective-decrease floor
  int patience = 5;         // consecutive tiny decreases before stopping
  // Cap on how far descent may drift from the min-snap solution, measured
  // in the model's standardized input metric (units of training-set
  // sigmas). The learned penalty is an interpolant; far outside the ball
  // its descent directions stop meaning anything physical. Infinity
  // disables the cap.
  double trust_radius = 2.0;
  bool fallback_to_minsnap = true;  // on NonFiniteObjective
  int multistart = 0;               // extra perturbed starts (0 = off)
  std::uint64_t multistart_seed = 0;

  void validate() const;
};

/// Feasible-set parametrization of Ac = b: every solution is
/// particular + nullspace * z.
struct NullspaceChart {
  Eigen::VectorXd particular;  // least-norm solution
  Eigen::MatrixXd nullspace;   // orthonormal columns; may have 0 columns
};

/// Orthogonal factorization of A'. Throws RankDeficiency when A lacks
/// full row rank.
NullspaceChart nullspace_chart(const Eigen::MatrixXd& A,
                               const Eigen::VectorXd& b);

struct PlanReport {
  int iterations = 0;
  double initial_snap = 0.0;
  double initial_penalty = 0.0;  // lambda-weighted
  double final_snap = 0.0;
  double final_penalty = 0.0;
  bool fallback = false;

  double initial_objective() const { return initial_snap + initial_penalty; }
  double final_objective() const { return final_snap + final_penalty; }
};

/// Controller-aware planning: minimizes snap cost plus lambda times the
/// learned tracking penalty over the affine feasible set, by projected-
/// free gradient descent on the constraint null space (run in the scaled
/// coefficient basis), initialized at the min-snap solution. The model
/// may be null (pure min-snap objective). Feasibility holds by
/// construction; the objective never increases along the accepted
/// iterate sequence.
std::pair<PiecewiseTrajectory, PlanReport> plan(const WaypointSet& wps,
                                                double v_avg,
                                                const TrackNetModel* model,
                                                const PlanOptions& opts);

}  // namespace qlcd
