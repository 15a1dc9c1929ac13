#include "qlcd/plan.hpp"

#include <algorithm>
#include <cmath>

#include "qlcd/errors.hpp"
#include "qlcd/rng.hpp"

namespace qlcd {
namespace {

struct Objective {
  const Eigen::MatrixXd& H;  // scaled basis
  const NullspaceChart& chart;
  const TrackNetModel* model;
  double lambda;
  // Converts the QP's tau-basis coefficients into the model's feature
  // space (derivative samples; feature_map composed with the inverse
  // basis scaling).
  Eigen::MatrixXd model_map{};
  // Trust region in the model's standardized input metric, centered at
  // the min-snap solution. The network is only trustworthy near its
  // training distribution; steps that leave the ball are rejected in the
  // line search rather than accepted on the strength of extrapolated
  // predictions. Empty weights disable the check.
  Eigen::VectorXd trust_w{};
  Eigen::VectorXd trust_center{};
  double trust_radius = 0.0;

  Eigen::VectorXd coeffs(const Eigen::VectorXd& z) const {
    Eigen::VectorXd c_hat = chart.particular;
    if (z.size() > 0) c_hat += chart.nullspace * z;
    return c_hat;
  }

  Eigen::VectorXd features(const Eigen::VectorXd& c_hat) const {
    return model_map * c_hat;
  }

  // Quadrature form of the trajectory's integrated squared acceleration
  // over the probe grid. Iterates may redistribute control effort but
  // never demand more of it than the plan they started from: the model
  // has no training evidence about more-aggressive trajectories, and
  // every failure mode we traced came from descending into them.
  Eigen::MatrixXd energy_Q{};
  double energy_cap = 0.0;

  double accel_energy(const Eigen::VectorXd& c_hat) const {
    return c_hat.dot(energy_Q * c_hat);
  }

  bool inside_trust(const Eigen::VectorXd& c_hat) const {
    if (trust_w.size() == 0) return true;
    if (accel_energy(c_hat) > energy_cap) return false;
    return (features(c_hat) - trust_center).cwiseProduct(trust_w).norm() <=
           trust_radius;
  }

  // snap + lambda * penalty at z; both terms reported separately. The
  // model consumes sampled trajectory derivatives, a linear map away
  // from the QP's tau-basis coefficients.
  std::pair<double, double> split_value(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd c_hat = coeffs(z);
    const double snap = c_hat.dot(H * c_hat);
    double pen = 0.0;
    if (model != nullptr && lambda > 0.0)
      pen = lambda * forward(*model, features(c_hat));
    if (!std::isfinite(snap) || !std::isfinite(pen))
      throw NonFiniteObjective("objective is not finite");
    return {snap, pen};
  }

  double value(const Eigen::VectorXd& z) const {
    const auto [snap, pen] = split_value(z);
    return snap + pen;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd c_hat = coeffs(z);
    Eigen::VectorXd g_c = 2.0 * (H * c_hat);
    if (model != nullptr && lambda > 0.0)
      g_c += lambda * (model_map.transpose() *
                       input_gradient(*model, features(c_hat)));
    if (!g_c.allFinite())
      throw NonFiniteObjective("objective gradient is not finite");
    return chart.nullspace.transpose() * g_c;
  }
};

struct DescentResult {
  Eigen::VectorXd z;
  double value;
  int iterations;
};

DescentResult descend(const Objective& obj, Eigen::VectorXd z,
                      const PlanOptions& opts) {
  double phi = obj.value(z);
  double step = opts.step_init;
  int small_streak = 0;
  int iters = 0;
  for (; iters < opts.max_iterations; ++iters) {
    const Eigen::VectorXd g = obj.gradient(z);
    const double g2 = g.squaredNorm();
    if (g2 == 0.0) break;

    double alpha = step;
    bool accepted = false;
    double phi_new = phi;
    Eigen::VectorXd z_new;
    while (alpha > 1e-14) {
      z_new = z - alpha * g;
      // An overlong trial can overflow the penalty network, and a trial
      // outside the trust ball is only "better" by extrapolation; both
      // are rejected steps, not failed plans.
      if (!obj.inside_trust(obj.coeffs(z_new))) {
        alpha *= opts.backtrack;
        continue;
      }
      try {
        phi_new = obj.value(z_new);
      } catch (const NonFiniteObjective&) {
        alpha *= opts.backtrack;
        continue;
      }
      if (phi_new <= phi - opts.armijo * alpha * g2) {
        accepted = true;
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) break;

    const double decrease = phi - phi_new;
    z = std::move(z_new);
    phi = phi_new;
    step = std::min(alpha * 2.0, 1e6);
    if (decrease < opts.tolerance * (1.0 + std::abs(phi))) {
      if (++small_streak >= opts.patience) {
        ++iters;
        break;
      }
    } else {
      small_streak = 0;
    }
  }
  return {std::move(z), phi, iters};
}

}  // namespace

void PlanOptions::validate() const {
  if (!(lambda >= 0.0)) throw DimensionMismatch("lambda must be >= 0");
  if (max_iterations < 0) throw DimensionMismatch("max_iterations must be >= 0");
  if (!(step_init > 0.0)) throw DimensionMismatch("step_init must be > 0");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw DimensionMismatch("backtrack factor must be in (0, 1)");
  if (!(armijo > 0.0 && armijo < 1.0))
    throw DimensionMismatch("armijo constant must be in (0, 1)");
  if (!(tolerance > 0.0)) throw DimensionMismatch("tolerance must be > 0");
  if (patience < 1) throw DimensionMismatch("patience must be >= 1");
  if (!(trust_radius > 0.0))
    throw DimensionMismatch("trust_radius must be > 0");
  if (multistart < 0) throw DimensionMismatch("multistart must be >= 0");
}

NullspaceChart nullspace_chart(const Eigen::MatrixXd& A,
                               const Eigen::VectorXd& b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (b.size() != m) throw DimensionMismatch("b length != A rows");
  if (m > n)
    throw RankDeficiency("more constraints than unknowns cannot be full rank");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  qr.setThreshold(1e-10);
  if (qr.rank() < m)
    throw RankDeficiency("constraint matrix is rank deficient (rank " +
                         std::to_string(qr.rank()) + " of " +
                         std::to_string(m) + ")");
  const Eigen::MatrixXd Q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd R1 =
      qr.matrixR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
  const Eigen::PermutationMatrix<Eigen::Dynamic> P = qr.colsPermutation();

  // A' P = Q R, so A c = b becomes R1' (Q1' c) = P' b; the least-norm
  // solution lies in range(Q1).
  auto solve_least_norm = [&](const Eigen::VectorXd& rhs) {
    const Eigen::VectorXd y =
        R1.transpose().triangularView<Eigen::Lower>().solve(
            P.transpose() * rhs);
    return Eigen::VectorXd(Q.leftCols(m) * y);
  };

  NullspaceChart chart;
  chart.particular = solve_least_norm(b);
  chart.particular += solve_least_norm(b - A * chart.particular);
  chart.nullspace = Q.rightCols(n - m);

  if (!chart.particular.allFinite() ||
      (A * chart.particular - b).lpNorm<Eigen::Infinity>() >= 1e-8)
    throw RankDeficiency("particular solution failed to reach tolerance");
  return chart;
}

std::pair<PiecewiseTrajectory, PlanReport> plan(const WaypointSet& wps,
                                                double v_avg,
                                                const TrackNetModel* model,
                                                const PlanOptions& opts) {
  opts.validate();
  const Eigen::VectorXd durations = time_allocation(wps, v_avg);
  const PiecewiseTrajectory ms = solve_minsnap(wps, durations, 7);

  if (model != nullptr) {
    model->validate();
    if (model->input_dim() != ms.coefficients.size())
      throw DimensionMismatch(
          "model input " + std::to_string(model->input_dim()) +
          " != coefficient count " + std::to_string(ms.coefficients.size()));
  }

  const QpSystem qp = build_qp_scaled(wps, durations, 7);
  const Eigen::VectorXd d_scale = basis_scale(durations, 7);
  const NullspaceChart chart = nullspace_chart(qp.A, qp.b);
  Objective obj{qp.H, chart, model, opts.lambda};

  const Eigen::VectorXd c_hat_ms = ms.coefficients.cwiseProduct(d_scale);
  if (model != nullptr) {
    obj.model_map = feature_map(durations, 7) *
                    d_scale.cwiseInverse().asDiagonal();
    if (std::isfinite(opts.trust_radius)) {
      obj.trust_w = Eigen::VectorXd::Zero(model->sigma.size());
      for (int j = 0; j < model->sigma.size(); ++j)
        if (model->sigma[j] < kDisabledSigma)
          obj.trust_w[j] = 1.0 / model->sigma[j];
      obj.trust_center = obj.features(c_hat_ms);
      obj.trust_radius = opts.trust_radius;
      const auto d_inv = d_scale.cwiseInverse().asDiagonal();
      obj.energy_Q = d_inv * accel_energy_form(durations, 7) * d_inv;
      obj.energy_cap = obj.accel_energy(c_hat_ms);
    }
  }
  const Eigen::VectorXd z0 =
      chart.nullspace.transpose() * (c_hat_ms - chart.particular);

  PlanReport report;
  PiecewiseTrajectory out = ms;
  try {
    std::tie(report.initial_snap, report.initial_penalty) =
        obj.split_value(z0);
    DescentResult best = descend(obj, z0, opts);
    report.iterations = best.iterations;

    if (opts.multistart > 0) {
      Rng rng(opts.multistart_seed);
      const double sigma =
          0.1 * (1.0 + z0.norm() / std::sqrt(std::max(1, (int)z0.size())));
      for (int k = 0; k < opts.multistart; ++k) {
        Eigen::VectorXd zk = z0;
        for (int i = 0; i < zk.size(); ++i) zk[i] += sigma * rng.normal();
        try {
          DescentResult r = descend(obj, std::move(zk), opts);
          report.iterations += r.iterations;
          if (r.value < best.value) best = std::move(r);
        } catch (const NonFiniteObjective&) {
          // a diverging restart forfeits; the base start stands
        }
      }
    }

    std::tie(report.final_snap, report.final_penalty) =
        obj.split_value(best.z);
    out.coefficients = obj.coeffs(best.z).cwiseQuotient(d_scale);
  } catch (const NonFiniteObjective&) {
    if (!opts.fallback_to_minsnap) throw;
    report.fallback = true;
    report.final_snap = report.initial_snap = snap_cost(ms);
    report.final_penalty = report.initial_penalty = 0.0;
    out = ms;
  }
  return {std::move(out), report};
}

}  // namespace qlcd
