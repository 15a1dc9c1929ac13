#include "qlcd/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "qlcd/errors.hpp"
#include "qlcd/so3.hpp"

namespace qlcd {

void RolloutConfig::validate() const {
  if (!(control_dt > 0.0)) throw DimensionMismatch("control_dt must be > 0");
  if (substeps < 1) throw DimensionMismatch("substeps must be >= 1");
  if (settle_time < 0.0) throw DimensionMismatch("settle_time must be >= 0");
  if (!(crash_threshold > 0.0))
    throw DimensionMismatch("crash threshold must be > 0");
}

RolloutResult rollout_cost(const PiecewiseTrajectory& traj,
                           const VehiclePreset& preset,
                           const RolloutConfig& config, Rng* rng,
                           std::vector<RolloutSample>* trace) {
  config.validate();
  TrackingController controller(traj, preset);
  const double dt = config.control_dt;
  const double total_time = controller.duration() + config.settle_time;
  const int ticks = static_cast<int>(std::ceil(total_time / dt - 1e-9));

  QuadState state = hover_state(preset.params);
  state.position = controller.reference(0.0).position;

  RolloutResult out;
  const double thr2 = config.crash_threshold * config.crash_threshold;
  int saturated_ticks = 0;
  int executed = 0;
  for (int k = 0; k < ticks; ++k) {
    const double t = k * dt;
    const FlatReference ref = controller.reference(t);
    const double pos_err = (state.position - ref.position).norm();
    const double yaw_err = wrap_angle(yaw_of(state.rotation) - ref.yaw);
    out.label += (pos_err * pos_err + yaw_err * yaw_err) * dt;
    out.max_error = std::max(out.max_error, pos_err);
    if (trace)
      trace->push_back({t, ref.position, ref.yaw, state.position,
                        yaw_of(state.rotation)});
    ++executed;
    if (pos_err > config.crash_threshold) {
      out.crashed = true;
      out.label += thr2 * dt * (ticks - 1 - k);
      break;
    }
    try {
      const BodyWrench cmd = controller.command(state, t);
      StepResult step_result =
          step(state, cmd, preset.params, dt, rng, config.substeps);
      state = step_result.state;
      if (step_result.saturated) ++saturated_ticks;
    } catch (const NonFiniteState&) {
      out.crashed = true;
      out.max_error =
          std::max(out.max_error,
                   std::nextafter(config.crash_threshold,
                                  std::numeric_limits<double>::infinity()));
      out.label += thr2 * dt * (ticks - 1 - k);
      break;
    } catch (const FlatnessSingularity&) {
      out.crashed = true;
      out.max_error =
          std::max(out.max_error,
                   std::nextafter(config.crash_threshold,
                                  std::numeric_limits<double>::infinity()));
      out.label += thr2 * dt * (ticks - 1 - k);
      break;
    }
  }
  out.sat_fraction =
      executed > 0 ? static_cast<double>(saturated_ticks) / executed : 0.0;
  return out;
}

void save_rollout_log(const std::vector<RolloutSample>& trace,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write rollout log " + path.string());
  out << "QLCD-ROLLOUT v1\n";
  char buf[64];
  for (const auto& s : trace) {
    const double vals[9] = {s.t,
                            s.ref_position.x(),
                            s.ref_position.y(),
                            s.ref_position.z(),
                            s.ref_yaw,
                            s.position.x(),
                            s.position.y(),
                            s.position.z(),
                            s.yaw};
    for (int i = 0; i < 9; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
      out << buf << (i == 8 ? "\n" : " ");
    }
  }
  if (!out) throw IoFailure("write failed for " + path.string());
}

std::vector<RolloutSample> load_rollout_log(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open rollout log " + path.string());
  std::string tag, version;
  if (!(in >> tag >> version) || tag != "QLCD-ROLLOUT")
    throw ShapeCorruption("rollout log " + path.string() + ": bad header");
  if (version != "v1")
    throw FormatVersionMismatch("rollout log " + path.string() +
                                ": unsupported version " + version);
  std::vector<RolloutSample> trace;
  double vals[9];
  while (in >> vals[0]) {
    for (int i = 1; i < 9; ++i)
      if (!(in >> vals[i]))
        throw ShapeCorruption("rollout log " + path.string() +
                              ": truncated row");
    RolloutSample s;
    s.t = vals[0];
    s.ref_position = {vals[1], vals[2], vals[3]};
    s.ref_yaw = vals[4];
    s.position = {vals[5], vals[6], vals[7]};
    s.yaw = vals[8];
    trace.push_back(s);
  }
  return trace;
}

}  // namespace qlcd
