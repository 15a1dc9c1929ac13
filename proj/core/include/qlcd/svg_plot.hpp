#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qlcd/evaluate.hpp"
#include "qlcd/rollout.hpp"
#include "qlcd/trajectory.hpp"

namespace qlcd {

/// SVG figure for one flight: left pane is an oblique 3D projection of
/// the path, right pane stacks x, y, z, psi time series. The reference
/// is drawn dotted, the executed run (when a trace is given) solid, and
/// waypoints as circle markers on the reference.
std::string render_flight_svg(const PiecewiseTrajectory& traj,
                              const std::vector<RolloutSample>* trace);

/// Scatter of per-task max tracking error by planner, with the crash
/// threshold as a dashed line and per-planner crash rates annotated.
std::string render_eval_svg(const std::vector<TaskEval>& rows,
                            double crash_threshold);

void write_svg(const std::string& svg, const std::filesystem::path& path);

}  // namespace qlcd
