#include "qlcd/evaluate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "qlcd/errors.hpp"

namespace qlcd {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_row(const TaskEval& r) {
  std::ostringstream out;
  out << r.task_seed << "," << r.planner << "," << fmt(r.max_error_m) << ","
      << (r.crashed ? 1 : 0) << "," << fmt(r.label_pred) << ","
      << fmt(r.snap_cost) << "," << fmt(r.sat_fraction);
  return out.str();
}

}  // namespace

bool classify_crash(double max_error, double threshold) {
  return max_error > threshold;
}

namespace {

TaskEval run_eval_task(const PlannerSpec& planner, const EvalConfig& config,
                       int i) {
  const std::uint64_t seed = task_seed(config.seed, kEvalStream, i);
  TaskEval row;
  row.task_seed = seed;
  row.planner = planner.name();
  try {
    Rng rng(seed);
    const WaypointSet wps = sample_waypoints(rng, config.domain);
    PiecewiseTrajectory traj;
    if (planner.kind == PlannerSpec::Kind::MinSnap) {
      traj = solve_minsnap(wps, config.v_avg);
    } else {
      traj = plan(wps, config.v_avg, planner.model, planner.options).first;
    }
    Rng roll_rng(mix64(seed, kRolloutStream));
    const RolloutResult res =
        rollout_cost(traj, config.preset, config.rollout, &roll_rng);
    row.max_error_m = res.max_error;
    row.crashed = classify_crash(res.max_error, config.rollout.crash_threshold);
    row.sat_fraction = res.sat_fraction;
    row.snap_cost = snap_cost(traj);
    row.label_pred =
        planner.model != nullptr
            ? forward(*planner.model,
                      feature_map(traj.durations, traj.order) *
                          traj.coefficients)
            : kNan;
  } catch (const std::exception&) {
    // Planner or rollout failure: scored as a crash.
    row.crashed = true;
    row.max_error_m = std::nextafter(config.rollout.crash_threshold,
                                     std::numeric_limits<double>::infinity());
    row.label_pred = kNan;
    row.snap_cost = kNan;
    row.sat_fraction = 0.0;
  }
  return row;
}

}  // namespace

EvalResult evaluate(const PlannerSpec& planner, const EvalConfig& config) {
  if (config.tasks < 1) throw DimensionMismatch("evaluation needs >= 1 task");
  if (config.workers < 1) throw DimensionMismatch("evaluation workers >= 1");
  config.domain.validate();
  config.rollout.validate();

  // Rows land at their task index, so output is identical for any
  // worker count.
  std::vector<TaskEval> rows(config.tasks);
  std::atomic<int> next{0};
  auto drain = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= config.tasks) return;
      rows[i] = run_eval_task(planner, config, i);
    }
  };
  if (config.workers == 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
  }

  EvalResult result;
  result.planner = planner.name();
  result.tasks = config.tasks;
  double err_sum = 0.0, sat_sum = 0.0, err_max = 0.0;
  int ok_count = 0;
  for (const auto& row : rows) {
    if (row.crashed) {
      ++result.crashes;
    } else {
      err_sum += row.max_error_m;
      err_max = std::max(err_max, row.max_error_m);
      ++ok_count;
    }
    sat_sum += row.sat_fraction;
  }
  result.rows = std::move(rows);
  result.crash_rate = 100.0 * result.crashes / result.tasks;
  result.mean_error = ok_count > 0 ? err_sum / ok_count : kNan;
  result.max_error = ok_count > 0 ? err_max : kNan;
  result.mean_sat = sat_sum / result.tasks;
  return result;
}

void write_eval_csv(const std::vector<TaskEval>& rows,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write eval CSV " + path.string());
  out << "task_seed,planner,max_error_m,crashed,label_pred,snap_cost,"
         "sat_fraction\n";
  for (const auto& r : rows) out << fmt_row(r) << "\n";
  if (!out) throw IoFailure("write failed for " + path.string());
}

std::vector<TaskEval> read_eval_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open eval CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("task_seed,planner,max_error_m", 0) != 0)
    throw ShapeCorruption("eval CSV " + path.string() + ": bad header");
  std::vector<TaskEval> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw ShapeCorruption("eval CSV " + path.string() + ":" +
                            std::to_string(lineno) + ": expected 7 fields");
    TaskEval r;
    try {
      r.task_seed = std::stoull(fields[0]);
      r.planner = fields[1];
      r.max_error_m = std::stod(fields[2]);
      r.crashed = std::stod(fields[3]) != 0.0;
      r.label_pred = std::stod(fields[4]);
      r.snap_cost = std::stod(fields[5]);
      r.sat_fraction = std::stod(fields[6]);
    } catch (const std::invalid_argument&) {
      throw ShapeCorruption("eval CSV " + path.string() + ":" +
                            std::to_string(lineno) + ": bad numeric field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> drag_sweep(const SweepConfig& config,
                                 const std::filesystem::path& csv_path) {
  if (config.points < 2) throw DimensionMismatch("sweep needs >= 2 points");
  if (!config.retrain && config.shared_model == nullptr)
    throw DimensionMismatch("sweep without retraining needs a shared model");

  std::ofstream csv(csv_path);
  if (!csv) throw IoFailure("cannot write sweep CSV " + csv_path.string());
  csv << "d_x,d_y,d_z,planner,tasks,crashes,crash_rate,mean_error_m,"
         "max_error_m,mean_sat_fraction\n";
  csv.flush();
  auto emit = [&](const Eigen::Vector3d& drag, const EvalResult& r) {
    csv << fmt(drag.x()) << "," << fmt(drag.y()) << "," << fmt(drag.z()) << ","
        << r.planner << "," << r.tasks << "," << r.crashes << ","
        << fmt(r.crash_rate) << "," << fmt(r.mean_error) << ","
        << fmt(r.max_error) << "," << fmt(r.mean_sat) << "\n";
    csv.flush();  // interrupted sweeps keep completed rows
  };

  std::vector<SweepRow> out;
  for (int k = 0; k < config.points; ++k) {
    const double t = static_cast<double>(k) / (config.points - 1);
    const double d_xy =
        config.drag_xy_lo + t * (config.drag_xy_hi - config.drag_xy_lo);
    const double d_z =
        config.drag_z_lo + t * (config.drag_z_hi - config.drag_z_lo);
    const Eigen::Vector3d drag(d_xy, d_xy, d_z);

    TrackNetModel fresh;
    const TrackNetModel* model = config.shared_model;
    if (config.retrain) {
      CollectConfig cc = config.collect;
      cc.preset.params.drag = drag;
      cc.master_seed = mix64(config.collect.master_seed, 1000 + k);
      const auto records = collect(cc);
      const auto [X, y] = to_features(records);
      fresh = train(X, y, config.train).first;
      model = &fresh;
    }

    EvalConfig ec = config.eval;
    ec.preset.params.drag = drag;

    PlannerSpec baseline;
    baseline.kind = PlannerSpec::Kind::MinSnap;
    baseline.model = model;  // predictions only
    PlannerSpec lcd;
    lcd.kind = PlannerSpec::Kind::Lcd;
    lcd.model = model;
    lcd.options = config.plan_options;

    SweepRow row;
    row.drag = drag;
    row.minsnap = evaluate(baseline, ec);
    row.lcd = evaluate(lcd, ec);
    emit(drag, row.minsnap);
    emit(drag, row.lcd);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace qlcd
