// Command-line front end: data collection, network training, planning,
// rollout, crash-rate evaluation, drag sweeps, and SVG rendering.
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qlcd/dataset.hpp"
#include "qlcd/evaluate.hpp"
#include "qlcd/minsnap.hpp"
#include "qlcd/plan.hpp"
#include "qlcd/quad_params.hpp"
#include "qlcd/rollout.hpp"
#include "qlcd/svg_plot.hpp"
#include "qlcd/tracknet.hpp"
#include "qlcd/trajectory.hpp"

namespace {

using namespace qlcd;

constexpr const char* kSynopsis =
    R"(usage: qlcd <command> [options]

commands:
  collect   sample tasks, plan min-snap, roll out, write a dataset
  train     fit the tracking-cost network on a dataset
  plan      plan a trajectory through a waypoint file
  rollout   simulate a trajectory file and write a tick log
  eval      evaluate a planner's crash rate over sampled tasks
  sweep     paired planner comparison across a drag-coefficient sweep
  plot      render trajectory / rollout / eval files to SVG

run `qlcd <command> --help` for options)";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Eigen::Vector3d parse_drag(const std::string& s) {
  Eigen::Vector3d d;
  char tail;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &d.x(), &d.y(), &d.z(),
                  &tail) != 3)
    throw UsageError("--drag expects dx,dy,dz (got '" + s + "')");
  return d;
}

VehiclePreset resolve_preset(const std::string& params_file,
                             const std::vector<std::string>& sets) {
  VehiclePreset p = make_preset("crazyflie-default");
  if (!params_file.empty()) p = load_preset_file(params_file, p);
  if (!sets.empty()) {
    Overrides ov;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw UsageError("--set expects key=value (got '" + kv + "')");
      try {
        ov.emplace_back(kv.substr(0, eq), std::stod(kv.substr(eq + 1)));
      } catch (const std::invalid_argument&) {
        throw UsageError("--set value is not a number in '" + kv + "'");
      }
    }
    p = apply_overrides(p, ov);
  }
  return p;
}

int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

struct CollectArgs {
  int tasks = 5000;
  std::uint64_t seed = 1;
  double vavg = 2.0;
  std::string drag, out, params;
  std::vector<std::string> sets;
  int workers = default_workers();
};

struct TrainArgs {
  std::string data, out;
  std::uint64_t seed = 1;
  int epochs = 200;
  double decay = 1e-4;
  double val_fraction = 0.2;
};

struct PlanArgs {
  std::string waypoints, model, out;
  double lambda = 1.0;
  double trust = 2.0;
  double vavg = 2.0;
};

struct RolloutArgs {
  std::string traj, out, params;
  std::vector<std::string> sets;
  std::uint64_t seed = 1;
};

struct EvalArgs {
  std::string planner = "minsnap";
  std::string model, drag, out, params;
  std::vector<std::string> sets;
  int tasks = 50;
  std::uint64_t seed = 1;
  double vavg = 2.0;
  double lambda = 1.0;
  double trust = 2.0;
  int workers = default_workers();
};

struct SweepArgs {
  int points = 5;
  bool no_retrain = false;
  std::string model, out, params;
  std::vector<std::string> sets;
  int tasks = 50;
  int collect_tasks = 5000;
  std::uint64_t seed = 1;
  double vavg = 2.0;
  double lambda = 1.0;
  double trust = 2.0;
  int workers = default_workers();
};

struct PlotArgs {
  std::string traj, rollout, eval, svg;
  double threshold = 1.5;
};

int run_collect(const CollectArgs& a) {
  CollectConfig cc;
  cc.tasks = a.tasks;
  cc.master_seed = a.seed;
  cc.v_avg = a.vavg;
  cc.preset = resolve_preset(a.params, a.sets);
  cc.workers = a.workers;
  if (!a.drag.empty()) cc.preset.params.drag = parse_drag(a.drag);
  const auto records = collect(cc);
  save_dataset(records, 7, cc.domain.waypoints - 1, a.out);
  int skipped = 0, crashes = 0;
  for (const auto& r : records) {
    skipped += r.skipped ? 1 : 0;
    crashes += (!r.skipped && r.crashed) ? 1 : 0;
  }
  std::cout << "collected " << records.size() << " tasks (" << skipped
            << " skipped, " << crashes << " crashed) -> " << a.out << "\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  const auto records = load_dataset(a.data);
  const auto [X, y] = to_features(records);
  TrainConfig tc;
  tc.seed = a.seed;
  tc.epochs = a.epochs;
  tc.weight_decay = a.decay;
  tc.validation_fraction = a.val_fraction;
  const auto [model, report] = train(X, y, tc);
  save_model(model, a.out);
  std::cout << "trained on " << X.rows() << " samples ("
            << report.train_indices.size() << " train / "
            << report.val_indices.size() << " val)\n"
            << "final train loss " << report.train_loss.back()
            << ", val loss " << report.val_loss.back() << ", val Spearman "
            << report.val_spearman << "\n"
            << "model -> " << a.out << "\n";
  return 0;
}

int run_plan(const PlanArgs& a) {
  const WaypointSet wps = load_waypoints(a.waypoints);
  TrackNetModel model;
  const TrackNetModel* model_ptr = nullptr;
  if (!a.model.empty()) {
    model = load_model(a.model);
    model_ptr = &model;
  }
  PlanOptions po;
  po.lambda = a.lambda;
  po.trust_radius = a.trust;
  const auto [traj, report] = plan(wps, a.vavg, model_ptr, po);
  save_trajectory(traj, a.out);
  std::cout << "planned " << traj.segments << " segments, "
            << traj.total_duration() << " s total\n"
            << "snap " << report.initial_snap << " -> " << report.final_snap
            << ", penalty " << report.initial_penalty << " -> "
            << report.final_penalty << " (" << report.iterations
            << " iterations" << (report.fallback ? ", fallback" : "")
            << ")\ntrajectory -> " << a.out << "\n";
  return 0;
}

int run_rollout(const RolloutArgs& a) {
  const PiecewiseTrajectory traj = load_trajectory(a.traj);
  const VehiclePreset preset = resolve_preset(a.params, a.sets);
  RolloutConfig rc;
  Rng rng(a.seed);
  std::vector<RolloutSample> trace;
  const RolloutResult res = rollout_cost(traj, preset, rc, &rng, &trace);
  if (!a.out.empty()) save_rollout_log(trace, a.out);
  std::cout << "label " << res.label << ", max error " << res.max_error
            << " m, " << (res.crashed ? "crashed" : "completed")
            << ", saturation fraction " << res.sat_fraction << "\n";
  if (!a.out.empty()) std::cout << "log -> " << a.out << "\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  PlannerSpec spec;
  TrackNetModel model;
  if (a.planner == "minsnap") {
    spec.kind = PlannerSpec::Kind::MinSnap;
  } else if (a.planner == "lcd") {
    spec.kind = PlannerSpec::Kind::Lcd;
  } else {
    throw UsageError("--planner must be minsnap or lcd (got '" + a.planner +
                     "')");
  }
  if (!a.model.empty()) {
    model = load_model(a.model);
    spec.model = &model;
  } else if (spec.kind == PlannerSpec::Kind::Lcd) {
    throw UsageError("--planner lcd requires --model");
  }
  spec.options.lambda = a.lambda;
  spec.options.trust_radius = a.trust;

  EvalConfig ec;
  ec.tasks = a.tasks;
  ec.seed = a.seed;
  ec.v_avg = a.vavg;
  ec.preset = resolve_preset(a.params, a.sets);
  ec.workers = a.workers;
  if (!a.drag.empty()) ec.preset.params.drag = parse_drag(a.drag);

  const EvalResult r = evaluate(spec, ec);
  if (!a.out.empty()) write_eval_csv(r.rows, a.out);
  std::printf(
      "planner=%s tasks=%d crashes=%d crash_rate=%.1f%% mean_error=%.4g m "
      "max_error=%.4g m mean_sat=%.3f\n",
      r.planner.c_str(), r.tasks, r.crashes, r.crash_rate, r.mean_error,
      r.max_error, r.mean_sat);
  if (!a.out.empty()) std::cout << "per-task rows -> " << a.out << "\n";
  return 0;
}

int run_sweep(const SweepArgs& a) {
  SweepConfig sc;
  sc.points = a.points;
  sc.retrain = !a.no_retrain;
  TrackNetModel shared;
  if (a.no_retrain) {
    if (a.model.empty()) throw UsageError("--no-retrain requires --model");
    shared = load_model(a.model);
    sc.shared_model = &shared;
  }
  const VehiclePreset preset = resolve_preset(a.params, a.sets);
  sc.collect.tasks = a.collect_tasks;
  sc.collect.master_seed = a.seed;
  sc.collect.v_avg = a.vavg;
  sc.collect.preset = preset;
  sc.collect.workers = a.workers;
  sc.train.seed = a.seed;
  sc.eval.tasks = a.tasks;
  sc.eval.seed = a.seed;
  sc.eval.v_avg = a.vavg;
  sc.eval.preset = preset;
  sc.eval.workers = a.workers;
  sc.plan_options.lambda = a.lambda;
  sc.plan_options.trust_radius = a.trust;

  const auto rows = drag_sweep(sc, a.out);
  for (const auto& row : rows) {
    std::printf("drag=(%.4g, %.4g, %.4g): %s %.1f%%  %s %.1f%%\n",
                row.drag.x(), row.drag.y(), row.drag.z(),
                row.minsnap.planner.c_str(), row.minsnap.crash_rate,
                row.lcd.planner.c_str(), row.lcd.crash_rate);
  }
  std::cout << "sweep CSV -> " << a.out << "\n";
  return 0;
}

int run_plot(const PlotArgs& a) {
  std::string svg;
  if (!a.traj.empty()) {
    const PiecewiseTrajectory traj = load_trajectory(a.traj);
    std::vector<RolloutSample> trace;
    const std::vector<RolloutSample>* trace_ptr = nullptr;
    if (!a.rollout.empty()) {
      trace = load_rollout_log(a.rollout);
      trace_ptr = &trace;
    }
    svg = render_flight_svg(traj, trace_ptr);
  } else if (!a.eval.empty()) {
    svg = render_eval_svg(read_eval_csv(a.eval), a.threshold);
  } else {
    throw UsageError("plot needs --traj or --eval");
  }
  write_svg(svg, a.svg);
  std::cout << "SVG -> " << a.svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadrotor layered planning/control pipeline"};
  app.require_subcommand(1);

  CollectArgs ca;
  auto* collect_cmd =
      app.add_subcommand("collect", "collect a labeled rollout dataset");
  collect_cmd->add_option("--tasks", ca.tasks, "number of tasks");
  collect_cmd->add_option("--seed", ca.seed, "master seed");
  collect_cmd->add_option("--vavg", ca.vavg, "average speed for timing [m/s]");
  collect_cmd->add_option("--drag", ca.drag, "drag coefficients dx,dy,dz");
  collect_cmd->add_option("--out", ca.out, "dataset file")->required();
  collect_cmd->add_option("--workers", ca.workers, "worker threads");
  collect_cmd->add_option("--params", ca.params, "vehicle preset file");
  collect_cmd->add_option("--set", ca.sets, "override key=value (repeatable)");

  TrainArgs ta;
  auto* train_cmd =
      app.add_subcommand("train", "train the tracking-cost network");
  train_cmd->add_option("--data", ta.data, "dataset file")->required();
  train_cmd->add_option("--out", ta.out, "model file")->required();
  train_cmd->add_option("--seed", ta.seed, "training seed");
  train_cmd->add_option("--epochs", ta.epochs, "training epochs");
  train_cmd->add_option("--decay", ta.decay, "L2 weight decay");
  train_cmd->add_option("--val-fraction", ta.val_fraction,
                        "validation fraction");

  PlanArgs pa;
  auto* plan_cmd =
      app.add_subcommand("plan", "plan a trajectory through waypoints");
  plan_cmd->add_option("--waypoints", pa.waypoints, "waypoint file")
      ->required();
  plan_cmd->add_option("--model", pa.model, "tracking-cost model file");
  plan_cmd->add_option("--lambda", pa.lambda, "penalty weight");
  plan_cmd->add_option("--trust", pa.trust,
                       "descent trust radius in training sigmas (inf = off)");
  plan_cmd->add_option("--vavg", pa.vavg, "average speed for timing [m/s]");
  plan_cmd->add_option("--out", pa.out, "trajectory file")->required();

  RolloutArgs ra;
  auto* rollout_cmd =
      app.add_subcommand("rollout", "simulate a trajectory file");
  rollout_cmd->add_option("--traj", ra.traj, "trajectory file")->required();
  rollout_cmd->add_option("--out", ra.out, "tick log file");
  rollout_cmd->add_option("--seed", ra.seed, "motor-noise seed");
  rollout_cmd->add_option("--params", ra.params, "vehicle preset file");
  rollout_cmd->add_option("--set", ra.sets, "override key=value (repeatable)");

  EvalArgs ea;
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a planner's crash rate");
  eval_cmd->add_option("--planner", ea.planner, "minsnap or lcd");
  eval_cmd->add_option("--model", ea.model, "tracking-cost model file");
  eval_cmd->add_option("--tasks", ea.tasks, "number of tasks");
  eval_cmd->add_option("--seed", ea.seed, "evaluation seed");
  eval_cmd->add_option("--vavg", ea.vavg, "average speed for timing [m/s]");
  eval_cmd->add_option("--lambda", ea.lambda, "penalty weight (lcd)");
  eval_cmd->add_option("--trust", ea.trust,
                       "descent trust radius in training sigmas (inf = off)");
  eval_cmd->add_option("--drag", ea.drag, "drag coefficients dx,dy,dz");
  eval_cmd->add_option("--out", ea.out, "per-task CSV file");
  eval_cmd->add_option("--workers", ea.workers, "worker threads");
  eval_cmd->add_option("--params", ea.params, "vehicle preset file");
  eval_cmd->add_option("--set", ea.sets, "override key=value (repeatable)");

  SweepArgs sa;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "paired comparison across drag settings");
  sweep_cmd->add_option("--points", sa.points, "number of drag settings");
  sweep_cmd->add_flag("--no-retrain", sa.no_retrain,
                      "reuse one model across settings");
  sweep_cmd->add_option("--model", sa.model, "shared model (--no-retrain)");
  sweep_cmd->add_option("--tasks", sa.tasks, "evaluation tasks per setting");
  sweep_cmd->add_option("--collect-tasks", sa.collect_tasks,
                        "collection tasks per setting");
  sweep_cmd->add_option("--seed", sa.seed, "master seed");
  sweep_cmd->add_option("--vavg", sa.vavg, "average speed for timing [m/s]");
  sweep_cmd->add_option("--lambda", sa.lambda, "penalty weight (lcd)");
  sweep_cmd->add_option("--trust", sa.trust,
                        "descent trust radius in training sigmas (inf = off)");
  sweep_cmd->add_option("--out", sa.out, "sweep CSV file")->required();
  sweep_cmd->add_option("--workers", sa.workers, "worker threads");
  sweep_cmd->add_option("--params", sa.params, "vehicle preset file");
  sweep_cmd->add_option("--set", sa.sets, "override key=value (repeatable)");

  PlotArgs pla;
  auto* plot_cmd = app.add_subcommand("plot", "render artifacts to SVG");
  plot_cmd->add_option("--traj", pla.traj, "trajectory file");
  plot_cmd->add_option("--rollout", pla.rollout, "rollout tick log");
  plot_cmd->add_option("--eval", pla.eval, "per-task eval CSV");
  plot_cmd->add_option("--threshold", pla.threshold, "crash threshold [m]");
  plot_cmd->add_option("--svg", pla.svg, "output SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << kSynopsis << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(collect_cmd)) return run_collect(ca);
    if (app.got_subcommand(train_cmd)) return run_train(ta);
    if (app.got_subcommand(plan_cmd)) return run_plan(pa);
    if (app.got_subcommand(rollout_cmd)) return run_rollout(ra);
    if (app.got_subcommand(eval_cmd)) return run_eval(ea);
    if (app.got_subcommand(sweep_cmd)) return run_sweep(sa);
    if (app.got_subcommand(plot_cmd)) return run_plot(pla);
    std::cerr << kSynopsis << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n\n" << kSynopsis << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
