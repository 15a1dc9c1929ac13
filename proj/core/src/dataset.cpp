#include "qlcd/dataset.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "qlcd/errors.hpp"
#include "qlcd/minsnap.hpp"

namespace qlcd {
namespace {

bool inside_box(const Eigen::Vector3d& p, const DomainConfig& d) {
  return (p.array() >= d.lo.array()).all() &&
         (p.array() <= d.hi.array()).all();
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

RolloutRecord run_task(std::uint64_t seed, const CollectConfig& config) {
  RolloutRecord rec;
  rec.seed = seed;
  rec.drag = config.preset.params.drag;
  try {
    Rng rng(seed);
    rec.waypoints = sample_waypoints(rng, config.domain);
    const Eigen::VectorXd durations =
        time_allocation(rec.waypoints, config.v_avg);
    const PiecewiseTrajectory traj =
        solve_minsnap(rec.waypoints, durations, 7);
    Rng roll_rng(mix64(seed, kRolloutStream));
    const RolloutResult res =
        rollout_cost(traj, config.preset, config.rollout, &roll_rng);
    rec.durations = traj.durations;
    rec.coefficients = traj.coefficients;
    rec.label = res.label;
    rec.max_error = res.max_error;
    rec.crashed = res.crashed;
  } catch (const std::exception&) {
    rec.skipped = true;
  }
  return rec;
}

}  // namespace

void DomainConfig::validate() const {
  if (!((hi.array() > lo.array()).all()))
    throw DimensionMismatch("domain box must have positive extent");
  if (!(spacing_min > 0.0) || !(spacing_max > spacing_min))
    throw DimensionMismatch("need 0 < spacing_min < spacing_max");
  if (waypoints < 2) throw DimensionMismatch("need >= 2 waypoints");
}

WaypointSet sample_waypoints(Rng& rng, const DomainConfig& config) {
  config.validate();
  WaypointSet wps;
  Eigen::Vector3d p;
  for (int a = 0; a < 3; ++a) p[a] = rng.uniform(config.lo[a], config.hi[a]);
  wps.positions.push_back(p);
  const double r3_lo = std::pow(config.spacing_min, 3);
  const double r3_hi = std::pow(config.spacing_max, 3);
  for (int w = 1; w < config.waypoints; ++w) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      // Draw order is part of the determinism contract: cos(polar),
      // azimuth, then the volume-uniform shell radius.
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Eigen::Vector3d dir(s * std::cos(phi), s * std::sin(phi), z);
      const double r = std::cbrt(r3_lo + rng.uniform() * (r3_hi - r3_lo));
      const Eigen::Vector3d cand = wps.positions.back() + r * dir;
      if (inside_box(cand, config)) {
        wps.positions.push_back(cand);
        placed = true;
      }
    }
    if (!placed)
      throw SamplingExhausted("no in-domain waypoint after 1000 attempts");
  }
  wps.yaws.assign(wps.positions.size(), 0.0);
  return wps;
}

void CollectConfig::validate() const {
  if (tasks < 0) throw DimensionMismatch("task count must be >= 0");
  if (workers < 1) throw DimensionMismatch("workers must be >= 1");
  if (!(v_avg > 0.0)) throw DimensionMismatch("v_avg must be > 0");
  domain.validate();
  rollout.validate();
  if (auto why = preset.params.violation())
    throw InvalidOverride("invalid parameters: " + *why);
  if (auto why = preset.gains.violation())
    throw InvalidOverride("invalid gains: " + *why);
}

std::vector<RolloutRecord> collect(const CollectConfig& config) {
  config.validate();
  std::vector<RolloutRecord> records(config.tasks);
  auto worker = [&](std::atomic<int>& next) {
    for (int i = next.fetch_add(1); i < config.tasks; i = next.fetch_add(1))
      records[i] = run_task(task_seed(config.master_seed, kCollectStream, i),
                            config);
  };
  if (config.workers == 1 || config.tasks <= 1) {
    std::atomic<int> next{0};
    worker(next);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int n_threads = std::min(config.workers, std::max(1, config.tasks));
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w)
      pool.emplace_back([&] { worker(next); });
    for (auto& th : pool) th.join();
  }
  return records;
}

void save_dataset(const std::vector<RolloutRecord>& records, int order,
                  int segments, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write dataset " + path.string());
  out << "QLCD-DATASET v1 n=" << order << " s=" << segments << "\n";
  for (const auto& rec : records) {
    if (rec.skipped) {
      out << "# skipped seed=" << rec.seed << "\n";
      continue;
    }
    std::vector<double> vals;
    for (const auto& p : rec.waypoints.positions)
      for (int a = 0; a < 3; ++a) vals.push_back(p[a]);
    for (double y : rec.waypoints.yaws) vals.push_back(y);
    for (int i = 0; i < rec.durations.size(); ++i)
      vals.push_back(rec.durations[i]);
    for (int i = 0; i < rec.coefficients.size(); ++i)
      vals.push_back(rec.coefficients[i]);
    vals.push_back(rec.label);
    vals.push_back(rec.max_error);
    vals.push_back(rec.crashed ? 1.0 : 0.0);
    for (int a = 0; a < 3; ++a) vals.push_back(rec.drag[a]);

    out << rec.seed;
    for (double v : vals) out << "," << format_value(v);
    out << "\n";
  }
  if (!out) throw IoFailure("write failed for " + path.string());
}

std::vector<RolloutRecord> load_dataset(const std::filesystem::path& path,
                                        int* order, int* segments) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open dataset " + path.string());
  std::string header;
  if (!std::getline(in, header))
    throw ShapeCorruption("dataset " + path.string() + ": empty file");
  std::istringstream hs(header);
  std::string tag, version, n_field, s_field;
  hs >> tag >> version >> n_field >> s_field;
  if (tag != "QLCD-DATASET" || n_field.rfind("n=", 0) != 0 ||
      s_field.rfind("s=", 0) != 0)
    throw ShapeCorruption("dataset " + path.string() + ": bad header");
  if (version != "v1")
    throw FormatVersionMismatch("dataset " + path.string() +
                                ": unsupported version " + version);
  const int n = std::stoi(n_field.substr(2));
  const int s = std::stoi(s_field.substr(2));
  if (n < 1 || s < 1)
    throw ShapeCorruption("dataset " + path.string() + ": bad n/s");
  if (order) *order = n;
  if (segments) *segments = s;

  const int w = s + 1;
  const std::size_t expected = 1 + 3 * w + w + s + 4 * s * (n + 1) + 3 + 3;
  std::vector<RolloutRecord> records;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string marker = "# skipped seed=";
      if (line.rfind(marker, 0) == 0) {
        RolloutRecord rec;
        rec.skipped = true;
        rec.seed = std::stoull(line.substr(marker.size()));
        records.push_back(std::move(rec));
      }
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() != expected)
      throw ShapeCorruption("dataset " + path.string() + ":" +
                            std::to_string(lineno) + ": expected " +
                            std::to_string(expected) + " fields, got " +
                            std::to_string(fields.size()));
    RolloutRecord rec;
    std::size_t f = 0;
    try {
      rec.seed = std::stoull(fields[f++]);
      rec.waypoints.positions.resize(w);
      for (int i = 0; i < w; ++i)
        for (int a = 0; a < 3; ++a)
          rec.waypoints.positions[i][a] = std::stod(fields[f++]);
      rec.waypoints.yaws.resize(w);
      for (int i = 0; i < w; ++i) rec.waypoints.yaws[i] = std::stod(fields[f++]);
      rec.durations.resize(s);
      for (int i = 0; i < s; ++i) rec.durations[i] = std::stod(fields[f++]);
      rec.coefficients.resize(4 * s * (n + 1));
      for (int i = 0; i < rec.coefficients.size(); ++i)
        rec.coefficients[i] = std::stod(fields[f++]);
      rec.label = std::stod(fields[f++]);
      rec.max_error = std::stod(fields[f++]);
      rec.crashed = std::stod(fields[f++]) != 0.0;
      for (int a = 0; a < 3; ++a) rec.drag[a] = std::stod(fields[f++]);
    } catch (const std::invalid_argument&) {
      throw ShapeCorruption("dataset " + path.string() + ":" +
                            std::to_string(lineno) + ": bad numeric field");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> to_features(
    const std::vector<RolloutRecord>& records) {
  std::vector<const RolloutRecord*> usable;
  for (const auto& r : records)
    if (!r.skipped) usable.push_back(&r);
  if (usable.empty()) throw InsufficientData("no usable records");
  const int d = static_cast<int>(usable.front()->coefficients.size());
  Eigen::MatrixXd X(usable.size(), d);
  Eigen::VectorXd y(usable.size());
  for (std::size_t i = 0; i < usable.size(); ++i) {
    if (usable[i]->coefficients.size() != d)
      throw DimensionMismatch("records have inconsistent coefficient sizes");
    // Model inputs are sampled velocity/acceleration/jerk values along
    // each segment (see feature_map): what actually saturates rotors and
    // crashes rollouts, in units that mean the same thing in every task.
    const int order = static_cast<int>(d / (4 * usable[i]->durations.size())) - 1;
    X.row(i) = (feature_map(usable[i]->durations, order) *
                usable[i]->coefficients)
                   .transpose();
    y[i] = usable[i]->label;
  }
  return {std::move(X), std::move(y)};
}

std::pair<std::vector<int>, std::vector<int>> split(int n, double fraction,
                                                    Rng& rng) {
  if (n < 2) throw InsufficientData("cannot split fewer than 2 records");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw DimensionMismatch("split fraction must be in (0, 1)");
  return split_indices(n, fraction, rng);
}

WaypointSet load_waypoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open waypoint file " + path.string());
  WaypointSet wps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x)) continue;  // blank line
    if (!(ss >> y >> z))
      throw ShapeCorruption(path.string() + ":" + std::to_string(lineno) +
                            ": expected `x y z [yaw]`");
    double yaw = 0.0;
    ss >> yaw;
    double extra;
    if (ss >> extra)
      throw ShapeCorruption(path.string() + ":" + std::to_string(lineno) +
                            ": too many fields");
    wps.positions.emplace_back(x, y, z);
    wps.yaws.push_back(yaw);
  }
  wps.validate();
  return wps;
}

void save_waypoints(const WaypointSet& wps,
                    const std::filesystem::path& path) {
  wps.validate();
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write waypoint file " + path.string());
  for (std::size_t i = 0; i < wps.positions.size(); ++i) {
    out << format_value(wps.positions[i].x()) << " "
        << format_value(wps.positions[i].y()) << " "
        << format_value(wps.positions[i].z()) << " "
        << format_value(wps.yaws[i]) << "\n";
  }
  if (!out) throw IoFailure("write failed for " + path.string());
}

}  // namespace qlcd
