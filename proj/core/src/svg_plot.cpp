#include "qlcd/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "qlcd/errors.hpp"

namespace qlcd {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else
      out += c;
  }
  return out;
}

// Oblique projection of a z-down world point; second component is
// screen-up (height above ground minus depth).
Eigen::Vector2d project_iso(const Eigen::Vector3d& p) {
  const double c = std::sqrt(3.0) / 2.0;
  return {c * (p.x() - p.y()), -p.z() - 0.5 * (p.x() + p.y())};
}

struct Bounds {
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  void add(double x, double y) {
    lo_x = std::min(lo_x, x);
    hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y);
    hi_y = std::max(hi_y, y);
  }
  void pad(double frac) {
    const double dx = std::max(hi_x - lo_x, 1e-9) * frac;
    const double dy = std::max(hi_y - lo_y, 1e-9) * frac;
    lo_x -= dx, hi_x += dx, lo_y -= dy, hi_y += dy;
  }
};

// Affine map from data coordinates into an SVG rectangle (y flipped).
struct Mapper {
  double sx = 1, sy = 1, ox = 0, oy = 0;

  static Mapper fit(const Bounds& b, double x0, double y0, double w, double h,
                    bool uniform) {
    Mapper m;
    const double dx = std::max(b.hi_x - b.lo_x, 1e-12);
    const double dy = std::max(b.hi_y - b.lo_y, 1e-12);
    m.sx = w / dx;
    m.sy = h / dy;
    if (uniform) m.sx = m.sy = std::min(m.sx, m.sy);
    m.ox = x0 + 0.5 * (w - m.sx * dx) - m.sx * b.lo_x;
    m.oy = y0 + 0.5 * (h - m.sy * dy) + m.sy * b.hi_y;
    return m;
  }
  double x(double v) const { return ox + sx * v; }
  double y(double v) const { return oy - sy * v; }
};

void polyline(std::string& svg, const std::vector<Eigen::Vector2d>& pts,
              const Mapper& m, const char* stroke, double width, bool dotted) {
  if (pts.size() < 2) return;
  svg += "<polyline fill=\"none\" stroke=\"";
  svg += stroke;
  svg += "\" stroke-width=\"" + num(width) + "\"";
  if (dotted) svg += " stroke-dasharray=\"2 4\"";
  svg += " points=\"";
  for (const auto& p : pts)
    svg += num(m.x(p.x())) + "," + num(m.y(p.y())) + " ";
  svg += "\"/>\n";
}

void circle(std::string& svg, double cx, double cy, double r,
            const char* fill) {
  svg += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" +
         num(r) + "\" fill=\"" + fill + "\"/>\n";
}

void text(std::string& svg, double x, double y, const std::string& s,
          int size = 12, const char* anchor = "start") {
  svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) +
         "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

void frame(std::string& svg, double x, double y, double w, double h) {
  svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
         "\" height=\"" + num(h) +
         "\" fill=\"none\" stroke=\"#aaa\" stroke-width=\"1\"/>\n";
}

// Per-segment sample times, knots included exactly so waypoint markers
// land on polyline vertices.
std::vector<double> sample_times(const PiecewiseTrajectory& traj,
                                 int per_segment) {
  std::vector<double> ts;
  double t0 = 0.0;
  for (double d : traj.durations) {
    for (int k = 0; k < per_segment; ++k)
      ts.push_back(t0 + d * k / per_segment);
    t0 += d;
  }
  ts.push_back(t0);
  return ts;
}

constexpr const char* kRefColor = "#888888";
constexpr const char* kExecColor = "#1f77b4";
constexpr const char* kWpColor = "#d62728";

}  // namespace

std::string render_flight_svg(const PiecewiseTrajectory& traj,
                              const std::vector<RolloutSample>* trace) {
  traj.validate();
  const auto ts = sample_times(traj, 100);
  std::vector<FlatReference> refs;
  refs.reserve(ts.size());
  for (double t : ts) refs.push_back(eval_reference(traj, t));

  std::vector<double> knots{0.0};
  for (double d : traj.durations) knots.push_back(knots.back() + d);
  std::vector<Eigen::Vector3d> wp_pos;
  for (double t : knots) wp_pos.push_back(eval_reference(traj, t).position);

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" "
      "height=\"600\" viewBox=\"0 0 900 600\">\n"
      "<rect width=\"900\" height=\"600\" fill=\"white\"/>\n";

  // Left pane: oblique 3D path.
  {
    std::vector<Eigen::Vector2d> ref2d, exe2d;
    Bounds b;
    for (const auto& r : refs) {
      ref2d.push_back(project_iso(r.position));
      b.add(ref2d.back().x(), ref2d.back().y());
    }
    if (trace != nullptr) {
      for (const auto& s : *trace) {
        exe2d.push_back(project_iso(s.position));
        b.add(exe2d.back().x(), exe2d.back().y());
      }
    }
    b.pad(0.08);
    const Mapper m = Mapper::fit(b, 30, 50, 400, 520, /*uniform=*/true);
    frame(svg, 30, 50, 400, 520);
    text(svg, 230, 40, "path (oblique projection)", 13, "middle");
    polyline(svg, ref2d, m, kRefColor, 1.5, /*dotted=*/true);
    polyline(svg, exe2d, m, kExecColor, 1.5, /*dotted=*/false);
    for (const auto& p : wp_pos) {
      const Eigen::Vector2d q = project_iso(p);
      circle(svg, m.x(q.x()), m.y(q.y()), 4, kWpColor);
    }
  }

  // Right pane: stacked x, y, z, psi series.
  const char* labels[4] = {"x [m]", "y [m]", "z [m]", "yaw [rad]"};
  for (int axis = 0; axis < 4; ++axis) {
    const double py = 50 + axis * 133;
    const double ph = 115;
    std::vector<Eigen::Vector2d> ref2d, exe2d;
    Bounds b;
    auto ref_val = [&](const FlatReference& r) {
      return axis < 3 ? r.position(axis) : r.yaw;
    };
    for (std::size_t i = 0; i < ts.size(); ++i) {
      ref2d.push_back({ts[i], ref_val(refs[i])});
      b.add(ts[i], ref_val(refs[i]));
    }
    if (trace != nullptr) {
      for (const auto& s : *trace) {
        const double v = axis < 3 ? s.position(axis) : s.yaw;
        exe2d.push_back({s.t, v});
        b.add(s.t, v);
      }
    }
    b.pad(0.08);
    const Mapper m = Mapper::fit(b, 480, py, 390, ph, /*uniform=*/false);
    frame(svg, 480, py, 390, ph);
    text(svg, 486, py + 14, labels[axis], 12);
    text(svg, 476, py + ph, num(b.lo_y), 10, "end");
    text(svg, 476, py + 10, num(b.hi_y), 10, "end");
    polyline(svg, ref2d, m, kRefColor, 1.2, /*dotted=*/true);
    polyline(svg, exe2d, m, kExecColor, 1.2, /*dotted=*/false);
    for (std::size_t k = 0; k < knots.size(); ++k) {
      const double v = axis < 3 ? wp_pos[k](axis)
                                : eval_reference(traj, knots[k]).yaw;
      circle(svg, m.x(knots[k]), m.y(v), 2.5, kWpColor);
    }
    if (axis == 3) {
      text(svg, 480, py + ph + 16, "t = 0 s", 10);
      text(svg, 870, py + ph + 16, "t = " + num(knots.back()) + " s", 10,
           "end");
    }
  }

  text(svg, 30, 592, "dotted: reference    solid: executed    circles: "
                     "waypoints", 11);
  svg += "</svg>\n";
  return svg;
}

std::string render_eval_svg(const std::vector<TaskEval>& rows,
                            double crash_threshold) {
  // Group by planner, keeping first-appearance order.
  std::vector<std::string> names;
  std::map<std::string, std::vector<const TaskEval*>> groups;
  for (const auto& r : rows) {
    if (groups.find(r.planner) == groups.end()) names.push_back(r.planner);
    groups[r.planner].push_back(&r);
  }

  const double y_max = 2.0 * crash_threshold;
  std::size_t n_tasks = 1;
  for (const auto& name : names)
    n_tasks = std::max(n_tasks, groups[name].size());

  const double px = 70, py = 40, pw = 800, ph = 400;
  Bounds b;
  b.add(-0.5, 0.0);
  b.add(n_tasks - 0.5, y_max);
  const Mapper m = Mapper::fit(b, px, py, pw, ph, /*uniform=*/false);

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" "
      "height=\"500\" viewBox=\"0 0 900 500\">\n"
      "<rect width=\"900\" height=\"500\" fill=\"white\"/>\n";
  frame(svg, px, py, pw, ph);
  text(svg, px + pw / 2, py - 10, "max tracking error by task", 13, "middle");
  text(svg, px + pw / 2, py + ph + 30, "task index", 11, "middle");

  for (double v : {0.0, crash_threshold, y_max}) {
    text(svg, px - 6, m.y(v) + 4, num(v) + " m", 10, "end");
  }
  svg += "<line x1=\"" + num(px) + "\" y1=\"" + num(m.y(crash_threshold)) +
         "\" x2=\"" + num(px + pw) + "\" y2=\"" + num(m.y(crash_threshold)) +
         "\" stroke=\"#444\" stroke-width=\"1\" "
         "stroke-dasharray=\"6 4\"/>\n";
  text(svg, px + pw - 4, m.y(crash_threshold) - 5, "crash threshold", 10,
       "end");

  const char* palette[4] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  for (std::size_t g = 0; g < names.size(); ++g) {
    const auto& pts = groups[names[g]];
    const char* color = palette[g % 4];
    int crashes = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i]->crashed) ++crashes;
      const double v = std::min(pts[i]->max_error_m, y_max);
      circle(svg, m.x(static_cast<double>(i)), m.y(v), 3, color);
    }
    char legend[128];
    std::snprintf(legend, sizeof legend, "%s: crash rate %.1f%% (%d/%zu)",
                  names[g].c_str(), pts.empty() ? 0.0
                                                : 100.0 * crashes / pts.size(),
                  crashes, pts.size());
    circle(svg, px + 12, py + ph + 50 + 16 * g, 4, color);
    text(svg, px + 22, py + ph + 54 + 16 * g, legend, 11);
  }
  svg += "</svg>\n";
  return svg;
}

void write_svg(const std::string& svg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write SVG " + path.string());
  out << svg;
  if (!out) throw IoFailure("write failed for " + path.string());
}

}  // namespace qlcd
