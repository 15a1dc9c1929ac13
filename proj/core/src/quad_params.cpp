#include "qlcd/quad_params.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qlcd/errors.hpp"

namespace qlcd {
namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }
bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

// All override/preset-file keys map onto a double slot.
double* slot(VehiclePreset& p, const std::string& key) {
  auto& q = p.params;
  auto& g = p.gains;
  if (key == "mass") return &q.mass;
  if (key == "gravity") return &q.gravity;
  if (key == "arm_length") return &q.arm_length;
  if (key == "k_f") return &q.k_f;
  if (key == "k_m") return &q.k_m;
  if (key == "omega_min") return &q.omega_min;
  if (key == "omega_max") return &q.omega_max;
  if (key == "tau_m") return &q.tau_m;
  if (key == "sigma_m") return &q.sigma_m;
  if (key == "j_xx") return &q.inertia.x();
  if (key == "j_yy") return &q.inertia.y();
  if (key == "j_zz") return &q.inertia.z();
  if (key == "d_x") return &q.drag.x();
  if (key == "d_y") return &q.drag.y();
  if (key == "d_z") return &q.drag.z();
  if (key == "k_x") return &g.k_x;
  if (key == "k_v") return &g.k_v;
  if (key == "k_R") return &g.k_R;
  if (key == "k_omega") return &g.k_omega;
  return nullptr;
}

constexpr const char* kKeyOrder[] = {
    "mass",      "j_xx", "j_yy",      "j_zz",      "gravity", "arm_length",
    "k_f",       "k_m",  "omega_min", "omega_max", "tau_m",   "sigma_m",
    "d_x",       "d_y",  "d_z",       "k_x",       "k_v",     "k_R",
    "k_omega"};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

std::optional<std::string> QuadParams::violation() const {
  if (!finite_positive(mass)) return "mass must be positive";
  for (int i = 0; i < 3; ++i)
    if (!finite_positive(inertia[i])) return "inertia must be positive";
  if (!finite_positive(gravity)) return "gravity must be positive";
  if (!finite_positive(arm_length)) return "arm_length must be positive";
  if (!finite_positive(k_f)) return "k_f must be positive";
  if (!finite_positive(k_m)) return "k_m must be positive";
  if (!finite_nonneg(omega_min)) return "omega_min must be non-negative";
  if (!std::isfinite(omega_max) || omega_max <= omega_min)
    return "omega_max must exceed omega_min";
  if (!finite_positive(tau_m)) return "tau_m must be positive";
  if (!finite_nonneg(sigma_m)) return "sigma_m must be non-negative";
  for (int i = 0; i < 3; ++i)
    if (!finite_nonneg(drag[i])) return "drag must be non-negative";
  // Hover must sit strictly inside the actuator range or no controller
  // can hold altitude.
  const double f_hover = mass * gravity / 4.0;
  const double f_max = k_f * omega_max * omega_max;
  if (f_hover >= f_max) return "hover thrust exceeds actuator limit";
  return std::nullopt;
}

std::optional<std::string> ControlGains::violation() const {
  if (!finite_positive(k_x)) return "k_x must be positive";
  if (!finite_positive(k_v)) return "k_v must be positive";
  if (!finite_positive(k_R)) return "k_R must be positive";
  if (!finite_positive(k_omega)) return "k_omega must be positive";
  return std::nullopt;
}

VehiclePreset make_preset(const std::string& name) {
  if (name == "crazyflie-default") {
    return VehiclePreset{};  // struct defaults are the preset
  }
  throw UnknownPreset("unknown preset '" + name + "'");
}

VehiclePreset apply_overrides(VehiclePreset base, const Overrides& overrides) {
  for (const auto& [key, value] : overrides) {
    double* s = slot(base, key);
    if (s == nullptr) throw InvalidOverride("unknown override key '" + key + "'");
    if (!std::isfinite(value))
      throw InvalidOverride("override '" + key + "' must be finite");
    *s = value;
  }
  if (auto why = base.params.violation())
    throw InvalidOverride("invalid parameters: " + *why);
  if (auto why = base.gains.violation())
    throw InvalidOverride("invalid gains: " + *why);
  return base;
}

QuadParams make_params(const std::string& preset, const Overrides& overrides) {
  return apply_overrides(make_preset(preset), overrides).params;
}

VehiclePreset load_preset_file(const std::filesystem::path& path,
                               const VehiclePreset& base) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open preset file " + path.string());
  Overrides overrides;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoFailure(path.string() + ":" + std::to_string(lineno) +
                      ": expected `name = value`");
    std::string key = trim(line.substr(0, eq));
    std::string value_str = trim(line.substr(eq + 1));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(value_str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value_str.size() || value_str.empty())
      throw IoFailure(path.string() + ":" + std::to_string(lineno) +
                      ": bad numeric value '" + value_str + "'");
    overrides.emplace_back(key, value);
  }
  try {
    return apply_overrides(base, overrides);
  } catch (const InvalidOverride& e) {
    throw IoFailure(path.string() + ": " + e.what());
  }
}

void save_preset_file(const VehiclePreset& preset,
                      const std::filesystem::path& path) {
  VehiclePreset copy = preset;  // slot() needs a mutable object
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write preset file " + path.string());
  char buf[64];
  for (const char* key : kKeyOrder) {
    std::snprintf(buf, sizeof buf, "%.17g", *slot(copy, key));
    out << key << " = " << buf << "\n";
  }
  if (!out) throw IoFailure("write failed for " + path.string());
}

}  // namespace qlcd
