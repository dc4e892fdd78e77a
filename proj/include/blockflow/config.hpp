#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "blockflow/bench.hpp"
#include "blockflow/cases.hpp"
#include "blockflow/exchange.hpp"
#include "blockflow/solver.hpp"

namespace blockflow {

struct RunConfig {
  std::string case_id = "inlet_ramp_2d";
  std::string grid_file;             // overrides the preset geometry when set
  std::string freestream = "airfoil";  // inlet | airfoil | wing, for grid files
  bool viscous = false;
  int level = 0;
  SchemeConfig scheme;
  int np = 1;
  int split_dims = 3;
  bool aggregation = false;
  ExchangeStrategy exchange;
  StopControl stop;
  std::string output = "blockflow_out";
  bool write_vtk = true;
  std::string scaling = "none";
  std::vector<int> scaling_np{1, 2, 4};
  long scaling_steps = 20;
  int scaling_repeats = 3;
  std::vector<int> order_levels;  // observed-order study for manufactured cases

  void validate() const {
    scheme.validate();
    if (np < 1) throw ConfigError("np must be at least 1");
    if (split_dims < 1 || split_dims > 3) throw ConfigError("split_dims must be 1, 2 or 3");
    if (level < 0) throw ConfigError("level must be non-negative");
    if (stop.max_steps < 0) throw ConfigError("max_steps must be non-negative");
    if (scaling != "none" && scaling != "strong" && scaling != "weak")
      throw ConfigError("scaling must be none, strong or weak");
    if (scaling_repeats < 3) throw ConfigError("scaling_repeats must be at least 3");
    for (int n : scaling_np)
      if (n < 1) throw ConfigError("scaling_np entries must be at least 1");
    if (freestream != "inlet" && freestream != "airfoil" && freestream != "wing")
      throw ConfigError("freestream must be inlet, airfoil or wing");
    if (!order_levels.empty() && order_levels.size() < 3) throw ConfigError("order_levels needs at least 3 levels");
  }
};

inline LimiterKind limiter_from_string(std::string_view s) {
  for (LimiterKind k : {LimiterKind::none, LimiterKind::van_leer, LimiterKind::van_albada, LimiterKind::minmod})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown limiter '" + std::string(s) + "'");
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("invalid value '" + v + "' for " + key);
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("invalid boolean '" + v + "' for " + key);
}

inline std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(trim(item), key));
  return out;
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, Field>>& config_fields() {
  using C = RunConfig;
  using S = const std::string&;
  static const std::vector<std::pair<std::string, Field>> f{
      {"case", {[](C& c, S v) { c.case_id = v; }, [](const C& c) { return c.case_id; }}},
      {"grid", {[](C& c, S v) { c.grid_file = v; }, [](const C& c) { return c.grid_file; }}},
      {"freestream", {[](C& c, S v) { c.freestream = v; }, [](const C& c) { return c.freestream; }}},
      {"physics",
       {[](C& c, S v) {
          if (v == "euler") c.viscous = false;
          else if (v == "laminar_ns") c.viscous = true;
          else throw ConfigError("physics must be euler or laminar_ns");
        },
        [](const C& c) { return std::string(c.viscous ? "laminar_ns" : "euler"); }}},
      {"level", {[](C& c, S v) { c.level = parse_number<int>(v, "level"); }, [](const C& c) { return std::to_string(c.level); }}},
      {"flux",
       {[](C& c, S v) {
          if (v == "roe") c.scheme.flux = FluxScheme::roe;
          else if (v == "van_leer") c.scheme.flux = FluxScheme::van_leer;
          else throw ConfigError("flux must be roe or van_leer");
        },
        [](const C& c) { return std::string(to_string(c.scheme.flux)); }}},
      {"epsilon", {[](C& c, S v) { c.scheme.epsilon = parse_number<double>(v, "epsilon"); },
                   [](const C& c) { return format_double(c.scheme.epsilon); }}},
      {"kappa", {[](C& c, S v) { c.scheme.kappa = parse_number<double>(v, "kappa"); },
                 [](const C& c) { return format_double(c.scheme.kappa); }}},
      {"limiter", {[](C& c, S v) { c.scheme.limiter = limiter_from_string(v); },
                   [](const C& c) { return std::string(to_string(c.scheme.limiter)); }}},
      {"rk_stages", {[](C& c, S v) { c.scheme.rk_stages = parse_number<int>(v, "rk_stages"); },
                     [](const C& c) { return std::to_string(c.scheme.rk_stages); }}},
      {"cfl", {[](C& c, S v) { c.scheme.cfl = parse_number<double>(v, "cfl"); },
               [](const C& c) { return format_double(c.scheme.cfl); }}},
      {"limiter_freeze_at", {[](C& c, S v) { c.scheme.limiter_freeze_at = parse_number<long>(v, "limiter_freeze_at"); },
                             [](const C& c) { return std::to_string(c.scheme.limiter_freeze_at); }}},
      {"entropy_fix", {[](C& c, S v) { c.scheme.entropy_fix = parse_number<double>(v, "entropy_fix"); },
                       [](const C& c) { return format_double(c.scheme.entropy_fix); }}},
      {"flux_overwrite", {[](C& c, S v) { c.scheme.flux_overwrite = parse_bool(v, "flux_overwrite"); },
                          [](const C& c) { return std::string(c.scheme.flux_overwrite ? "true" : "false"); }}},
      {"wall_temperature",
       {[](C& c, S v) {
          if (v == "adiabatic") c.scheme.wall_temperature.reset();
          else c.scheme.wall_temperature = parse_number<double>(v, "wall_temperature");
        },
        [](const C& c) { return c.scheme.wall_temperature ? format_double(*c.scheme.wall_temperature) : std::string("adiabatic"); }}},
      {"np", {[](C& c, S v) { c.np = parse_number<int>(v, "np"); }, [](const C& c) { return std::to_string(c.np); }}},
      {"split_dims", {[](C& c, S v) { c.split_dims = parse_number<int>(v, "split_dims"); },
                      [](const C& c) { return std::to_string(c.split_dims); }}},
      {"aggregation", {[](C& c, S v) { c.aggregation = parse_bool(v, "aggregation"); },
                       [](const C& c) { return std::string(c.aggregation ? "true" : "false"); }}},
      {"strategy",
       {[](C& c, S v) {
          if (v == "sliced") c.exchange.pack = PackStrategy::sliced;
          else if (v == "packed") c.exchange.pack = PackStrategy::packed;
          else throw ConfigError("strategy must be sliced or packed");
        },
        [](const C& c) { return std::string(to_string(c.exchange.pack)); }}},
      {"wait",
       {[](C& c, S v) {
          if (v == "per-block") c.exchange.wait = WaitPolicy::per_block;
          else if (v == "deferred") c.exchange.wait = WaitPolicy::deferred_all;
          else throw ConfigError("wait must be per-block or deferred");
        },
        [](const C& c) { return std::string(c.exchange.wait == WaitPolicy::per_block ? "per-block" : "deferred"); }}},
      {"transport",
       {[](C& c, S v) {
          if (v == "staged") c.exchange.transport = Transport::staged;
          else if (v == "direct") c.exchange.transport = Transport::direct;
          else throw ConfigError("transport must be staged or direct");
        },
        [](const C& c) { return std::string(to_string(c.exchange.transport)); }}},
      {"buffers",
       {[](C& c, S v) {
          if (v == "transient") c.exchange.buffers = BufferMode::transient;
          else if (v == "persistent") c.exchange.buffers = BufferMode::persistent;
          else throw ConfigError("buffers must be transient or persistent");
        },
        [](const C& c) { return std::string(to_string(c.exchange.buffers)); }}},
      {"reorder", {[](C& c, S v) { c.exchange.reorder = parse_bool(v, "reorder"); },
                   [](const C& c) { return std::string(c.exchange.reorder ? "true" : "false"); }}},
      {"max_steps", {[](C& c, S v) { c.stop.max_steps = parse_number<long>(v, "max_steps"); },
                     [](const C& c) { return std::to_string(c.stop.max_steps); }}},
      {"relative_target", {[](C& c, S v) { c.stop.relative_target = parse_number<double>(v, "relative_target"); },
                           [](const C& c) { return format_double(c.stop.relative_target); }}},
      {"absolute_target", {[](C& c, S v) { c.stop.absolute_target = parse_number<double>(v, "absolute_target"); },
                           [](const C& c) { return format_double(c.stop.absolute_target); }}},
      {"output", {[](C& c, S v) { c.output = v; }, [](const C& c) { return c.output; }}},
      {"write_vtk", {[](C& c, S v) { c.write_vtk = parse_bool(v, "write_vtk"); },
                     [](const C& c) { return std::string(c.write_vtk ? "true" : "false"); }}},
      {"scaling", {[](C& c, S v) { c.scaling = v; }, [](const C& c) { return c.scaling; }}},
      {"scaling_np", {[](C& c, S v) { c.scaling_np = parse_int_list(v, "scaling_np"); },
                      [](const C& c) { return join(c.scaling_np); }}},
      {"scaling_steps", {[](C& c, S v) { c.scaling_steps = parse_number<long>(v, "scaling_steps"); },
                         [](const C& c) { return std::to_string(c.scaling_steps); }}},
      {"scaling_repeats", {[](C& c, S v) { c.scaling_repeats = parse_number<int>(v, "scaling_repeats"); },
                           [](const C& c) { return std::to_string(c.scaling_repeats); }}},
      {"order_levels", {[](C& c, S v) { c.order_levels = parse_int_list(v, "order_levels"); },
                        [](const C& c) { return join(c.order_levels); }}},
  };
  return f;
}

}  // namespace detail

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : detail::config_fields())
    if (k == key) {
      f.set(c, value);
      return;
    }
  throw ConfigError("unknown key '" + key + "'");
}

// `key = value` lines; '#' starts a comment.
inline RunConfig parse_config(std::istream& is, const std::string& source = "config") {
  RunConfig c;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(n) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(is, path);
}

inline std::string dump_config(const RunConfig& c) {
  std::string out;
  for (const auto& [k, f] : detail::config_fields()) out += k + " = " + f.get(c) + "\n";
  return out;
}

inline std::string config_help() {
  std::string out;
  const RunConfig defaults;
  for (const auto& [k, f] : detail::config_fields()) out += "  " + k + " (default: " + f.get(defaults) + ")\n";
  return out;
}

inline CaseSetup build_case(const RunConfig& rc) {
  if (rc.grid_file.empty()) return make_case(rc.case_id, rc.level, rc.viscous);
  CaseSetup c;
  c.name = rc.grid_file;
  c.viscous = rc.viscous;
  c.grid = load_grid(rc.grid_file);
  validate_boundaries(c.grid);
  const FreestreamSpec fs = rc.freestream == "inlet" ? kInletInflow
                            : rc.freestream == "wing" ? kWingFarfield
                                                      : kAirfoilFarfield;
  c.free = freestream(fs.mach, fs.p, fs.T, fs.alpha_deg, c.gas, fs.lift_axis);
  return c;
}

inline SchemeConfig scheme_for(const RunConfig& rc) {
  SchemeConfig s = rc.scheme;
  s.viscous = rc.viscous;
  return s;
}

}  // namespace blockflow
