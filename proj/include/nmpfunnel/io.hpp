#pragma once

// Scenario configuration as JSON (field names mirror ScenarioConfig) and
// trajectory CSV output.

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nmpfunnel/errors.hpp"
#include "nmpfunnel/sim.hpp"

namespace nmpfunnel {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::string_view where,
                                std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string(where) + ": unknown field '" + key + "'");
  }
}

inline void read(const json& j, std::string_view key, double& out) {
  if (auto it = j.find(key); it != j.end()) {
    if (!it->is_number()) throw ConfigError("field '" + std::string(key) + "' must be a number");
    out = it->get<double>();
  }
}

}  // namespace detail

/// Overlays the fields present in j onto cfg.  Unknown fields are rejected.
inline void apply_json(const json& j, ScenarioConfig& cfg) {
  using detail::read;
  detail::reject_unknown_keys(j, "config",
                              {"params", "x0", "ref", "funnels", "mode", "observer_gains",
                               "zeta0", "disturbance", "t_end", "integrator", "sample_step",
                               "quadrature_abs_tol"});
  if (auto it = j.find("params"); it != j.end()) {
    detail::reject_unknown_keys(*it, "params", {"m", "l", "c", "d", "s"});
    read(*it, "m", cfg.params.m);
    read(*it, "l", cfg.params.l);
    read(*it, "c", cfg.params.c);
    read(*it, "d", cfg.params.d);
    read(*it, "s", cfg.params.s);
  }
  if (auto it = j.find("x0"); it != j.end()) {
    detail::reject_unknown_keys(*it, "x0", {"alpha", "beta", "alpha_dot", "beta_dot"});
    read(*it, "alpha", cfg.x0.alpha);
    read(*it, "beta", cfg.x0.beta);
    read(*it, "alpha_dot", cfg.x0.alpha_dot);
    read(*it, "beta_dot", cfg.x0.beta_dot);
  }
  if (auto it = j.find("ref"); it != j.end()) {
    detail::reject_unknown_keys(*it, "ref", {"y0", "yf", "t0", "tf"});
    read(*it, "y0", cfg.ref.y0);
    read(*it, "yf", cfg.ref.yf);
    read(*it, "t0", cfg.ref.t0);
    read(*it, "tf", cfg.ref.tf);
  }
  if (auto it = j.find("funnels"); it != j.end()) {
    if (!it->is_array() || it->size() != 3) throw ConfigError("funnels: expected 3 entries");
    for (std::size_t i = 0; i < 3; ++i) {
      const json& f = (*it)[i];
      detail::reject_unknown_keys(f, "funnels[" + std::to_string(i) + "]", {"a", "b", "eps"});
      read(f, "a", cfg.funnels[i].a);
      read(f, "b", cfg.funnels[i].b);
      read(f, "eps", cfg.funnels[i].eps);
    }
  }
  if (auto it = j.find("mode"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("mode must be a string");
    cfg.mode = parse_mode(it->get<std::string>());
  }
  if (auto it = j.find("observer_gains"); it != j.end()) {
    detail::reject_unknown_keys(*it, "observer_gains", {"l1", "l2", "l3"});
    read(*it, "l1", cfg.observer_gains.l1);
    read(*it, "l2", cfg.observer_gains.l2);
    read(*it, "l3", cfg.observer_gains.l3);
  }
  if (auto it = j.find("zeta0"); it != j.end()) {
    if (it->is_null()) {
      cfg.zeta0.reset();
    } else {
      detail::reject_unknown_keys(*it, "zeta0", {"zeta1", "zeta2", "zeta3"});
      ObserverState z = cfg.zeta0.value_or(ObserverState{});
      read(*it, "zeta1", z.zeta1);
      read(*it, "zeta2", z.zeta2);
      read(*it, "zeta3", z.zeta3);
      cfg.zeta0 = z;
    }
  }
  if (auto it = j.find("disturbance"); it != j.end()) {
    detail::reject_unknown_keys(*it, "disturbance", {"amp1", "freq1", "amp2", "freq2"});
    read(*it, "amp1", cfg.disturbance.amp1);
    read(*it, "freq1", cfg.disturbance.freq1);
    read(*it, "amp2", cfg.disturbance.amp2);
    read(*it, "freq2", cfg.disturbance.freq2);
  }
  read(j, "t_end", cfg.t_end);
  if (auto it = j.find("integrator"); it != j.end()) {
    detail::reject_unknown_keys(*it, "integrator", {"rel_tol", "abs_tol", "max_step", "min_step"});
    read(*it, "rel_tol", cfg.integrator.rel_tol);
    read(*it, "abs_tol", cfg.integrator.abs_tol);
    read(*it, "max_step", cfg.integrator.max_step);
    read(*it, "min_step", cfg.integrator.min_step);
  }
  read(j, "sample_step", cfg.sample_step);
  read(j, "quadrature_abs_tol", cfg.quadrature_abs_tol);
}

inline json to_json(const ScenarioConfig& cfg) {
  json j;
  j["params"] = {{"m", cfg.params.m}, {"l", cfg.params.l}, {"c", cfg.params.c},
                 {"d", cfg.params.d}, {"s", cfg.params.s}};
  j["x0"] = {{"alpha", cfg.x0.alpha}, {"beta", cfg.x0.beta}, {"alpha_dot", cfg.x0.alpha_dot},
             {"beta_dot", cfg.x0.beta_dot}};
  j["ref"] = {{"y0", cfg.ref.y0}, {"yf", cfg.ref.yf}, {"t0", cfg.ref.t0}, {"tf", cfg.ref.tf}};
  j["funnels"] = json::array();
  for (const auto& f : cfg.funnels) j["funnels"].push_back({{"a", f.a}, {"b", f.b}, {"eps", f.eps}});
  j["mode"] = std::string(to_string(cfg.mode));
  j["observer_gains"] = {{"l1", cfg.observer_gains.l1}, {"l2", cfg.observer_gains.l2},
                         {"l3", cfg.observer_gains.l3}};
  if (cfg.zeta0)
    j["zeta0"] = {{"zeta1", cfg.zeta0->zeta1}, {"zeta2", cfg.zeta0->zeta2},
                  {"zeta3", cfg.zeta0->zeta3}};
  else
    j["zeta0"] = nullptr;
  j["disturbance"] = {{"amp1", cfg.disturbance.amp1}, {"freq1", cfg.disturbance.freq1},
                      {"amp2", cfg.disturbance.amp2}, {"freq2", cfg.disturbance.freq2}};
  j["t_end"] = cfg.t_end;
  j["integrator"] = {{"rel_tol", cfg.integrator.rel_tol}, {"abs_tol", cfg.integrator.abs_tol},
                     {"max_step", cfg.integrator.max_step}, {"min_step", cfg.integrator.min_step}};
  j["sample_step"] = cfg.sample_step;
  j["quadrature_abs_tol"] = cfg.quadrature_abs_tol;
  return j;
}

/// Parses a scenario; missing fields keep the case-study defaults.
inline ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig cfg;
  try {
    apply_json(j, cfg);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  return cfg;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

inline ScenarioConfig load_config(const std::string& path) {
  return config_from_json(load_json_file(path));
}

/// Sets a dotted path such as "params.d" or "funnels.2.eps" to a number.
inline void set_json_path(json& j, std::string_view path, double value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key(path.substr(start, dot == std::string_view::npos ? path.npos : dot - start));
    if (key.empty()) throw ConfigError("malformed field path '" + std::string(path) + "'");
    const bool is_index = key.find_first_not_of("0123456789") == std::string::npos;
    json& child = is_index && node->is_array() ? (*node)[std::stoul(key)] : (*node)[key];
    if (dot == std::string_view::npos) {
      child = value;
      return;
    }
    node = &child;
    start = dot + 1;
  }
}

inline json summary_to_json(const Summary& s) {
  return {{"mode", std::string(to_string(s.mode))},
          {"max_funnel_ratio", {s.max_funnel_ratio[0], s.max_funnel_ratio[1], s.max_funnel_ratio[2]}},
          {"funnel_invariant", s.funnel_invariant},
          {"y_final", s.y_final},
          {"final_tracking_error", s.final_tracking_error},
          {"max_abs_u", s.max_abs_u},
          {"max_abs_beta", s.max_abs_beta},
          {"domain_invariant", s.domain_invariant},
          {"samples", s.samples}};
}

inline constexpr std::string_view kCsvColumns =
    "t,alpha,beta,alpha_dot,beta_dot,y,y_ref,y_bar_ref,y_new,e0,e1,e2,k0,k1,k2,u";

/// Header plus one line per row, 17 significant digits, '\n' line endings.
inline void write_csv(std::ostream& os, const Trajectory& traj) {
  const bool observer = traj.mode == Mode::hg;
  os << kCsvColumns;
  if (observer) os << ",zeta1,zeta2,zeta3";
  os << '\n';
  char buf[32];
  auto put = [&](double v, bool first = false) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (!first) os << ',';
    os << buf;
  };
  for (const auto& r : traj.rows) {
    put(r.t, true);
    put(r.x.alpha);
    put(r.x.beta);
    put(r.x.alpha_dot);
    put(r.x.beta_dot);
    put(r.y);
    put(r.y_ref);
    put(r.y_bar_ref);
    put(r.y_new);
    put(r.c.e0);
    put(r.c.e1);
    put(r.c.e2);
    put(r.c.k0);
    put(r.c.k1);
    put(r.c.k2);
    put(r.c.u);
    if (observer) {
      const ObserverState z = r.zeta.value_or(ObserverState{});
      put(z.zeta1);
      put(z.zeta2);
      put(z.zeta3);
    }
    os << '\n';
  }
}

inline std::string to_csv(const Trajectory& traj) {
  std::ostringstream os;
  write_csv(os, traj);
  return os.str();
}

}  // namespace nmpfunnel
