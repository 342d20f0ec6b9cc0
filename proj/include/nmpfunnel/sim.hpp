#pragma once

// Closed-loop simulation: plant + funnel controller (+ high-gain observer),
// torque disturbance, adaptive integration and sampled trajectories.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nmpfunnel/errors.hpp"
#include "nmpfunnel/funnel.hpp"
#include "nmpfunnel/integrator.hpp"
#include "nmpfunnel/linid.hpp"
#include "nmpfunnel/model.hpp"
#include "nmpfunnel/reference.hpp"

namespace nmpfunnel {

enum class Mode { lin, hg };

inline std::string_view to_string(Mode m) { return m == Mode::lin ? "lin" : "hg"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "lin") return Mode::lin;
  if (s == "hg") return Mode::hg;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected lin or hg)");
}

/// d(t) = amp1 sin(freq1 t) + amp2 cos(freq2 t), added to the control torque.
struct DisturbanceSpec {
  double amp1 = 0.1;
  double freq1 = 5.0;
  double amp2 = 0.2;
  double freq2 = 8.0;
};

inline double disturbance(const DisturbanceSpec& d, double t) {
  return d.amp1 * std::sin(d.freq1 * t) + d.amp2 * std::cos(d.freq2 * t);
}

struct IntegratorSettings {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_step = 1e-2;
  double min_step = 1e-12;
};

/// Defaults reproduce the end-effector transition 0 -> pi/4 rad in 3 s.
struct ScenarioConfig {
  ManipulatorParams params{};
  PlantState x0{};
  TransitionRef ref{0.0, std::numbers::pi / 4.0, 0.0, 3.0};
  FunnelSet funnels{FunnelSpec{1.5, 0.8, 0.001}, FunnelSpec{1.5, 0.8, 0.001},
                    FunnelSpec{60.0, 0.2, 0.001}};
  Mode mode = Mode::lin;
  ObserverGains observer_gains{};
  std::optional<ObserverState> zeta0;  ///< defaults to (Psi(x0), 0, 0)
  DisturbanceSpec disturbance{};
  double t_end = 3.0;
  IntegratorSettings integrator{};
  double sample_step = 1e-3;
  double quadrature_abs_tol = 1e-10;

  static ScenarioConfig case_study(Mode mode) {
    ScenarioConfig cfg;
    cfg.mode = mode;
    return cfg;
  }

  void validate() const {
    try {
      params.validate();
      ref.validate();
      for (const auto& f : funnels) f.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (std::abs(params.s - params.l) > 1e-12 * params.l)
      throw ConfigError("the controller tracks the end effector: params.s must equal params.l");
    if (!(integrator.rel_tol > 0.0) || !(integrator.abs_tol > 0.0))
      throw ConfigError("integrator tolerances must be > 0");
    if (!(integrator.min_step > 0.0) || !(integrator.max_step >= integrator.min_step))
      throw ConfigError("need 0 < integrator.min_step <= integrator.max_step");
    if (!(t_end > 0.0)) throw ConfigError("t_end must be > 0");
    if (!(sample_step > 0.0)) throw ConfigError("sample_step must be > 0");
    if (!(quadrature_abs_tol > 0.0)) throw ConfigError("quadrature_abs_tol must be > 0");
  }
};

struct ClosedLoopState {
  PlantState plant{};
  std::optional<ObserverState> zeta;  ///< present in hg mode only
};

struct TrajectoryRow {
  double t = 0.0;
  PlantState x{};
  double y = 0.0;
  double y_ref = 0.0;
  double y_bar_ref = 0.0;
  double y_new = 0.0;
  CascadeOutput c{};
  std::optional<ObserverState> zeta;
};

struct Trajectory {
  Mode mode = Mode::lin;
  std::vector<TrajectoryRow> rows;
  IntegrationStats stats{};
};

enum class FailureKind { funnel_violation, domain_exit, integrator_failure };

/// A run aborted; carries the time and closed-loop state where it happened.
class SimulationError : public std::runtime_error {
public:
  SimulationError(FailureKind kind, double t, std::vector<double> state, const std::string& what)
      : std::runtime_error(what), kind_(kind), t_(t), state_(std::move(state)) {}

  FailureKind kind() const noexcept { return kind_; }
  double t() const noexcept { return t_; }
  const std::vector<double>& state() const noexcept { return state_; }

private:
  FailureKind kind_;
  double t_;
  std::vector<double> state_;
};

class ClosedLoop {
public:
  explicit ClosedLoop(const ScenarioConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    ctx_.params = cfg_.params;
    ctx_.lin = eigensplit(cfg_.params);
    ctx_.funnels = cfg_.funnels;
    ctx_.reference = std::make_shared<const NewReference>(
        make_new_ref_config(ctx_.lin, cfg_.quadrature_abs_tol), cfg_.ref);
  }

  const ScenarioConfig& config() const noexcept { return cfg_; }
  const ControllerContext& context() const noexcept { return ctx_; }

  ClosedLoopState initial_state() const {
    ClosedLoopState s{cfg_.x0, std::nullopt};
    if (cfg_.mode == Mode::hg)
      s.zeta = cfg_.zeta0.value_or(ObserverState{psi(cfg_.params, ctx_.lin, cfg_.x0), 0.0, 0.0});
    return s;
  }

  struct Control {
    CascadeOutput cascade;
    std::optional<ObserverState> zeta_dot;
  };

  Control control(double t, const ClosedLoopState& s) const {
    if (s.zeta) {
      const HgOutput out = controller_hg(ctx_, cfg_.observer_gains, t, s.plant, *s.zeta);
      return {out.cascade, out.zeta_dot};
    }
    return {controller_lin(ctx_, t, s.plant), std::nullopt};
  }

  ClosedLoopState derivative(double t, const ClosedLoopState& s) const {
    const Control ctl = control(t, s);
    const double u_d = ctl.cascade.u + disturbance(cfg_.disturbance, t);
    return {plant_rhs(cfg_.params, s.plant, u_d), ctl.zeta_dot};
  }

  TrajectoryRow sample(double t, const ClosedLoopState& s) const {
    TrajectoryRow row;
    row.t = t;
    row.x = s.plant;
    row.y = output(cfg_.params, s.plant).y;
    row.y_ref = yref_eval(cfg_.ref, t).value;
    const Control ctl = control(t, s);
    row.c = ctl.cascade;
    row.y_bar_ref = ctx_.reference->eval(t).value;
    row.y_new = psi(cfg_.params, ctx_.lin, s.plant);
    row.zeta = s.zeta;
    return row;
  }

private:
  ScenarioConfig cfg_;
  ControllerContext ctx_;
};

/// Closed-loop vector field: plant driven by u + d, plus the observer in hg mode.
inline ClosedLoopState closed_loop_rhs(const ClosedLoop& loop, double t, const ClosedLoopState& s) {
  return loop.derivative(t, s);
}

namespace detail {

template <std::size_t N>
std::array<double, N> pack(const ClosedLoopState& s) {
  std::array<double, N> v{};
  const Vec4 p = s.plant.to_array();
  std::copy(p.begin(), p.end(), v.begin());
  if constexpr (N == 7) {
    v[4] = s.zeta->zeta1;
    v[5] = s.zeta->zeta2;
    v[6] = s.zeta->zeta3;
  }
  return v;
}

template <std::size_t N>
ClosedLoopState unpack(const std::array<double, N>& v) {
  ClosedLoopState s{PlantState{v[0], v[1], v[2], v[3]}, std::nullopt};
  if constexpr (N == 7) s.zeta = ObserverState{v[4], v[5], v[6]};
  return s;
}

template <std::size_t N>
std::vector<double> to_vector(const std::array<double, N>& v) {
  return {v.begin(), v.end()};
}

inline std::string describe(double t, const std::string& what) {
  return "t = " + std::to_string(t) + ": " + what;
}

template <std::size_t N>
Trajectory run(const ClosedLoop& loop) {
  using State = std::array<double, N>;
  const ScenarioConfig& cfg = loop.config();
  Trajectory traj;
  traj.mode = cfg.mode;

  std::vector<double> sample_times;
  const auto n = static_cast<std::size_t>(std::floor(cfg.t_end / cfg.sample_step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) sample_times.push_back(static_cast<double>(k) * cfg.sample_step);
  if (cfg.t_end - sample_times.back() > 1e-12 * cfg.t_end) sample_times.push_back(cfg.t_end);
  traj.rows.reserve(sample_times.size());

  const ClosedLoopState s0 = loop.initial_state();
  State last_state = pack<N>(s0);
  double last_t = 0.0;

  auto fail = [&](FailureKind kind, double t, const std::string& what) -> SimulationError {
    return SimulationError(kind, t, to_vector(last_state), describe(t, what));
  };

  // Initial feasibility: e0(0), e1(0), e2(0) inside their funnels.
  try {
    traj.rows.push_back(loop.sample(0.0, s0));
  } catch (const FunnelViolation& e) {
    throw fail(FailureKind::funnel_violation, 0.0, std::string("initial ") + e.what());
  } catch (const DomainError& e) {
    throw fail(FailureKind::domain_exit, 0.0, e.what());
  }

  auto rhs = [&](double t, const State& v) {
    return pack<N>(loop.derivative(t, unpack<N>(v)));
  };
  std::size_t next = 1;
  auto on_step = [&](const DenseStep<N>& step) {
    last_t = step.t_end();
    last_state = step.x_end();
    while (next < sample_times.size() && sample_times[next] <= step.t_end() + 1e-12) {
      const double ts = std::min(sample_times[next], step.t_end());
      traj.rows.push_back(loop.sample(sample_times[next], unpack<N>(step(ts))));
      ++next;
    }
  };

  StepControl ctl;
  ctl.rel_tol = cfg.integrator.rel_tol;
  ctl.abs_tol = cfg.integrator.abs_tol;
  ctl.max_step = cfg.integrator.max_step;
  ctl.min_step = cfg.integrator.min_step;

  try {
    traj.stats = integrate_dopri5<N>(rhs, 0.0, pack<N>(s0), cfg.t_end, ctl, on_step);
  } catch (const FunnelViolation& e) {
    throw fail(FailureKind::funnel_violation, last_t, e.what());
  } catch (const DomainError& e) {
    throw fail(FailureKind::domain_exit, last_t, e.what());
  } catch (const IntegratorFailure& e) {
    throw fail(FailureKind::integrator_failure, e.t(), e.what());
  }
  return traj;
}

}  // namespace detail

/// Runs one scenario.  Throws SimulationError on funnel violation, domain
/// exit or integrator failure; ConfigError on an invalid configuration.
inline Trajectory integrate(const ScenarioConfig& cfg) {
  const ClosedLoop loop(cfg);
  return cfg.mode == Mode::hg ? detail::run<7>(loop) : detail::run<4>(loop);
}

struct Summary {
  Mode mode = Mode::lin;
  std::array<double, 3> max_funnel_ratio{};  ///< max_t phi_i(t) |e_i(t)|
  bool funnel_invariant = false;
  double y_final = 0.0;
  double final_tracking_error = 0.0;  ///< |y(t_end) - y_ref(t_end)|
  double max_abs_u = 0.0;
  double max_abs_beta = 0.0;
  bool domain_invariant = false;
  std::size_t samples = 0;
};

inline Summary summarize(const Trajectory& traj, const ScenarioConfig& cfg) {
  Summary s;
  s.mode = traj.mode;
  s.samples = traj.rows.size();
  for (const auto& r : traj.rows) {
    const std::array<double, 3> e{r.c.e0, r.c.e1, r.c.e2};
    for (int i = 0; i < 3; ++i)
      s.max_funnel_ratio[i] =
          std::max(s.max_funnel_ratio[i], phi_eval(cfg.funnels[i], r.t).phi * std::abs(e[i]));
    s.max_abs_u = std::max(s.max_abs_u, std::abs(r.c.u));
    s.max_abs_beta = std::max(s.max_abs_beta, std::abs(r.x.beta));
  }
  s.funnel_invariant = !traj.rows.empty() &&
                       std::all_of(s.max_funnel_ratio.begin(), s.max_funnel_ratio.end(),
                                   [](double v) { return v < 1.0; });
  s.domain_invariant = !traj.rows.empty() && s.max_abs_beta < std::acos(kDomainCosBound);
  if (!traj.rows.empty()) {
    const auto& last = traj.rows.back();
    s.y_final = last.y;
    s.final_tracking_error = std::abs(last.y - last.y_ref);
  }
  return s;
}

/// sup |u_a(t) - u_b(t)| over common samples with t >= t_from.
inline double max_input_difference(const Trajectory& a, const Trajectory& b, double t_from) {
  double out = 0.0;
  const std::size_t n = std::min(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(a.rows[i].t - b.rows[i].t) > 1e-12)
      throw std::invalid_argument("max_input_difference: trajectories are not on the same grid");
    if (a.rows[i].t >= t_from - 1e-12)
      out = std::max(out, std::abs(a.rows[i].c.u - b.rows[i].c.u));
  }
  return out;
}

struct CaseStudyResult {
  Trajectory lin;
  Trajectory hg;
  Summary lin_summary;
  Summary hg_summary;
  double max_input_difference_after_transient = 0.0;  ///< t >= 0.5 s
};

/// Both controller variants on the same scenario (mode field is overridden).
inline CaseStudyResult run_case_study(const ScenarioConfig& base = ScenarioConfig{}) {
  ScenarioConfig lin_cfg = base;
  lin_cfg.mode = Mode::lin;
  ScenarioConfig hg_cfg = base;
  hg_cfg.mode = Mode::hg;
  CaseStudyResult r;
  r.lin = integrate(lin_cfg);
  r.hg = integrate(hg_cfg);
  r.lin_summary = summarize(r.lin, lin_cfg);
  r.hg_summary = summarize(r.hg, hg_cfg);
  r.max_input_difference_after_transient = max_input_difference(r.lin, r.hg, 0.5);
  return r;
}

}  // namespace nmpfunnel
