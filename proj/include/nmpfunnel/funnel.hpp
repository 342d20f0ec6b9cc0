#pragma once

// Funnel controller for the auxiliary output y_new (relative degree 3).
//
//   e0 = y_new - ybar_ref
//   e1 = e0' + k0 e0
//   e2 = e1' + k1 e1
//   ki = 1 / (1 - phi_i^2 ei^2)
//   u  = k2 e2
//
// The derivatives e0', e1' are assembled from y_new^[1], y_new^[2], which
// come either from the linearised internal dynamics (controller_lin) or from
// a high-gain observer (controller_hg).  u carries a positive sign because
// the high-frequency gain of y_new is negative on the domain.

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "nmpfunnel/errors.hpp"
#include "nmpfunnel/linid.hpp"
#include "nmpfunnel/model.hpp"
#include "nmpfunnel/reference.hpp"

namespace nmpfunnel {

/// phi(t) = 1 / (a exp(-b t) + eps).
struct FunnelSpec {
  double a = 1.5;
  double b = 0.8;
  double eps = 0.001;

  void validate() const {
    if (!(a >= 0.0)) throw std::invalid_argument("FunnelSpec: a must be >= 0");
    if (!(b > 0.0)) throw std::invalid_argument("FunnelSpec: b must be > 0");
    if (!(eps > 0.0)) throw std::invalid_argument("FunnelSpec: eps must be > 0");
  }
};

using FunnelSet = std::array<FunnelSpec, 3>;

struct FunnelValue {
  double phi = 0.0;
  double phi_dot = 0.0;
};

inline FunnelValue phi_eval(const FunnelSpec& f, double t) {
  const double decay = f.a * std::exp(-f.b * t);
  const double phi = 1.0 / (decay + f.eps);
  return {phi, f.b * decay * phi * phi};
}

/// k = 1 / (1 - phi^2 e^2); throws FunnelViolation once phi |e| >= 1.
inline double gain(double phi, double e, int level = 0) {
  const double pe = phi * e;
  if (!(std::abs(pe) < 1.0)) throw FunnelViolation(level, phi, e);
  return 1.0 / (1.0 - pe * pe);
}

struct CascadeOutput {
  double e0 = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  double k0 = 1.0;
  double k1 = 1.0;
  double k2 = 1.0;
  double u = 0.0;
  // intermediate quantities
  double e0_1 = 0.0;  ///< e0^[1]
  double e0_2 = 0.0;  ///< e0^[2]
  double k0_1 = 0.0;  ///< k0^[1]
  double e1_1 = 0.0;  ///< e1^[1]
};

/// Gain slope weight in k0^[1].  With 1, k0^[1] is exactly d/dt k0 whenever
/// e0^[1] is the true derivative of e0.
inline constexpr double kKappa0 = 1.0;

inline CascadeOutput cascade(const FunnelSet& specs, double t, double y_new, double y_new_1,
                             double y_new_2, const NewRefSample& ref) {
  const FunnelValue f0 = phi_eval(specs[0], t);
  const double phi1 = phi_eval(specs[1], t).phi;
  const double phi2 = phi_eval(specs[2], t).phi;

  CascadeOutput c;
  c.e0 = y_new - ref.value;
  c.e0_1 = y_new_1 - ref.rate;
  c.e0_2 = y_new_2 - ref.accel;
  c.k0 = gain(f0.phi, c.e0, 0);
  const double w = 1.0 - f0.phi * f0.phi * c.e0 * c.e0;
  c.k0_1 = 2.0 * kKappa0 * f0.phi * c.e0 / (w * w) * (f0.phi_dot * c.e0 + f0.phi * c.e0_1);
  c.e1 = c.e0_1 + c.k0 * c.e0;
  c.k1 = gain(phi1, c.e1, 1);
  c.e1_1 = c.e0_2 + c.k0 * c.e0_1 + c.k0_1 * c.e0;
  c.e2 = c.e1_1 + c.k1 * c.e1;
  c.k2 = gain(phi2, c.e2, 2);
  c.u = c.k2 * c.e2;
  return c;
}

inline CascadeOutput cascade(const FunnelSet& specs, double t, double y_new, double y_new_1,
                             double y_new_2, double y_bar_ref, double y_bar_ref_dot,
                             double y_bar_ref_ddot) {
  return cascade(specs, t, y_new, y_new_1, y_new_2,
                 NewRefSample{y_bar_ref, y_bar_ref_dot, y_bar_ref_ddot});
}

struct ObserverGains {
  double l1 = 1e2;
  double l2 = 1e5;
  double l3 = 1e6;
};

/// zeta1 ~ y_new, zeta2 ~ y_new', zeta3 ~ y_new''.
struct ObserverState {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double zeta3 = 0.0;
};

inline ObserverState observer_rhs(const ObserverGains& L, const ObserverState& z, double y_new) {
  const double r = y_new - z.zeta1;
  return {L.l1 * r + z.zeta2, L.l2 * r + z.zeta3, L.l3 * r};
}

/// Everything the two control laws need besides time and state.
struct ControllerContext {
  ManipulatorParams params;
  LinData lin;
  FunnelSet funnels;
  std::shared_ptr<const NewReference> reference;
};

inline CascadeOutput controller_lin(const ControllerContext& ctx, double t, const PlantState& x) {
  const YNewLadder y = ynew_derivatives(ctx.params, ctx.lin, x);
  return cascade(ctx.funnels, t, y.y_new, y.y_new_1, y.y_new_2, ctx.reference->eval(t));
}

struct HgOutput {
  CascadeOutput cascade;
  ObserverState zeta_dot;
};

inline HgOutput controller_hg(const ControllerContext& ctx, const ObserverGains& L, double t,
                              const PlantState& x, const ObserverState& zeta) {
  const double y_new = psi(ctx.params, ctx.lin, x);
  return {cascade(ctx.funnels, t, y_new, zeta.zeta2, zeta.zeta3, ctx.reference->eval(t)),
          observer_rhs(L, zeta, y_new)};
}

}  // namespace nmpfunnel
