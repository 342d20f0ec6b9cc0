#pragma once

// Linearised internal dynamics eta' = Q eta + P ydot at the origin, the
// stable/unstable eigensplit of Q, and the auxiliary output
//
//   y_new = Psi(x) = [0, 1] V^{-1} (eta1, eta2)^T - p2 y,
//
// which removes the unstable internal mode from the tracking problem at the
// price of raising the relative degree from 2 to 3.

#include <cmath>
#include <stdexcept>

#include "nmpfunnel/bif.hpp"
#include "nmpfunnel/model.hpp"

namespace nmpfunnel {

struct Linearization {
  Mat2 Q;
  Vec2 P;
};

/// Stable/unstable decomposition of the linearised internal dynamics.
///
/// Columns of V are eigenvectors of Q for (lambda1, lambda2).  The stable one
/// has unit second component.  The unstable one has second component -1,
/// which is the sign making p2 > 0: the auxiliary output then inherits the
/// sign of the high-frequency gain (lambda2 p2 Gamma < 0), so the cascade's
/// u = +k2 e2 remains negative feedback.  With this choice D = det V equals
/// (lambda1 - lambda2) l^2 m / c.
struct LinData {
  Mat2 Q;
  Vec2 P;
  double lambda1 = 0.0;  ///< stable eigenvalue, < 0
  double lambda2 = 0.0;  ///< unstable eigenvalue, > 0
  Mat2 V;
  Mat2 V_inv;
  double p1 = 0.0;
  double p2 = 0.0;
  double D = 0.0;  ///< det V
};

inline Linearization linearize(const ManipulatorParams& p) {
  const double k = p.lsq_m();
  Linearization lin;
  lin.Q << 0.0,       -12.0,
           -p.c / k,  12.0 * p.d / k;
  lin.P << 10.0, -10.0 * p.d / k;
  return lin;
}

inline LinData eigensplit(const ManipulatorParams& p) {
  if (!(p.c > 0.0))
    throw std::invalid_argument("eigensplit: c must be > 0 for a hyperbolic equilibrium");
  const auto [Q, P] = linearize(p);
  const double k = p.lsq_m();
  const double mid = 6.0 * p.d / k;
  const double rad = 2.0 * std::sqrt(std::pow(3.0 * p.d / k, 2) + 3.0 * p.c / k);

  LinData out;
  out.Q = Q;
  out.P = P;
  out.lambda1 = mid - rad;
  out.lambda2 = mid + rad;

  // Kernel of the first row of (Q - lambda I), scaled to unit second component.
  auto eigenvector = [&](double lambda) {
    return Vec2(Q(0, 1) / (lambda - Q(0, 0)), 1.0);
  };
  out.V.col(0) = eigenvector(out.lambda1);
  out.V.col(1) = eigenvector(out.lambda2);
  out.V_inv = out.V.inverse();
  Vec2 pv = out.V_inv * P;
  if (pv(1) < 0.0) {
    out.V.col(1) = -out.V.col(1);
    out.V_inv = out.V.inverse();
    pv = out.V_inv * P;
  }
  out.p1 = pv(0);
  out.p2 = pv(1);
  out.D = out.V.determinant();
  return out;
}

/// Auxiliary output y_new expressed in the original coordinates.
inline double psi(const ManipulatorParams& p, const LinData& lin, const PlantState& x) {
  const BifCoords z = phi_forward(p, x);
  const double eta_hat2 = lin.V_inv(1, 0) * z.eta1 + lin.V_inv(1, 1) * z.eta2;
  return eta_hat2 - lin.p2 * z.y;
}

/// y_new and the two "derivatives" of the linearised model.  These are not
/// time derivatives of Psi along the nonlinear flow.
struct YNewLadder {
  double y_new = 0.0;
  double y_new_1 = 0.0;
  double y_new_2 = 0.0;
};

inline YNewLadder ynew_derivatives(const ManipulatorParams& p, const LinData& lin,
                                   const PlantState& x) {
  const double l2 = lin.lambda2;
  const double y_new = psi(p, lin, x);
  const double y = x.alpha + 0.5 * x.beta;
  const double y_dot = x.alpha_dot + 0.5 * x.beta_dot;
  const double y_new_1 = l2 * y_new + l2 * lin.p2 * y;
  return {y_new, y_new_1, l2 * y_new_1 + l2 * lin.p2 * y_dot};
}

}  // namespace nmpfunnel
