#pragma once

// Byrnes-Isidori coordinates for end-effector tracking (s = l):
//
//   y    = alpha + beta/2              eta1 = beta
//   ydot = alpha_dot + beta_dot/2      eta2 = (1/3 + cos(beta)/2) alpha_dot + beta_dot/3
//
// eta2 is the beta-row of M(beta) q_dot divided by l^2 m, so the input does
// not enter the internal dynamics.

#include <cmath>
#include <stdexcept>

#include "nmpfunnel/model.hpp"

namespace nmpfunnel {

struct BifCoords {
  double y = 0.0;
  double y_dot = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
};

struct InternalRate {
  double eta1_dot = 0.0;
  double eta2_dot = 0.0;
};

/// Coefficients of eta' = g_0 + g_1 ydot (+ g_22 ydot^2 in the second row).
struct InternalCoefficients {
  double g10 = 0.0;
  double g11 = 0.0;
  double g20 = 0.0;
  double g21 = 0.0;
  double g22 = 0.0;
};

namespace detail {

inline void require_end_effector(const ManipulatorParams& p) {
  if (std::abs(p.s - p.l) > 1e-12 * p.l)
    throw std::invalid_argument("Byrnes-Isidori transform is built for s = l");
}

}  // namespace detail

inline BifCoords phi_forward(const ManipulatorParams& p, const PlantState& x) {
  detail::require_end_effector(p);
  require_domain(x.beta);
  return {x.alpha + 0.5 * x.beta, x.alpha_dot + 0.5 * x.beta_dot, x.beta,
          (1.0 / 3.0 + 0.5 * std::cos(x.beta)) * x.alpha_dot + x.beta_dot / 3.0};
}

/// Inverts the two 2x2 systems; the velocity system has determinant (2 - 3 cos eta1)/12.
inline PlantState phi_inverse(const ManipulatorParams& p, const BifCoords& z) {
  detail::require_end_effector(p);
  require_domain(z.eta1);
  const double cb = std::cos(z.eta1);
  const double den = 2.0 - 3.0 * cb;
  const double a = 1.0 / 3.0 + 0.5 * cb;
  return {z.y - 0.5 * z.eta1, z.eta1, (4.0 * z.y_dot - 6.0 * z.eta2) / den,
          12.0 * (z.eta2 - a * z.y_dot) / den};
}

/// Gradient of phi1(x) = x2.
inline Vec4 phi1_gradient(const PlantState&) { return {0.0, 1.0, 0.0, 0.0}; }

/// Gradient of phi2(x) = (1/3 + cos(x2)/2) x3 + x4/3.
inline Vec4 phi2_gradient(const PlantState& x) {
  return {0.0, -0.5 * std::sin(x.beta) * x.alpha_dot, 1.0 / 3.0 + 0.5 * std::cos(x.beta),
          1.0 / 3.0};
}

// The g2j follow from
//   eta2' = -(c eta1 + d beta_dot)/(l^2 m) - sin(eta1)/2 * alpha_dot (alpha_dot + beta_dot)
// with alpha_dot = (4 ydot - 6 eta2)/D, beta_dot = 12 (eta2 - a ydot)/D,
// D = 2 - 3 cos(eta1), a = 1/3 + cos(eta1)/2.  Every denominator is a power
// of (2 - 3 cos eta1), not (2 - cos eta1); internal_rhs_oracle pins this down.
inline InternalCoefficients internal_coefficients(const ManipulatorParams& p, double eta1,
                                                  double eta2) {
  require_domain(eta1);
  const double cb = std::cos(eta1);
  const double sb = std::sin(eta1);
  const double den = 2.0 - 3.0 * cb;
  const double den2 = den * den;
  const double k = p.lsq_m();
  const double a = 1.0 / 3.0 + 0.5 * cb;

  InternalCoefficients g;
  g.g10 = 12.0 / den * eta2;
  g.g11 = -12.0 / den * a;
  g.g20 = -p.c * eta1 / k - 12.0 * p.d * eta2 / (den * k) + 18.0 * sb * eta2 * eta2 / den2;
  g.g21 = 12.0 * p.d * a / (den * k) - 3.0 * sb * (4.0 + 6.0 * cb) * eta2 / den2;
  g.g22 = 12.0 * sb * cb / den2;
  return g;
}

/// Internal dynamics in Byrnes-Isidori coordinates, driven by ydot.
inline InternalRate internal_rhs(const ManipulatorParams& p, double eta1, double eta2,
                                 double y_dot) {
  const auto g = internal_coefficients(p, eta1, eta2);
  return {g.g10 + g.g11 * y_dot, g.g20 + g.g21 * y_dot + g.g22 * y_dot * y_dot};
}

/// Chain rule d/dt phi_i(x) along the plant vector field.  Independent of
/// u_d because L_g phi_i = 0.
inline InternalRate internal_rhs_oracle(const ManipulatorParams& p, const PlantState& x,
                                        double u_d = 0.0) {
  require_domain(x.beta);
  const Vec4 xdot = plant_rhs(p, x, u_d).to_array();
  const Vec4 g1 = phi1_gradient(x);
  const Vec4 g2 = phi2_gradient(x);
  InternalRate r;
  for (int i = 0; i < 4; ++i) {
    r.eta1_dot += g1[i] * xdot[i];
    r.eta2_dot += g2[i] * xdot[i];
  }
  return r;
}

}  // namespace nmpfunnel
