#pragma once

// Two-link rotational manipulator with a passive spring-damper joint.
//
// State x = (alpha, beta, alpha_dot, beta_dot): alpha is the actuated link
// angle, beta the deflection of the passive link.  The torque u_d acts on the
// first link only.  There is no gravity term.

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "nmpfunnel/errors.hpp"

namespace nmpfunnel {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Vec4 = std::array<double, 4>;

/// cos(beta) must stay strictly above this value.
inline constexpr double kDomainCosBound = 2.0 / 3.0;

struct ManipulatorParams {
  double m = 1.0;   ///< link mass [kg]
  double l = 1.0;   ///< link length [m]
  double c = 1.0;   ///< spring constant [N m / rad]
  double d = 0.25;  ///< damping coefficient [N m s / rad]
  double s = 1.0;   ///< tracking point on the passive link, 0 <= s <= l [m]

  /// The recurring scale l^2 m.
  double lsq_m() const noexcept { return l * l * m; }
  /// Link inertia about its centre, l^2 m / 12.
  double inertia() const noexcept { return lsq_m() / 12.0; }
  /// Weight of beta in the output, s / (s + l).
  double output_weight() const noexcept { return s / (s + l); }

  void validate() const {
    if (!(m > 0.0)) throw std::invalid_argument("ManipulatorParams: m must be > 0");
    if (!(l > 0.0)) throw std::invalid_argument("ManipulatorParams: l must be > 0");
    if (!(c > 0.0)) throw std::invalid_argument("ManipulatorParams: c must be > 0");
    if (!(d >= 0.0)) throw std::invalid_argument("ManipulatorParams: d must be >= 0");
    if (!(s >= 0.0 && s <= l))
      throw std::invalid_argument("ManipulatorParams: need 0 <= s <= l");
  }
};

struct PlantState {
  double alpha = 0.0;
  double beta = 0.0;
  double alpha_dot = 0.0;
  double beta_dot = 0.0;

  Vec4 to_array() const noexcept { return {alpha, beta, alpha_dot, beta_dot}; }
  static PlantState from_array(const Vec4& v) noexcept { return {v[0], v[1], v[2], v[3]}; }

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

inline bool in_domain(double beta) noexcept { return std::cos(beta) > kDomainCosBound; }
inline bool in_domain(const PlantState& x) noexcept { return in_domain(x.beta); }

inline void require_domain(double beta) {
  if (!in_domain(beta)) throw DomainError(beta);
}

inline Mat2 mass_matrix(const ManipulatorParams& p, double beta) {
  const double cb = std::cos(beta);
  const double off = 1.0 / 3.0 + 0.5 * cb;
  Mat2 M;
  M << 5.0 / 3.0 + cb, off,
       off,            1.0 / 3.0;
  return p.lsq_m() * M;
}

/// Closed-form inverse; det M = (l^2 m)^2 (16 - 9 cos^2 beta) / 36 never vanishes.
inline Mat2 mass_matrix_inverse(const ManipulatorParams& p, double beta) {
  const double cb = std::cos(beta);
  const double off = -1.0 / 3.0 - 0.5 * cb;
  const double scale = 36.0 / (p.lsq_m() * (16.0 - 9.0 * cb * cb));
  Mat2 Minv;
  Minv << 1.0 / 3.0, off,
          off,       5.0 / 3.0 + cb;
  return scale * Minv;
}

struct GeneralizedForces {
  double f1 = 0.0;
  double f2 = 0.0;
};

/// Coriolis/centrifugal terms plus the passive joint's spring and damper.
inline GeneralizedForces generalized_forces(const ManipulatorParams& p, const PlantState& x) {
  const double sb = std::sin(x.beta);
  const double k = p.lsq_m();
  return {0.5 * k * x.beta_dot * (2.0 * x.alpha_dot + x.beta_dot) * sb,
          -p.c * x.beta - p.d * x.beta_dot - 0.5 * k * x.alpha_dot * x.alpha_dot * sb};
}

/// First-order equations of motion, M(beta) (alpha'', beta'') = (f1 + u_d, f2).
inline PlantState plant_rhs(const ManipulatorParams& p, const PlantState& x, double u_d) {
  const auto [f1, f2] = generalized_forces(p, x);
  const Vec2 acc = mass_matrix_inverse(p, x.beta) * Vec2(f1 + u_d, f2);
  return {x.alpha_dot, x.beta_dot, acc(0), acc(1)};
}

/// Drift vector field f(x) of x' = f(x) + g(x) u_d.
inline Vec4 drift_field(const ManipulatorParams& p, const PlantState& x) {
  return plant_rhs(p, x, 0.0).to_array();
}

/// Input vector field g(x) = (0, 0, M^{-1} e_1).
inline Vec4 input_field(const ManipulatorParams& p, const PlantState& x) {
  const Mat2 Minv = mass_matrix_inverse(p, x.beta);
  return {0.0, 0.0, Minv(0, 0), Minv(1, 0)};
}

struct Output {
  double y = 0.0;
  double y_dot = 0.0;
};

inline Output output(const ManipulatorParams& p, const PlantState& x) {
  const double w = p.output_weight();
  return {x.alpha + w * x.beta, x.alpha_dot + w * x.beta_dot};
}

/// High-frequency gain [1, s/(s+l)] M^{-1} [1, 0]^T.  Negative iff cos(beta) > 2/3 when s = l.
inline double gamma(const ManipulatorParams& p, double beta) {
  const double cb = std::cos(beta);
  return 36.0 / (p.lsq_m() * (16.0 - 9.0 * cb * cb)) *
         (1.0 / 3.0 - p.output_weight() * (1.0 / 3.0 + 0.5 * cb));
}

/// Kinetic energy plus spring potential.  Conserved when u_d = 0 and d = 0.
inline double mechanical_energy(const ManipulatorParams& p, const PlantState& x) {
  const Vec2 qd(x.alpha_dot, x.beta_dot);
  return 0.5 * qd.dot(mass_matrix(p, x.beta) * qd) + 0.5 * p.c * x.beta * x.beta;
}

}  // namespace nmpfunnel
