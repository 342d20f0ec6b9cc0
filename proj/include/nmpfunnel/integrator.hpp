#pragma once

// Dormand-Prince 5(4) with PI step-size control and the 4th-order continuous
// extension.  A trial step whose stage evaluation throws GuardError (funnel
// wall, domain exit) or yields a non-finite value is rejected and halved; the
// guard error is rethrown once the step would drop below min_step.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <initializer_list>
#include <string>
#include <utility>

#include "nmpfunnel/errors.hpp"

namespace nmpfunnel {

struct StepControl {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_step = 1e-2;
  double min_step = 1e-12;
  double initial_step = 0.0;  ///< 0 selects a starting step automatically
  std::size_t max_steps = 50'000'000;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t guard_rejections = 0;
  std::size_t rhs_evaluations = 0;
};

namespace dopri {

inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0,
                        d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0,
                        d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants (Hairer & Wanner defaults for this pair).
inline constexpr double beta = 0.04;
inline constexpr double expo = 0.2 - beta * 0.75;
inline constexpr double safety = 0.9;
inline constexpr double fac_min = 0.2;
inline constexpr double fac_max = 10.0;

struct NonFiniteStage {};

template <std::size_t N>
bool all_finite(const std::array<double, N>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace dopri

/// One accepted step with its dense-output polynomial.
template <std::size_t N>
class DenseStep {
public:
  using State = std::array<double, N>;

  double t_begin() const noexcept { return t0_; }
  double t_end() const noexcept { return t0_ + h_; }
  const State& x_begin() const noexcept { return r1_; }
  const State& x_end() const noexcept { return x1_; }

  State operator()(double t) const {
    const double th = (t - t0_) / h_;
    const double th1 = 1.0 - th;
    State out;
    for (std::size_t i = 0; i < N; ++i)
      out[i] = r1_[i] + th * (r2_[i] + th1 * (r3_[i] + th * (r4_[i] + th1 * r5_[i])));
    return out;
  }

  /// Builds the interpolant from the stages of an accepted step.
  void assign(double t0, double h, const State& x0, const State& x1, const State& k1,
              const State& k3, const State& k4, const State& k5, const State& k6,
              const State& k7) {
    using namespace dopri;
    t0_ = t0;
    h_ = h;
    x1_ = x1;
    for (std::size_t i = 0; i < N; ++i) {
      const double ydiff = x1[i] - x0[i];
      const double bspl = h * k1[i] - ydiff;
      r1_[i] = x0[i];
      r2_[i] = ydiff;
      r3_[i] = bspl;
      r4_[i] = ydiff - h * k7[i] - bspl;
      r5_[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
  }

private:
  double t0_ = 0.0;
  double h_ = 0.0;
  State x1_{};
  State r1_{}, r2_{}, r3_{}, r4_{}, r5_{};
};

/// Integrates x' = rhs(t, x) from t0 to t_end.  on_step(const DenseStep<N>&)
/// is called after every accepted step.
template <std::size_t N, class Rhs, class OnStep>
IntegrationStats integrate_dopri5(Rhs&& rhs, double t0, const std::array<double, N>& x0,
                                  double t_end, const StepControl& ctl, OnStep&& on_step) {
  using State = std::array<double, N>;
  using namespace dopri;

  IntegrationStats stats;
  if (!(t_end > t0)) return stats;

  auto eval = [&](double t, const State& x) {
    ++stats.rhs_evaluations;
    State k = rhs(t, x);
    if (!all_finite(k))
      throw NonFiniteStage{};
    return k;
  };

  auto combine = [](const State& x, double h,
                    std::initializer_list<std::pair<double, const State*>> terms) {
    State out = x;
    for (const auto& [coef, k] : terms)
      if (coef != 0.0)
        for (std::size_t i = 0; i < N; ++i) out[i] += h * coef * (*k)[i];
    return out;
  };

  auto scale_of = [&](double a, double b) {
    return ctl.abs_tol + ctl.rel_tol * std::max(std::abs(a), std::abs(b));
  };

  double t = t0;
  State x = x0;
  State k1 = rhs(t, x);
  ++stats.rhs_evaluations;
  if (!all_finite(k1)) throw IntegratorFailure("non-finite derivative at the initial state", t);

  double h = ctl.initial_step;
  if (h <= 0.0) {
    // Crude estimate from the first derivative; the controller adapts quickly.
    double dnorm = 0.0, xnorm = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale_of(x[i], x[i]);
      dnorm += std::pow(k1[i] / sc, 2);
      xnorm += std::pow(x[i] / sc, 2);
    }
    dnorm = std::sqrt(dnorm / N);
    xnorm = std::sqrt(xnorm / N);
    h = (dnorm < 1e-5 || xnorm < 1e-5) ? 1e-6 : 0.01 * xnorm / dnorm;
  }
  h = std::clamp(h, ctl.min_step, ctl.max_step);

  double err_old = 1e-4;
  bool last_rejected = false;
  std::exception_ptr last_guard;

  DenseStep<N> dense;
  State k2, k3, k4, k5, k6, k7, xn;

  while (t < t_end) {
    if (stats.accepted + stats.rejected >= ctl.max_steps)
      throw IntegratorFailure("maximum number of steps exceeded", t);
    bool final_step = false;
    if (t + h >= t_end || t + 1.01 * h >= t_end) {
      h = t_end - t;
      final_step = true;
    }

    bool guard_hit = false;
    try {
      k2 = eval(t + c2 * h, combine(x, h, {{a21, &k1}}));
      k3 = eval(t + c3 * h, combine(x, h, {{a31, &k1}, {a32, &k2}}));
      k4 = eval(t + c4 * h, combine(x, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
      k5 = eval(t + c5 * h, combine(x, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
      k6 = eval(t + h,
                combine(x, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
      xn = combine(x, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
      k7 = eval(t + h, xn);
    } catch (const GuardError&) {
      last_guard = std::current_exception();
      guard_hit = true;
    } catch (const NonFiniteStage&) {
      last_guard = nullptr;
      guard_hit = true;
    }

    if (guard_hit) {
      ++stats.rejected;
      ++stats.guard_rejections;
      h *= 0.5;
      last_rejected = true;
      if (h < ctl.min_step) {
        if (last_guard) std::rethrow_exception(last_guard);
        throw IntegratorFailure("non-finite state with step below min_step", t);
      }
      continue;
    }

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
      err += std::pow(ei / scale_of(x[i], xn[i]), 2);
    }
    err = std::sqrt(err / N);

    const double fac11 = std::pow(err, expo);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(err_old, beta);
      fac = std::clamp(fac / safety, 1.0 / fac_max, 1.0 / fac_min);
      double h_new = h / fac;
      if (last_rejected) h_new = std::min(h_new, h);
      err_old = std::max(err, 1e-4);

      dense.assign(t, h, x, xn, k1, k3, k4, k5, k6, k7);
      t = final_step ? t_end : t + h;
      x = xn;
      k1 = k7;
      ++stats.accepted;
      last_rejected = false;
      on_step(static_cast<const DenseStep<N>&>(dense));
      h = std::clamp(h_new, ctl.min_step, ctl.max_step);
    } else {
      ++stats.rejected;
      h /= std::min(1.0 / fac_min, fac11 / safety);
      last_rejected = true;
      if (h < ctl.min_step)
        throw IntegratorFailure("step size underflow at t = " + std::to_string(t), t);
    }
  }
  return stats;
}

}  // namespace nmpfunnel
