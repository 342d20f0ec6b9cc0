#pragma once

// Reference signals.
//
// TransitionRef is the 9th-degree rest-to-rest polynomial from y0 to yf,
// held constant outside [t0, tf].  NewReference is the bounded solution of
// the unstable scalar ODE
//
//   v'(t) = lambda2 v(t) + lambda2 p2 y_ref(t),
//
// namely v(t) = -int_t^inf exp(lambda2 (t - s)) lambda2 p2 y_ref(s) ds.  It
// looks ahead in y_ref, which is fine because the reference is known in
// advance.  The integral is evaluated backwards so exp() never amplifies
// rounding errors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nmpfunnel/integrator.hpp"
#include "nmpfunnel/linid.hpp"

namespace nmpfunnel {

struct TransitionRef {
  double y0 = 0.0;
  double yf = 0.0;
  double t0 = 0.0;
  double tf = 1.0;

  /// tf == t0 is accepted and means a step to yf at t0.
  void validate() const {
    if (!(tf >= t0)) throw std::invalid_argument("TransitionRef: need tf >= t0");
  }
};

struct RefSample {
  double value = 0.0;
  double rate = 0.0;
};

/// 126 s^5 - 420 s^6 + 540 s^7 - 315 s^8 + 70 s^9, s = (t - t0)/(tf - t0).
inline RefSample yref_eval(const TransitionRef& r, double t) {
  if (t <= r.t0 && t < r.tf) return {r.y0, 0.0};
  if (t >= r.tf) return {r.yf, 0.0};
  const double T = r.tf - r.t0;
  const double s = (t - r.t0) / T;
  const double s4 = s * s * s * s;
  const double shape = s4 * s * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + s * 70.0))));
  const double slope =
      s4 * (630.0 + s * (-2520.0 + s * (3780.0 + s * (-2520.0 + s * 630.0)))) / T;
  const double dy = r.yf - r.y0;
  return {r.y0 + shape * dy, slope * dy};
}

enum class Extension { hold_final_value };

struct NewRefConfig {
  double lambda2 = 0.0;
  double p2 = 0.0;
  double quadrature_abs_tol = 1e-10;
  double grid_step = 1e-3;
  Extension extension = Extension::hold_final_value;

  void validate() const {
    if (!(lambda2 > 0.0)) throw std::invalid_argument("NewRefConfig: lambda2 must be > 0");
    if (!(quadrature_abs_tol > 0.0))
      throw std::invalid_argument("NewRefConfig: quadrature_abs_tol must be > 0");
    if (!(grid_step > 0.0)) throw std::invalid_argument("NewRefConfig: grid_step must be > 0");
  }
};

inline NewRefConfig make_new_ref_config(const LinData& lin, double quadrature_abs_tol = 1e-10) {
  NewRefConfig cfg;
  cfg.lambda2 = lin.lambda2;
  cfg.p2 = lin.p2;
  cfg.quadrature_abs_tol = quadrature_abs_tol;
  return cfg;
}

/// Value and the two derivatives of the auxiliary reference.
struct NewRefSample {
  double value = 0.0;
  double rate = 0.0;
  double accel = 0.0;
};

namespace detail {

/// int_a^b exp(lambda (t - s)) lambda p2 y_ref(s) ds for t <= a <= b, by
/// adaptive Gauss-Kronrod (15 points) on panels of width <= 1/lambda.
inline double weighted_reference_integral(const NewRefConfig& cfg, const TransitionRef& r,
                                          double t, double a, double b) {
  if (!(b > a)) return 0.0;
  const double lam = cfg.lambda2;
  const double ymax = std::max(std::abs(r.y0), std::abs(r.yf));
  if (ymax == 0.0 || cfg.p2 == 0.0) return 0.0;
  auto f = [&](double s) { return std::exp(lam * (t - s)) * lam * cfg.p2 * yref_eval(r, s).value; };
  const auto panels = static_cast<int>(std::ceil((b - a) * lam));
  const double width = (b - a) / panels;
  const double tol = cfg.quadrature_abs_tol / panels;
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * width;
    const double hi = i + 1 == panels ? b : lo + width;
    // int |f| over the panel is bounded by |p2| ymax (e^{lam(t-lo)} - e^{lam(t-hi)}).
    const double l1_bound =
        std::abs(cfg.p2) * ymax * (std::exp(lam * (t - lo)) - std::exp(lam * (t - hi)));
    if (l1_bound == 0.0) continue;
    const double rel = std::max(tol / l1_bound, 4.0 * std::numeric_limits<double>::epsilon());
    double error = 0.0;
    sum += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 20, rel, &error);
    // Estimates below ~1e4 eps of the panel mass are rounding noise.
    if (error > tol && error > 1e4 * std::numeric_limits<double>::epsilon() * l1_bound)
      throw std::runtime_error("reference quadrature did not reach tolerance (error " +
                               std::to_string(error) + ")");
  }
  return sum;
}

}  // namespace detail

/// Bounded solution v(t) = -int_t^inf exp(lambda2 (t - s)) lambda2 p2 y_ref(s) ds,
/// with the constant pieces before t0 and after tf done in closed form.
inline double bounded_new_ref(const NewRefConfig& cfg, const TransitionRef& r, double t) {
  cfg.validate();
  r.validate();
  const double lam = cfg.lambda2;
  double v = 0.0;
  if (t < r.t0) v -= cfg.p2 * r.y0 * (1.0 - std::exp(lam * (t - r.t0)));
  const double a = std::max(t, r.t0);
  if (a < r.tf) v -= detail::weighted_reference_integral(cfg, r, t, a, r.tf);
  v -= cfg.p2 * r.yf * std::exp(lam * (t - std::max(t, r.tf)));
  return v;
}

/// Initial value making the auxiliary reference ODE's solution bounded.
inline double new_ref_ic(const NewRefConfig& cfg, const TransitionRef& r) {
  return bounded_new_ref(cfg, r, 0.0);
}

/// Direct (unmemoized) evaluation; derivatives come from the ODE itself.
inline NewRefSample new_ref_eval(const NewRefConfig& cfg, const TransitionRef& r, double t) {
  if (t >= r.tf) return {-cfg.p2 * r.yf, 0.0, 0.0};  // steady state of the hold
  const double lam = cfg.lambda2;
  const RefSample y = yref_eval(r, t);
  NewRefSample out;
  out.value = bounded_new_ref(cfg, r, t);
  out.rate = lam * out.value + lam * cfg.p2 * y.value;
  out.accel = lam * out.rate + lam * cfg.p2 * y.rate;
  return out;
}

/// Auxiliary reference tabulated once on a uniform grid over [0, tf] and
/// evaluated by cubic Hermite interpolation.  Immutable after construction.
class NewReference {
public:
  NewReference(const NewRefConfig& cfg, const TransitionRef& r) : cfg_(cfg), ref_(r) {
    cfg_.validate();
    ref_.validate();
    t_hi_ = std::max(ref_.tf, 0.0);
    if (t_hi_ <= 0.0) return;
    const auto n = static_cast<std::size_t>(std::ceil(t_hi_ / cfg_.grid_step - 1e-9));
    h_ = t_hi_ / static_cast<double>(n);
    values_.assign(n + 1, 0.0);
    rates_.assign(n + 1, 0.0);

    const double lam = cfg_.lambda2;
    const double decay = std::exp(-lam * h_);
    values_[n] = bounded_new_ref(cfg_, ref_, t_hi_);
    for (std::size_t i = n; i-- > 0;) {
      const double ti = node(i);
      values_[i] = decay * values_[i + 1] -
                   piece_integral(ti, node(i + 1));
    }
    for (std::size_t i = 0; i <= n; ++i)
      rates_[i] = lam * values_[i] + lam * cfg_.p2 * yref_eval(ref_, node(i)).value;
  }

  const NewRefConfig& config() const noexcept { return cfg_; }
  const TransitionRef& transition() const noexcept { return ref_; }
  double initial_value() const { return values_.empty() ? value_at(0.0) : values_.front(); }

  NewRefSample eval(double t) const {
    if (t >= ref_.tf) return {-cfg_.p2 * ref_.yf, 0.0, 0.0};
    const double lam = cfg_.lambda2;
    const RefSample y = yref_eval(ref_, t);
    NewRefSample out;
    out.value = value_at(t);
    out.rate = lam * out.value + lam * cfg_.p2 * y.value;
    out.accel = lam * out.rate + lam * cfg_.p2 * y.rate;
    return out;
  }

private:
  double node(std::size_t i) const { return static_cast<double>(i) * h_; }

  // Piece over [a, b] within the grid, split at t0 where y_ref changes form.
  double piece_integral(double a, double b) const {
    if (a < ref_.t0 && ref_.t0 < b) {
      const double lam = cfg_.lambda2;
      const double constant_part = cfg_.p2 * ref_.y0 * (1.0 - std::exp(lam * (a - ref_.t0)));
      return constant_part + detail::weighted_reference_integral(cfg_, ref_, a, ref_.t0, b);
    }
    return detail::weighted_reference_integral(cfg_, ref_, a, a, b);
  }

  double value_at(double t) const {
    if (t >= ref_.tf) return -cfg_.p2 * ref_.yf;
    if (values_.empty() || t < 0.0 || t >= t_hi_) return bounded_new_ref(cfg_, ref_, t);
    const auto i = std::min(static_cast<std::size_t>(t / h_), values_.size() - 2);
    const double th = (t - node(i)) / h_;
    const double th2 = th * th;
    const double th3 = th2 * th;
    return (2.0 * th3 - 3.0 * th2 + 1.0) * values_[i] + (th3 - 2.0 * th2 + th) * h_ * rates_[i] +
           (-2.0 * th3 + 3.0 * th2) * values_[i + 1] + (th3 - th2) * h_ * rates_[i + 1];
  }

  NewRefConfig cfg_;
  TransitionRef ref_;
  double t_hi_ = 0.0;
  double h_ = 0.0;
  std::vector<double> values_;
  std::vector<double> rates_;
};

/// Bounded initial value for a reference generated by an exosystem
/// w' = A_e w, y_ref = C_e w: solve lambda2 X - X A_e = lambda2 p2 C_e and
/// return -X w0.  Requires lambda2 not in the spectrum of A_e.
inline double sylvester_ic(double lambda2, double p2, const Eigen::MatrixXd& A_e,
                           const Eigen::RowVectorXd& C_e, const Eigen::VectorXd& w0) {
  if (!(lambda2 > 0.0)) throw std::invalid_argument("sylvester_ic: lambda2 must be > 0");
  const auto k = A_e.rows();
  if (A_e.cols() != k || C_e.size() != k || w0.size() != k)
    throw std::invalid_argument("sylvester_ic: dimension mismatch");
  const Eigen::MatrixXd S = lambda2 * Eigen::MatrixXd::Identity(k, k) - A_e;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(S.transpose());
  if (!lu.isInvertible()) throw std::invalid_argument("sylvester_ic: lambda2 is an eigenvalue of A_e");
  // X S = lambda2 p2 C_e  <=>  S^T X^T = lambda2 p2 C_e^T
  const Eigen::VectorXd Xt = lu.solve((lambda2 * p2 * C_e).transpose());
  return -Xt.dot(w0);
}

/// -int_0^inf exp(-lambda2 s) lambda2 p2 y(s) ds for any bounded y (tanh-sinh
/// type quadrature on the half line).
inline double bounded_ic(double lambda2, double p2, const std::function<double(double)>& y,
                         double rel_tol = 1e-12) {
  if (!(lambda2 > 0.0)) throw std::invalid_argument("bounded_ic: lambda2 must be > 0");
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double s) { return std::exp(-lambda2 * s) * lambda2 * p2 * y(s); };
  return -integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), rel_tol);
}

/// Forward integration of the unstable reference ODE from v(0) = v0, sampled
/// at the given increasing times.  Only meaningful on short horizons: errors
/// in v0 grow like exp(lambda2 t).
inline std::vector<double> forward_new_ref(const NewRefConfig& cfg, const TransitionRef& r,
                                           double v0, const std::vector<double>& times,
                                           const StepControl& ctl) {
  std::vector<double> out;
  out.reserve(times.size());
  if (times.empty()) return out;
  std::size_t next = 0;
  while (next < times.size() && times[next] <= 0.0) {
    out.push_back(v0);
    ++next;
  }
  const double lam = cfg.lambda2;
  auto rhs = [&](double t, const std::array<double, 1>& v) {
    return std::array<double, 1>{lam * v[0] + lam * cfg.p2 * yref_eval(r, t).value};
  };
  integrate_dopri5<1>(rhs, 0.0, std::array<double, 1>{v0}, times.back(), ctl,
                      [&](const DenseStep<1>& step) {
                        while (next < times.size() && times[next] <= step.t_end()) {
                          out.push_back(step(times[next])[0]);
                          ++next;
                        }
                      });
  return out;
}

}  // namespace nmpfunnel
