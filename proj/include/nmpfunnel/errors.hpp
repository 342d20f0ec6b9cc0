#pragma once

#include <stdexcept>
#include <string>

namespace nmpfunnel {

/// Base for conditions a trial integration step may run into and recover
/// from by shrinking the step (funnel wall hit, passive angle left the domain).
class GuardError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The passive-joint angle left the set where cos(beta) > 2/3.
class DomainError : public GuardError {
public:
  explicit DomainError(double beta)
      : GuardError("beta = " + std::to_string(beta) +
                   " outside the domain cos(beta) > 2/3"),
        beta_(beta) {}

  double beta() const noexcept { return beta_; }

private:
  double beta_;
};

/// phi * |e| >= 1 at one level of the error cascade.
class FunnelViolation : public GuardError {
public:
  FunnelViolation(int level, double phi, double error)
      : GuardError("funnel violation at level " + std::to_string(level) +
                   ": phi*|e| = " + std::to_string(phi * (error < 0 ? -error : error))),
        level_(level), phi_(phi), error_(error) {}

  int level() const noexcept { return level_; }
  double phi() const noexcept { return phi_; }
  double error() const noexcept { return error_; }

private:
  int level_;
  double phi_;
  double error_;
};

/// Step size fell below the configured minimum, or a non-finite state.
class IntegratorFailure : public std::runtime_error {
public:
  IntegratorFailure(const std::string& what, double t)
      : std::runtime_error(what), t_(t) {}

  double t() const noexcept { return t_; }

private:
  double t_;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmpfunnel
