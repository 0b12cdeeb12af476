#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "relaxals/errors.hpp"
#include "relaxals/trace.hpp"

namespace relaxals {

/// Optimal relaxation parameter from the squared Jacobi rate:
/// omega_opt = 2 / (1 + sqrt(1 - beta^2)), always in [1, 2).
inline double omega_opt(double beta_sq) {
  if (!(beta_sq >= 0.0 && beta_sq < 1.0))
    throw DomainError("omega_opt: beta_sq must lie in [0,1), got " +
                      std::to_string(beta_sq));
  return 2.0 / (1.0 + std::sqrt(1.0 - beta_sq));
}

/// Predicted spectral radius of the two-block SOR error iteration on the
/// invariant complement of the kernel, as a function of omega and the
/// Jacobi rate beta (piecewise: analytic branch below omega_opt, omega - 1
/// above).
inline double rho_predicted(double omega, double beta) {
  if (!(omega > 0.0 && omega < 2.0))
    throw DomainError("rho_predicted: omega must lie in (0,2)");
  if (!(beta >= 0.0 && beta < 1.0))
    throw DomainError("rho_predicted: beta must lie in [0,1)");
  const double w_opt = omega_opt(beta * beta);
  if (omega <= w_opt) {
    const double disc = 1.0 - omega + 0.25 * omega * omega * beta * beta;
    return 1.0 - omega + 0.5 * omega * omega * beta * beta +
           omega * beta * std::sqrt(std::max(disc, 0.0));
  }
  return omega - 1.0;
}

inline constexpr double kBetaSqClampMax = 1.0 - 1e-12;

/// beta^2 ~ sqrt(err_{ell+2} / err_ell), clamped into [0, 1 - 1e-12].
/// Both entries must exist in the trace and have been produced under
/// omega = 1.
inline double estimate_beta_sq(const ResidualTrace& trace, int ell,
                               bool* clamped = nullptr) {
  const TraceEntry* e0 = nullptr;
  const TraceEntry* e2 = nullptr;
  for (const auto& e : trace.entries) {
    if (e.iter == ell) e0 = &e;
    if (e.iter == ell + 2) e2 = &e;
  }
  if (!e0 || !e2)
    throw InsufficientTrace("estimate_beta_sq: trace lacks entries " +
                            std::to_string(ell) + " and " +
                            std::to_string(ell + 2));
  if (!(e0->err > 0.0))
    throw NonPositiveError("estimate_beta_sq: err at iteration " +
                           std::to_string(ell) + " is not positive");
  if (e0->omega_used != 1.0 || e2->omega_used != 1.0)
    throw DomainError("estimate_beta_sq: entries not recorded under omega = 1");
  double est = std::sqrt(e2->err / e0->err);
  if (clamped) *clamped = false;
  if (est < 0.0) est = 0.0;
  if (est > kBetaSqClampMax) {
    est = kBetaSqClampMax;
    if (clamped) *clamped = true;
  }
  return est;
}

/// Decides the relaxation parameter per iteration. In auto mode the run
/// starts as plain AO (omega = 1); at activation_iter the rate of the
/// standard method is read off the trace, converted to omega_opt via the
/// two-block SOR formula, and frozen for the rest of the run.
class ShiftController {
 public:
  enum class Mode { fixed, automatic };

  static ShiftController fixed(double omega) {
    ShiftController c;
    c.mode_ = Mode::fixed;
    c.fixed_omega_ = omega;
    return c;
  }

  static ShiftController automatic(int activation_iter) {
    ShiftController c;
    c.mode_ = Mode::automatic;
    c.activation_iter_ = activation_iter;
    return c;
  }

  Mode mode() const { return mode_; }
  int activation_iter() const { return activation_iter_; }
  std::optional<double> beta_sq_est() const { return beta_sq_est_; }
  std::optional<double> frozen_omega() const { return frozen_omega_; }
  bool estimate_was_clamped() const { return estimate_clamped_; }

  /// Omega to use for the sweep with index `iter` (0-based), given the trace
  /// recorded so far. On InsufficientTrace in auto mode the controller keeps
  /// omega = 1 and retries at the next iteration.
  double next_omega(const ResidualTrace& trace, int iter) {
    if (mode_ == Mode::fixed) return fixed_omega_;
    if (frozen_omega_) return *frozen_omega_;
    if (iter < activation_iter_) return 1.0;
    const int last = trace.entries.empty() ? -1 : trace.back().iter;
    try {
      bool clamped = false;
      beta_sq_est_ = estimate_beta_sq(trace, last - 2, &clamped);
      estimate_clamped_ = clamped;
      frozen_omega_ = omega_opt(*beta_sq_est_);
      return *frozen_omega_;
    } catch (const InsufficientTrace&) {
      return 1.0;
    }
  }

 private:
  Mode mode_ = Mode::fixed;
  double fixed_omega_ = 1.0;
  int activation_iter_ = 0;
  std::optional<double> beta_sq_est_;
  std::optional<double> frozen_omega_;
  bool estimate_clamped_ = false;
};

}  // namespace relaxals
