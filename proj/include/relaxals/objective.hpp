#pragma once

#include <Eigen/Dense>

#include "relaxals/errors.hpp"

namespace relaxals {

struct FactorPair;

/// A strongly convex (here: quadratic) objective f over m x n matrices,
/// exposed through everything the relaxed sweep and the spectral oracle
/// need: exact block minimizers, the run's error metric, and first/second
/// derivative access.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;

  /// Exact minimizer of U -> F(U, V) for full-column-rank V.
  virtual Eigen::MatrixXd solve_U(const Eigen::MatrixXd& V) const = 0;
  /// Exact minimizer of V -> F(U, V) for full-column-rank U.
  virtual Eigen::MatrixXd solve_V(const Eigen::MatrixXd& U) const = 0;

  /// The error metric the run reports (rel_err, proj_err, ...).
  virtual double error(const FactorPair& pair) const = 0;

  virtual double value(const Eigen::MatrixXd& X) const = 0;
  virtual Eigen::MatrixXd gradient(const Eigen::MatrixXd& X) const = 0;
  /// Action of the (constant) Hessian of f on a direction Z.
  virtual Eigen::MatrixXd hessian_apply(const Eigen::MatrixXd& Z) const = 0;
};

}  // namespace relaxals
