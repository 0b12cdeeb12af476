#pragma once

#include <Eigen/Dense>
#include <utility>

#include "relaxals/errors.hpp"
#include "relaxals/factor_core.hpp"
#include "relaxals/objective.hpp"

namespace relaxals {

/// Fully general strongly convex quadratic over m x n matrices,
///   f(X) = 1/2 vec(X)^T C vec(X) - <B, X>,
/// with dense SPD curvature C on vectorized X (column-major). Oracle
/// testbed only; intended for m*n up to a few hundred.
struct DenseQuadraticData {
  Eigen::MatrixXd curvature;  // (m n) x (m n), SPD
  Eigen::MatrixXd linear;     // m x n
  Eigen::Index m, n;

  DenseQuadraticData(Eigen::MatrixXd C, Eigen::MatrixXd B)
      : curvature(std::move(C)), linear(std::move(B)),
        m(linear.rows()), n(linear.cols()) {
    if (curvature.rows() != m * n || curvature.cols() != m * n)
      throw Error("DenseQuadraticData: curvature size mismatch");
    const double asym = (curvature - curvature.transpose()).norm();
    if (!(asym <= 1e-12 * curvature.norm()))
      throw Error("DenseQuadraticData: curvature not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(curvature);
    if (!(eig.eigenvalues()(0) > 0.0))
      throw Error("DenseQuadraticData: curvature not positive definite");
  }
};

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> vec(const Eigen::MatrixXd& X) {
  return {X.data(), X.size()};
}

// d vec(U V^T) / d vec(U): (m n) x (m k), entry ((i + m j), (i + m r)) = V(j, r).
inline Eigen::MatrixXd uvT_jacobian_U(const Eigen::MatrixXd& V, Eigen::Index m) {
  const Eigen::Index n = V.rows(), k = V.cols();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m * n, m * k);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index i = 0; i < m; ++i) K(i + m * j, i + m * r) = V(j, r);
  return K;
}

// d vec(U V^T) / d vec(V): (m n) x (n k), entry ((i + m j), (j + n r)) = U(i, r).
inline Eigen::MatrixXd uvT_jacobian_V(const Eigen::MatrixXd& U, Eigen::Index n) {
  const Eigen::Index m = U.rows(), k = U.cols();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m * n, n * k);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index i = 0; i < m; ++i) K(i + m * j, j + n * r) = U(i, r);
  return K;
}

inline Eigen::MatrixXd restricted_solve(const Eigen::MatrixXd& K,
                                        const DenseQuadraticData& data,
                                        Eigen::Index rows, Eigen::Index k,
                                        double rank_tol) {
  const Eigen::MatrixXd G = K.transpose() * data.curvature * K;
  const Eigen::VectorXd rhs = K.transpose() * vec(data.linear);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  const auto& ev = eig.eigenvalues();
  if (!(ev(0) > rank_tol * ev(ev.size() - 1)))
    throw SubproblemSingular(0, "dense quadratic solve: restricted system singular");
  const Eigen::VectorXd sol =
      eig.eigenvectors() *
      (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
  return Eigen::Map<const Eigen::MatrixXd>(sol.data(), rows, k);
}

}  // namespace detail

class DenseQuadraticObjective final : public Objective {
 public:
  explicit DenseQuadraticObjective(DenseQuadraticData data,
                                   double rank_tol = kDefaultRankTol)
      : data_(std::move(data)), rank_tol_(rank_tol),
        rhs_norm_(detail::vec(data_.linear).norm()) {}

  const DenseQuadraticData& data() const { return data_; }

  Eigen::Index rows() const override { return data_.m; }
  Eigen::Index cols() const override { return data_.n; }

  Eigen::MatrixXd solve_U(const Eigen::MatrixXd& V) const override {
    return detail::restricted_solve(detail::uvT_jacobian_U(V, data_.m), data_,
                                    data_.m, V.cols(), rank_tol_);
  }

  Eigen::MatrixXd solve_V(const Eigen::MatrixXd& U) const override {
    return detail::restricted_solve(detail::uvT_jacobian_V(U, data_.n), data_,
                                    data_.n, U.cols(), rank_tol_);
  }

  /// Relative residual of the unconstrained optimality system,
  /// || C vec(X) - vec(B) || / || vec(B) ||. Proportional to the distance
  /// to the global minimizer, so its decay rate is the rate of X_l.
  double error(const FactorPair& pair) const override {
    const Eigen::MatrixXd X = pair.product();
    const Eigen::VectorXd r =
        data_.curvature * detail::vec(X) - detail::vec(data_.linear);
    return r.norm() / rhs_norm_;
  }

  double value(const Eigen::MatrixXd& X) const override {
    const auto x = detail::vec(X);
    return 0.5 * x.dot(data_.curvature * x) - x.dot(detail::vec(data_.linear));
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& X) const override {
    const Eigen::VectorXd g =
        data_.curvature * detail::vec(X) - detail::vec(data_.linear);
    return Eigen::Map<const Eigen::MatrixXd>(g.data(), data_.m, data_.n);
  }

  Eigen::MatrixXd hessian_apply(const Eigen::MatrixXd& Z) const override {
    const Eigen::VectorXd h = data_.curvature * detail::vec(Z);
    return Eigen::Map<const Eigen::MatrixXd>(h.data(), data_.m, data_.n);
  }

 private:
  DenseQuadraticData data_;
  double rank_tol_;
  double rhs_norm_;
};

}  // namespace relaxals
