#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "relaxals/errors.hpp"
#include "relaxals/factor_core.hpp"
#include "relaxals/objective.hpp"
#include "relaxals/qr.hpp"

namespace relaxals {

/// A = (n+1)^2 tridiag(-1, 2, -1), the scaled 1D Dirichlet Laplacian.
inline Eigen::MatrixXd tridiag_laplacian(int n) {
  const double scale = static_cast<double>(n + 1) * (n + 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = 2.0 * scale;
    if (i + 1 < n) {
      A(i, i + 1) = -scale;
      A(i + 1, i) = -scale;
    }
  }
  return A;
}

/// Data of the Lyapunov equation A X + X A^T = B with SPD A and symmetric B,
/// seen as the optimality condition of f(X) = 1/2 <AX + XA^T, X> - <B, X>.
struct LyapunovData {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  LyapunovData(Eigen::MatrixXd A_in, Eigen::MatrixXd B_in)
      : A(std::move(A_in)), B(std::move(B_in)) {
    const double asym = (A - A.transpose()).norm();
    if (!(asym <= 1e-12 * std::max(A.norm(), 1e-300)))
      throw Error("LyapunovData: A not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    if (!(eig.eigenvalues()(0) > 0.0))
      throw Error("LyapunovData: A not positive definite");
  }
};

/// Solves A U + U M = C for SPD A and symmetric M with spectrum above
/// -lambda_min(A), via the eigendecomposition M = W L W^T and per-column
/// shifted solves (A + l_i I) u_i = (C W)_i.
inline Eigen::MatrixXd sylvester_small(const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& M,
                                       const Eigen::MatrixXd& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  const Eigen::VectorXd lam = eig.eigenvalues();
  const Eigen::MatrixXd& W = eig.eigenvectors();
  const Eigen::MatrixXd CW = C * W;
  Eigen::MatrixXd Ut(C.rows(), C.cols());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    Eigen::MatrixXd shifted = A;
    shifted.diagonal().array() += lam(i);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success ||
        !(d.minCoeff() > 1e-14 * d.maxCoeff()))
      throw IllConditionedShift("sylvester_small: A + lambda_" +
                                std::to_string(i) + " I nearly singular");
    Ut.col(i) = ldlt.solve(CW.col(i));
  }
  return Ut * W.transpose();
}

/// Orthogonal projection of Z onto the tangent space of the rank-k manifold
/// at U V^T: P_U Z + Z P_V - P_U Z P_V, with projectors from thin QR of the
/// factors.
inline Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& U,
                                       const Eigen::MatrixXd& V,
                                       const Eigen::MatrixXd& Z,
                                       double rank_tol = kDefaultRankTol) {
  auto frame = [rank_tol](const Eigen::MatrixXd& M) {
    auto [Q, R] = qr_thin(M);
    const double dmax = R.diagonal().cwiseAbs().maxCoeff();
    const double dmin = R.diagonal().cwiseAbs().minCoeff();
    if (!(dmin > rank_tol * std::max(dmax, 1e-300)))
      throw RankCollapse("tangent_project: factor rank-deficient");
    return Q;
  };
  const Eigen::MatrixXd Qu = frame(U);
  const Eigen::MatrixXd Qv = frame(V);
  const Eigen::MatrixXd left = Qu * (Qu.transpose() * Z);
  return left + (Z - left) * Qv * Qv.transpose();
}

/// Block minimizer of F(U, V) = f(U V^T) for an orthonormal frame V:
/// solves A U + U (V^T A V) = B V.
inline Eigen::MatrixXd lyapunov_solve_U(const Eigen::MatrixXd& V,
                                        const LyapunovData& data) {
  const Eigen::Index k = V.cols();
  const double ortho =
      (V.transpose() * V - Eigen::MatrixXd::Identity(k, k)).norm();
  if (!(ortho <= 1e-10))
    throw FrameNotOrthonormal("lyapunov_solve_U: V^T V != I");
  return sylvester_small(data.A, V.transpose() * data.A * V, data.B * V);
}

/// proj_err = || P_X (A X + X A^T - B) ||_F / || P_X (B) ||_F.
inline double lyapunov_proj_err(const FactorPair& pair,
                                const LyapunovData& data) {
  const Eigen::MatrixXd X = pair.product();
  const Eigen::MatrixXd R = data.A * X + X * data.A.transpose() - data.B;
  const double denom = tangent_project(pair.U, pair.V, data.B).norm();
  if (!(denom > 0.0))
    throw ZeroProjectedB("lyapunov_proj_err: projected B vanishes");
  return tangent_project(pair.U, pair.V, R).norm() / denom;
}

class LyapunovObjective final : public Objective {
 public:
  explicit LyapunovObjective(LyapunovData data)
      : data_(std::move(data)), a_eig_(data_.A) {}

  const LyapunovData& data() const { return data_; }

  Eigen::Index rows() const override { return data_.A.rows(); }
  Eigen::Index cols() const override { return data_.A.rows(); }

  Eigen::MatrixXd solve_U(const Eigen::MatrixXd& V) const override {
    check_frame(V, "solve_U");
    return cached_sylvester(V.transpose() * data_.A * V, data_.B * V);
  }

  // By symmetry of f in this problem: A V + V (U^T A U) = B^T U.
  Eigen::MatrixXd solve_V(const Eigen::MatrixXd& U) const override {
    check_frame(U, "solve_V");
    return cached_sylvester(U.transpose() * data_.A * U,
                            data_.B.transpose() * U);
  }

  double error(const FactorPair& pair) const override {
    return lyapunov_proj_err(pair, data_);
  }

  double value(const Eigen::MatrixXd& X) const override {
    const Eigen::MatrixXd AX = data_.A * X;
    return 0.5 * (AX + X * data_.A.transpose()).cwiseProduct(X).sum() -
           data_.B.cwiseProduct(X).sum();
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& X) const override {
    return data_.A * X + X * data_.A.transpose() - data_.B;
  }

  Eigen::MatrixXd hessian_apply(const Eigen::MatrixXd& Z) const override {
    return data_.A * Z + Z * data_.A.transpose();
  }

 private:
  static void check_frame(const Eigen::MatrixXd& F, const char* where) {
    const Eigen::Index k = F.cols();
    const double ortho =
        (F.transpose() * F - Eigen::MatrixXd::Identity(k, k)).norm();
    if (!(ortho <= 1e-10))
      throw FrameNotOrthonormal(std::string("LyapunovObjective::") + where +
                                ": frame not orthonormal");
  }

  // Same solve as sylvester_small, but reusing the one-time
  // eigendecomposition of A so repeated sweeps cost O(n^2 k) each.
  Eigen::MatrixXd cached_sylvester(const Eigen::MatrixXd& M,
                                   const Eigen::MatrixXd& C) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    const Eigen::VectorXd lam = eig.eigenvalues();
    const Eigen::MatrixXd& W = eig.eigenvectors();
    const Eigen::MatrixXd CW = a_eig_.eigenvectors().transpose() * (C * W);
    Eigen::MatrixXd Ut(C.rows(), C.cols());
    const Eigen::VectorXd& a_lam = a_eig_.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const Eigen::ArrayXd denom = a_lam.array() + lam(i);
      if (!(denom.abs().minCoeff() > 1e-14 * denom.abs().maxCoeff()))
        throw IllConditionedShift("LyapunovObjective: shifted solve nearly singular");
      Ut.col(i) = CW.col(i).array() / denom;
    }
    return a_eig_.eigenvectors() * Ut * W.transpose();
  }

  LyapunovData data_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> a_eig_;
};

}  // namespace relaxals
