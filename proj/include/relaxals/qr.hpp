#pragma once

#include <Eigen/Dense>

namespace relaxals {

struct ThinQR {
  Eigen::MatrixXd Q;  // p x k, orthonormal columns
  Eigen::MatrixXd R;  // k x k, upper triangular, nonnegative diagonal
};

/// Thin QR factorization M = QR with the sign convention that the diagonal
/// of R is nonnegative. For full-rank M this makes the factorization unique,
/// which in turn makes the gauge chosen by the sweep deterministic.
/// Rank-deficient input is allowed; R then carries (near-)zero diagonal
/// entries and Q is still orthonormal.
inline ThinQR qr_thin(const Eigen::MatrixXd& M) {
  const Eigen::Index k = M.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), k);
  Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (R(i, i) < 0.0) {
      R.row(i) = -R.row(i);
      Q.col(i) = -Q.col(i);
    }
  }
  return {std::move(Q), std::move(R)};
}

}  // namespace relaxals
