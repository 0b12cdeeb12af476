#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "relaxals/errors.hpp"
#include "relaxals/tensor_train.hpp"

namespace relaxals {

inline int qtt_level(Eigen::Index n) {
  int d = 0;
  Eigen::Index m = n;
  while (m > 1) {
    if (m % 2 != 0) throw NotPowerOfTwo("qtt: dimension is not a power of two");
    m /= 2;
    ++d;
  }
  if (d == 0) throw NotPowerOfTwo("qtt: dimension must be at least 2");
  return d;
}

/// Reshape a 2^d x 2^d matrix into an order-2d tensor with all mode sizes 2:
/// row bits first, then column bits, most significant bit first. With the
/// row-major mode convention used throughout, the flat tensor index is
/// i * 2^d + j, so the data is the row-major flattening of M.
inline Eigen::VectorXd qtt_reshape(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw Error("qtt_reshape: matrix must be square");
  const int d = qtt_level(M.rows());
  (void)d;
  const Eigen::Index n = M.rows();
  Eigen::VectorXd t(n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) t(i * n + j) = M(i, j);
  return t;
}

inline std::vector<Eigen::Index> qtt_dims(Eigen::Index n) {
  const int d = qtt_level(n);
  return std::vector<Eigen::Index>(2 * d, 2);
}

inline Eigen::MatrixXd qtt_unreshape(const Eigen::VectorXd& t, Eigen::Index n) {
  if (t.size() != n * n) throw Error("qtt_unreshape: size mismatch");
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = t(i * n + j);
  return M;
}

inline TTTensor qtt_tensor(const Eigen::MatrixXd& M, Eigen::Index max_rank = 0,
                           double tol = 1e-12) {
  return tt_svd(qtt_reshape(M), qtt_dims(M.rows()), max_rank, tol);
}

namespace detail {

// Interleaves zeros between the bits of x: bit mu of x lands at position 2*mu.
inline std::int64_t spread_bits(std::int64_t x, int bits) {
  std::int64_t out = 0;
  for (int t = 0; t < bits; ++t)
    if ((x >> t) & 1) out |= std::int64_t(1) << (2 * t);
  return out;
}

}  // namespace detail

/// MPO for the Lyapunov operator X -> A X + X A^T on 2^d x 2^d matrices in
/// QTT index order (row bits then column bits, MSB first). Built by TT-SVD
/// of the dense operator with truncation 1e-12; memory-bounded to d <= 6.
inline TTOperator qtt_operator(const Eigen::MatrixXd& A, double tol = 1e-12) {
  const int d = qtt_level(A.rows());
  if (A.rows() != A.cols()) throw Error("qtt_operator: A must be square");
  if (d > 6)
    throw TooLarge("qtt_operator: dense operator construction limited to d <= 6");
  const Eigen::Index n = A.rows();
  const int modes = 2 * d;  // state modes; operator tensor has 4^modes entries
  const std::int64_t total = std::int64_t(1) << (4 * d);
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(total);
  // Tensor mode mu holds (out bit, in bit) of state mode mu, value 2*out+in.
  // Row-major over modes => linear index = 2*spread(outIdx) + spread(inIdx),
  // where outIdx/inIdx are the row-major state indices i*2^d + j.
  auto place = [&](Eigen::Index oi, Eigen::Index oj, Eigen::Index ii,
                   Eigen::Index ij, double v) {
    const std::int64_t out_idx = static_cast<std::int64_t>(oi) * n + oj;
    const std::int64_t in_idx = static_cast<std::int64_t>(ii) * n + ij;
    dense(2 * detail::spread_bits(out_idx, modes) +
          detail::spread_bits(in_idx, modes)) += v;
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index ip = 0; ip < n; ++ip)
        if (A(i, ip) != 0.0) place(i, j, ip, j, A(i, ip));
      for (Eigen::Index jp = 0; jp < n; ++jp)
        if (A(j, jp) != 0.0) place(i, j, i, jp, A(j, jp));
    }

  const TTTensor packed =
      tt_svd(dense, std::vector<Eigen::Index>(modes, 4), 0, tol);
  TTOperator op;
  for (const auto& core : packed.cores) {
    TTOpCore oc;
    oc.slices.assign(2, std::vector<Eigen::MatrixXd>(2));
    for (int out = 0; out < 2; ++out)
      for (int in = 0; in < 2; ++in) oc.slices[out][in] = core.slices[2 * out + in];
    op.cores.push_back(std::move(oc));
  }
  return op;
}

}  // namespace relaxals
