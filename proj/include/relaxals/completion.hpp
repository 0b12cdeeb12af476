#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "relaxals/errors.hpp"
#include "relaxals/factor_core.hpp"
#include "relaxals/objective.hpp"

namespace relaxals {

struct IndexPair {
  int i = 0;
  int j = 0;
};

/// |Omega| = round(OS * (2nk - k^2)) index pairs of an n x n matrix, drawn
/// uniformly without replacement. Deterministic for a fixed seed.
inline std::vector<IndexPair> sample_omega(int n, int k, double os,
                                           std::uint64_t seed) {
  const double dof = 2.0 * n * k - static_cast<double>(k) * k;
  const auto count = static_cast<std::int64_t>(std::llround(os * dof));
  const std::int64_t total = static_cast<std::int64_t>(n) * n;
  if (count > total)
    throw TooManySamples("sample_omega: requested " + std::to_string(count) +
                         " of " + std::to_string(total) + " entries");
  std::vector<std::int64_t> all(total);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: only the first `count` positions are needed.
  for (std::int64_t t = 0; t < count; ++t) {
    std::uniform_int_distribution<std::int64_t> dist(t, total - 1);
    std::swap(all[t], all[dist(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  std::vector<IndexPair> omega(count);
  for (std::int64_t t = 0; t < count; ++t)
    omega[t] = {static_cast<int>(all[t] / n), static_cast<int>(all[t] % n)};
  return omega;
}

/// Observed entries of an m x n matrix A on an index set Omega, stored twice:
/// grouped by row for solve_U and by column for solve_V.
class CompletionData {
 public:
  CompletionData(int m, int n, std::vector<IndexPair> omega,
                 std::vector<double> values)
      : m_(m), n_(n), by_row_(m), by_col_(n) {
    if (omega.size() != values.size())
      throw Error("CompletionData: omega/values size mismatch");
    std::vector<std::int64_t> seen;
    seen.reserve(omega.size());
    for (std::size_t t = 0; t < omega.size(); ++t) {
      const auto [i, j] = omega[t];
      if (i < 0 || i >= m || j < 0 || j >= n)
        throw Error("CompletionData: index out of range");
      seen.push_back(static_cast<std::int64_t>(i) * n + j);
      by_row_[i].push_back({j, values[t]});
      by_col_[j].push_back({i, values[t]});
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw Error("CompletionData: duplicate index pair");
    count_ = static_cast<std::int64_t>(omega.size());
    norm_sq_ = 0.0;
    for (double v : values) norm_sq_ += v * v;
  }

  int rows() const { return m_; }
  int cols() const { return n_; }
  std::int64_t count() const { return count_; }
  double observed_norm() const { return std::sqrt(norm_sq_); }

  struct Entry {
    int index;     // column index in by-row storage, row index in by-column
    double value;
  };
  const std::vector<Entry>& row(int i) const { return by_row_[i]; }
  const std::vector<Entry>& col(int j) const { return by_col_[j]; }

  /// Coordinate text format: header "m n count", then one "i j value" line
  /// per observed entry (0-based indices).
  void write(std::ostream& os) const {
    os << m_ << ' ' << n_ << ' ' << count_ << '\n';
    std::ostringstream line;
    line.precision(17);
    for (int i = 0; i < m_; ++i)
      for (const auto& e : by_row_[i]) {
        line.str("");
        line << i << ' ' << e.index << ' ' << e.value << '\n';
        os << line.str();
      }
  }

  static CompletionData read(std::istream& is) {
    int m = 0, n = 0;
    std::int64_t count = 0;
    if (!(is >> m >> n >> count))
      throw Error("CompletionData::read: bad header");
    std::vector<IndexPair> omega(count);
    std::vector<double> values(count);
    for (std::int64_t t = 0; t < count; ++t)
      if (!(is >> omega[t].i >> omega[t].j >> values[t]))
        throw Error("CompletionData::read: truncated entry list");
    return CompletionData(m, n, std::move(omega), std::move(values));
  }

 private:
  int m_, n_;
  std::int64_t count_ = 0;
  double norm_sq_ = 0.0;
  std::vector<std::vector<Entry>> by_row_;
  std::vector<std::vector<Entry>> by_col_;
};

namespace detail {

/// Row-wise exact least-squares solve shared by solve_U and solve_V.
template <typename Rows>
Eigen::MatrixXd completion_normal_solve(const Rows& rows, int nrows,
                                        const Eigen::MatrixXd& W,
                                        double rank_tol) {
  const Eigen::Index k = W.cols();
  Eigen::MatrixXd out(nrows, k);
  for (int i = 0; i < nrows; ++i) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (const auto& e : rows(i)) {
      const auto w = W.row(e.index);
      G.noalias() += w.transpose() * w;
      rhs.noalias() += e.value * w.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    const auto& ev = eig.eigenvalues();
    if (!(ev(0) > rank_tol * std::max(ev(k - 1), 1e-300)))
      throw SubproblemSingular(
          i, "completion solve: singular normal matrix at row " +
                 std::to_string(i));
    out.row(i) = eig.eigenvectors() *
                 (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
  }
  return out;
}

}  // namespace detail

/// Exact row-wise minimizer of U -> 1/2 || P_Omega(A - U V^T) ||_F^2.
inline Eigen::MatrixXd completion_solve_U(const Eigen::MatrixXd& V,
                                          const CompletionData& data,
                                          double rank_tol = kDefaultRankTol) {
  return detail::completion_normal_solve(
      [&data](int i) -> const std::vector<CompletionData::Entry>& {
        return data.row(i);
      },
      data.rows(), V, rank_tol);
}

inline Eigen::MatrixXd completion_solve_V(const Eigen::MatrixXd& U,
                                          const CompletionData& data,
                                          double rank_tol = kDefaultRankTol) {
  return detail::completion_normal_solve(
      [&data](int j) -> const std::vector<CompletionData::Entry>& {
        return data.col(j);
      },
      data.cols(), U, rank_tol);
}

/// rel_err = || P_Omega(A - U V^T) ||_F / || P_Omega(A) ||_F.
inline double completion_error(const FactorPair& pair,
                               const CompletionData& data) {
  if (!(data.observed_norm() > 0.0))
    throw ZeroData("completion_error: observed entries all zero");
  double num_sq = 0.0;
  for (int i = 0; i < data.rows(); ++i) {
    for (const auto& e : data.row(i)) {
      const double r = e.value - pair.U.row(i).dot(pair.V.row(e.index));
      num_sq += r * r;
    }
  }
  return std::sqrt(num_sq) / data.observed_norm();
}

class CompletionObjective final : public Objective {
 public:
  explicit CompletionObjective(CompletionData data,
                               double rank_tol = kDefaultRankTol)
      : data_(std::move(data)), rank_tol_(rank_tol) {}

  const CompletionData& data() const { return data_; }

  Eigen::Index rows() const override { return data_.rows(); }
  Eigen::Index cols() const override { return data_.cols(); }

  Eigen::MatrixXd solve_U(const Eigen::MatrixXd& V) const override {
    return completion_solve_U(V, data_, rank_tol_);
  }
  Eigen::MatrixXd solve_V(const Eigen::MatrixXd& U) const override {
    return completion_solve_V(U, data_, rank_tol_);
  }
  double error(const FactorPair& pair) const override {
    return completion_error(pair, data_);
  }

  double value(const Eigen::MatrixXd& X) const override {
    double sum = 0.0;
    for (int i = 0; i < data_.rows(); ++i)
      for (const auto& e : data_.row(i)) {
        const double r = X(i, e.index) - e.value;
        sum += r * r;
      }
    return 0.5 * sum;
  }

  // grad f = P_Omega(X - A)
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& X) const override {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(data_.rows(), data_.cols());
    for (int i = 0; i < data_.rows(); ++i)
      for (const auto& e : data_.row(i)) G(i, e.index) = X(i, e.index) - e.value;
    return G;
  }

  // hess f = P_Omega
  Eigen::MatrixXd hessian_apply(const Eigen::MatrixXd& Z) const override {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(data_.rows(), data_.cols());
    for (int i = 0; i < data_.rows(); ++i)
      for (const auto& e : data_.row(i)) H(i, e.index) = Z(i, e.index);
    return H;
  }

 private:
  CompletionData data_;
  double rank_tol_;
};

}  // namespace relaxals
