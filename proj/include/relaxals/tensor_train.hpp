#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "relaxals/errors.hpp"
#include "relaxals/factor_core.hpp"
#include "relaxals/qr.hpp"

namespace relaxals {

inline constexpr std::int64_t kDenseTensorBound = std::int64_t(1) << 26;

/// One TT core of shape k_left x n x k_right, stored as n slice matrices.
struct TTCore {
  std::vector<Eigen::MatrixXd> slices;

  Eigen::Index left() const { return slices.empty() ? 0 : slices[0].rows(); }
  Eigen::Index modes() const { return static_cast<Eigen::Index>(slices.size()); }
  Eigen::Index right() const { return slices.empty() ? 0 : slices[0].cols(); }

  /// Left unfolding, (k_left * n) x k_right; row index a * n + i.
  Eigen::MatrixXd left_unfold() const {
    Eigen::MatrixXd L(left() * modes(), right());
    for (Eigen::Index i = 0; i < modes(); ++i)
      for (Eigen::Index a = 0; a < left(); ++a)
        L.row(a * modes() + i) = slices[i].row(a);
    return L;
  }

  /// Right unfolding, k_left x (n * k_right); column index i * k_right + b.
  Eigen::MatrixXd right_unfold() const {
    Eigen::MatrixXd R(left(), modes() * right());
    for (Eigen::Index i = 0; i < modes(); ++i)
      R.middleCols(i * right(), right()) = slices[i];
    return R;
  }

  static TTCore from_left_unfold(const Eigen::MatrixXd& L, Eigen::Index kl,
                                 Eigen::Index n) {
    TTCore c;
    c.slices.assign(n, Eigen::MatrixXd(kl, L.cols()));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index a = 0; a < kl; ++a)
        c.slices[i].row(a) = L.row(a * n + i);
    return c;
  }

  static TTCore from_right_unfold(const Eigen::MatrixXd& R, Eigen::Index n,
                                  Eigen::Index kr) {
    TTCore c;
    c.slices.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i)
      c.slices.push_back(R.middleCols(i * kr, kr));
    return c;
  }
};

struct TTTensor {
  std::vector<TTCore> cores;

  Eigen::Index order() const { return static_cast<Eigen::Index>(cores.size()); }
  std::vector<Eigen::Index> dims() const {
    std::vector<Eigen::Index> d;
    for (const auto& c : cores) d.push_back(c.modes());
    return d;
  }
  /// Interface ranks k_1 .. k_{d-1}.
  std::vector<Eigen::Index> ranks() const {
    std::vector<Eigen::Index> r;
    for (Eigen::Index mu = 0; mu + 1 < order(); ++mu)
      r.push_back(cores[mu].right());
    return r;
  }

  void check_consistent() const {
    if (cores.empty()) throw Error("TTTensor: empty");
    if (cores.front().left() != 1 || cores.back().right() != 1)
      throw Error("TTTensor: boundary ranks must be 1");
    for (Eigen::Index mu = 0; mu + 1 < order(); ++mu)
      if (cores[mu].right() != cores[mu + 1].left())
        throw Error("TTTensor: adjacent rank mismatch at interface " +
                    std::to_string(mu));
  }

  void write(std::ostream& os) const {
    os.precision(17);
    os << order() << '\n';
    for (const auto& c : cores) {
      os << c.left() << ' ' << c.modes() << ' ' << c.right() << '\n';
      for (Eigen::Index a = 0; a < c.left(); ++a)
        for (Eigen::Index i = 0; i < c.modes(); ++i)
          for (Eigen::Index b = 0; b < c.right(); ++b)
            os << c.slices[i](a, b)
               << ((a == c.left() - 1 && i == c.modes() - 1 &&
                    b == c.right() - 1)
                       ? '\n'
                       : ' ');
    }
  }

  static TTTensor read(std::istream& is) {
    Eigen::Index d = 0;
    if (!(is >> d) || d <= 0) throw Error("TTTensor::read: bad header");
    TTTensor tt;
    for (Eigen::Index mu = 0; mu < d; ++mu) {
      Eigen::Index kl, n, kr;
      if (!(is >> kl >> n >> kr)) throw Error("TTTensor::read: bad core header");
      TTCore c;
      c.slices.assign(n, Eigen::MatrixXd(kl, kr));
      for (Eigen::Index a = 0; a < kl; ++a)
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index b = 0; b < kr; ++b)
            if (!(is >> c.slices[i](a, b)))
              throw Error("TTTensor::read: truncated core data");
      tt.cores.push_back(std::move(c));
    }
    tt.check_consistent();
    return tt;
  }
};

/// MPO core: slices indexed by (output mode, input mode).
struct TTOpCore {
  // slices[out][in] is r_left x r_right
  std::vector<std::vector<Eigen::MatrixXd>> slices;

  Eigen::Index left() const { return slices[0][0].rows(); }
  Eigen::Index modes() const { return static_cast<Eigen::Index>(slices.size()); }
  Eigen::Index right() const { return slices[0][0].cols(); }
};

struct TTOperator {
  std::vector<TTOpCore> cores;
  Eigen::Index order() const { return static_cast<Eigen::Index>(cores.size()); }
};

struct GaugeTransform {
  std::vector<Eigen::MatrixXd> matrices;  // A_1 .. A_{d-1}
};

// ---------------------------------------------------------------------------
// evaluation

inline double tt_eval(const TTTensor& tt, const std::vector<Eigen::Index>& index) {
  Eigen::RowVectorXd acc = tt.cores[0].slices[index[0]].row(0);
  for (Eigen::Index mu = 1; mu < tt.order(); ++mu)
    acc = acc * tt.cores[mu].slices[index[mu]];
  return acc(0);
}

/// Dense tensor in row-major mode order (first index most significant),
/// returned as a flat vector of length prod(dims).
inline Eigen::VectorXd tt_full(const TTTensor& tt) {
  std::int64_t total = 1;
  for (auto n : tt.dims()) total *= n;
  if (total > kDenseTensorBound)
    throw TooLarge("tt_full: dense tensor would have " + std::to_string(total) +
                   " entries");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& core : tt.cores) {
    Eigen::MatrixXd next(acc.rows() * core.modes(), core.right());
    for (Eigen::Index r = 0; r < acc.rows(); ++r)
      for (Eigen::Index i = 0; i < core.modes(); ++i)
        next.row(r * core.modes() + i) = acc.row(r) * core.slices[i];
    acc = std::move(next);
  }
  return Eigen::Map<const Eigen::VectorXd>(acc.data(), acc.rows());
}

// ---------------------------------------------------------------------------
// gauges and orthogonalization

/// Slice-wise group action: core_mu(:,i,:) -> A_{mu-1}^{-1} core_mu(:,i,:) A_mu.
/// Leaves the represented tensor unchanged.
inline TTTensor apply_gauge(const TTTensor& tt, const GaugeTransform& g,
                            double rank_tol = kDefaultRankTol) {
  const Eigen::Index d = tt.order();
  if (static_cast<Eigen::Index>(g.matrices.size()) != d - 1)
    throw Error("apply_gauge: need d-1 gauge matrices");
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lus;
  for (const auto& A : g.matrices) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    if (!(s(s.size() - 1) > rank_tol * s(0)))
      throw SingularGauge("apply_gauge: gauge matrix numerically singular");
    lus.emplace_back(A);
  }
  TTTensor out = tt;
  for (Eigen::Index mu = 0; mu < d; ++mu)
    for (auto& slice : out.cores[mu].slices) {
      if (mu > 0) slice = lus[mu - 1].solve(slice);
      if (mu + 1 < d) slice = slice * g.matrices[mu];
    }
  return out;
}

namespace detail {

inline void push_left(TTTensor& tt, Eigen::Index mu, double rank_tol,
                      Eigen::MatrixXd* r_out = nullptr) {
  auto& core = tt.cores[mu];
  const Eigen::MatrixXd L = core.left_unfold();
  if (L.rows() < L.cols())
    throw RankCollapse("orthogonalize: declared rank exceeds unfolding rows");
  auto [Q, R] = qr_thin(L);
  const double dmax = R.diagonal().cwiseAbs().maxCoeff();
  if (!(R.diagonal().cwiseAbs().minCoeff() > rank_tol * std::max(dmax, 1e-300)))
    throw RankCollapse("orthogonalize: rank deficiency at core " +
                       std::to_string(mu));
  core = TTCore::from_left_unfold(Q, core.left(), core.modes());
  for (auto& s : tt.cores[mu + 1].slices) s = R * s;
  if (r_out) *r_out = R;
}

inline void push_right(TTTensor& tt, Eigen::Index mu, double rank_tol) {
  auto& core = tt.cores[mu];
  const Eigen::MatrixXd Rm = core.right_unfold();
  if (Rm.cols() < Rm.rows())
    throw RankCollapse("orthogonalize: declared rank exceeds unfolding cols");
  auto [Q, R] = qr_thin(Rm.transpose());
  const double dmax = R.diagonal().cwiseAbs().maxCoeff();
  if (!(R.diagonal().cwiseAbs().minCoeff() > rank_tol * std::max(dmax, 1e-300)))
    throw RankCollapse("orthogonalize: rank deficiency at core " +
                       std::to_string(mu));
  core = TTCore::from_right_unfold(Q.transpose(), core.modes(), core.right());
  for (auto& s : tt.cores[mu - 1].slices) s = s * R.transpose();
}

}  // namespace detail

/// Moves the train into mu-orthogonal gauge: cores left of `pivot` (1-based)
/// left-orthogonal, cores right of it right-orthogonal. Pure gauge change,
/// the represented tensor is untouched.
inline TTTensor orthogonalize(const TTTensor& tt, Eigen::Index pivot,
                              double rank_tol = kDefaultRankTol) {
  TTTensor out = tt;
  const Eigen::Index d = out.order();
  if (pivot < 1 || pivot > d) throw Error("orthogonalize: pivot out of range");
  for (Eigen::Index mu = 0; mu < pivot - 1; ++mu)
    detail::push_left(out, mu, rank_tol);
  for (Eigen::Index mu = d - 1; mu > pivot - 1; --mu)
    detail::push_right(out, mu, rank_tol);
  return out;
}

// ---------------------------------------------------------------------------
// TT-SVD compression

/// Sequential SVD compression of a dense tensor (flat row-major vector).
/// Truncates singular values so the total relative error stays below `tol`;
/// `max_rank` (0 = unlimited) additionally caps every interface rank.
inline TTTensor tt_svd(const Eigen::VectorXd& dense,
                       const std::vector<Eigen::Index>& dims,
                       Eigen::Index max_rank = 0, double tol = 1e-12) {
  std::int64_t total = 1;
  for (auto n : dims) total *= n;
  if (total != dense.size()) throw Error("tt_svd: size mismatch");
  if (total > kDenseTensorBound) throw TooLarge("tt_svd: tensor too large");
  const Eigen::Index d = static_cast<Eigen::Index>(dims.size());
  const double thresh =
      tol * dense.norm() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(d - 1, 1)));

  TTTensor tt;
  // Working matrix: rows = (rank, current mode) row-major, cols = rest.
  Eigen::MatrixXd cur(1, dense.size());
  for (Eigen::Index t = 0; t < dense.size(); ++t) cur(0, t) = dense(t);
  Eigen::Index rank = 1;
  for (Eigen::Index mu = 0; mu < d - 1; ++mu) {
    const Eigen::Index n = dims[mu];
    const Eigen::Index rest = cur.cols() / n;
    Eigen::MatrixXd M(rank * n, rest);
    for (Eigen::Index r = 0; r < rank; ++r)
      for (Eigen::Index i = 0; i < n; ++i)
        M.row(r * n + i) = cur.block(r, i * rest, 1, rest);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::Index keep = s.size();
    double tail = 0.0;
    while (keep > 1) {
      const double cand = std::sqrt(tail + s(keep - 1) * s(keep - 1));
      if (cand > thresh) break;
      tail += s(keep - 1) * s(keep - 1);
      --keep;
    }
    if (max_rank > 0) keep = std::min(keep, max_rank);
    tt.cores.push_back(TTCore::from_left_unfold(svd.matrixU().leftCols(keep),
                                                rank, n));
    cur = s.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();
    rank = keep;
  }
  // Last core: rank x n_d, slices are columns.
  TTCore last;
  for (Eigen::Index i = 0; i < dims[d - 1]; ++i)
    last.slices.push_back(cur.col(i));
  tt.cores.push_back(std::move(last));
  return tt;
}

// ---------------------------------------------------------------------------
// operators

/// Applies an MPO to a TT state; output ranks are products of the two.
inline TTTensor tt_apply(const TTOperator& op, const TTTensor& tt) {
  if (op.order() != tt.order()) throw Error("tt_apply: order mismatch");
  TTTensor out;
  for (Eigen::Index mu = 0; mu < tt.order(); ++mu) {
    const auto& oc = op.cores[mu];
    const auto& sc = tt.cores[mu];
    if (oc.modes() != sc.modes()) throw Error("tt_apply: mode size mismatch");
    const Eigen::Index rl = oc.left(), rr = oc.right();
    const Eigen::Index kl = sc.left(), kr = sc.right();
    TTCore nc;
    nc.slices.assign(sc.modes(), Eigen::MatrixXd::Zero(rl * kl, rr * kr));
    for (Eigen::Index out_i = 0; out_i < sc.modes(); ++out_i)
      for (Eigen::Index in_i = 0; in_i < sc.modes(); ++in_i) {
        const Eigen::MatrixXd& O = oc.slices[out_i][in_i];
        const Eigen::MatrixXd& S = sc.slices[in_i];
        for (Eigen::Index r = 0; r < rl; ++r)
          for (Eigen::Index rp = 0; rp < rr; ++rp)
            if (O(r, rp) != 0.0)
              nc.slices[out_i].block(r * kl, rp * kr, kl, kr) += O(r, rp) * S;
      }
    out.cores.push_back(std::move(nc));
  }
  return out;
}

inline double tt_dot(const TTTensor& a, const TTTensor& b) {
  Eigen::MatrixXd env = Eigen::MatrixXd::Ones(1, 1);
  for (Eigen::Index mu = 0; mu < a.order(); ++mu) {
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(a.cores[mu].right(),
                                                 b.cores[mu].right());
    for (Eigen::Index i = 0; i < a.cores[mu].modes(); ++i)
      next.noalias() +=
          a.cores[mu].slices[i].transpose() * env * b.cores[mu].slices[i];
    env = std::move(next);
  }
  return env(0, 0);
}

inline double tt_norm(const TTTensor& a) {
  return std::sqrt(std::max(tt_dot(a, a), 0.0));
}

// ---------------------------------------------------------------------------
// local (one-site) Galerkin systems

namespace detail {

struct Tensor3 {
  // index [a, r, b] with a state-bra rank, r operator rank, b state-ket rank
  std::vector<double> data;
  Eigen::Index na = 0, nr = 0, nb = 0;

  Tensor3() = default;
  Tensor3(Eigen::Index a, Eigen::Index r, Eigen::Index b)
      : data(static_cast<std::size_t>(a * r * b), 0.0), na(a), nr(r), nb(b) {}
  double& at(Eigen::Index a, Eigen::Index r, Eigen::Index b) {
    return data[static_cast<std::size_t>((a * nr + r) * nb + b)];
  }
  double at(Eigen::Index a, Eigen::Index r, Eigen::Index b) const {
    return data[static_cast<std::size_t>((a * nr + r) * nb + b)];
  }
};

inline Tensor3 op_env_step_left(const Tensor3& env, const TTCore& state,
                                const TTOpCore& op) {
  Tensor3 out(state.right(), op.right(), state.right());
  for (Eigen::Index oi = 0; oi < state.modes(); ++oi)
    for (Eigen::Index ii = 0; ii < state.modes(); ++ii) {
      const Eigen::MatrixXd& O = op.slices[oi][ii];
      for (Eigen::Index r0 = 0; r0 < env.nr; ++r0)
        for (Eigen::Index r1 = 0; r1 < O.cols(); ++r1) {
          if (O(r0, r1) == 0.0) continue;
          // tmp = bra_slice(oi)^T * env(:,r0,:) * ket_slice(ii)
          Eigen::MatrixXd mid(env.na, env.nb);
          for (Eigen::Index a = 0; a < env.na; ++a)
            for (Eigen::Index b = 0; b < env.nb; ++b)
              mid(a, b) = env.at(a, r0, b);
          const Eigen::MatrixXd tmp = state.slices[oi].transpose() * mid *
                                      state.slices[ii];
          for (Eigen::Index a = 0; a < tmp.rows(); ++a)
            for (Eigen::Index b = 0; b < tmp.cols(); ++b)
              out.at(a, r1, b) += O(r0, r1) * tmp(a, b);
        }
    }
  return out;
}

inline Tensor3 op_env_step_right(const Tensor3& env, const TTCore& state,
                                 const TTOpCore& op) {
  Tensor3 out(state.left(), op.left(), state.left());
  for (Eigen::Index oi = 0; oi < state.modes(); ++oi)
    for (Eigen::Index ii = 0; ii < state.modes(); ++ii) {
      const Eigen::MatrixXd& O = op.slices[oi][ii];
      for (Eigen::Index r0 = 0; r0 < O.rows(); ++r0)
        for (Eigen::Index r1 = 0; r1 < env.nr; ++r1) {
          if (O(r0, r1) == 0.0) continue;
          Eigen::MatrixXd mid(env.na, env.nb);
          for (Eigen::Index a = 0; a < env.na; ++a)
            for (Eigen::Index b = 0; b < env.nb; ++b)
              mid(a, b) = env.at(a, r1, b);
          const Eigen::MatrixXd tmp =
              state.slices[oi] * mid * state.slices[ii].transpose();
          for (Eigen::Index a = 0; a < tmp.rows(); ++a)
            for (Eigen::Index b = 0; b < tmp.cols(); ++b)
              out.at(a, r0, b) += O(r0, r1) * tmp(a, b);
        }
    }
  return out;
}

inline Eigen::MatrixXd rhs_env_step_left(const Eigen::MatrixXd& env,
                                         const TTCore& state,
                                         const TTCore& rhs) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(state.right(), rhs.right());
  for (Eigen::Index i = 0; i < state.modes(); ++i)
    out.noalias() += state.slices[i].transpose() * env * rhs.slices[i];
  return out;
}

inline Eigen::MatrixXd rhs_env_step_right(const Eigen::MatrixXd& env,
                                          const TTCore& state,
                                          const TTCore& rhs) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(state.left(), rhs.left());
  for (Eigen::Index i = 0; i < state.modes(); ++i)
    out.noalias() += state.slices[i] * env * rhs.slices[i].transpose();
  return out;
}

inline bool is_left_orthogonal(const TTCore& c, double tol = 1e-8) {
  const Eigen::MatrixXd L = c.left_unfold();
  return (L.transpose() * L -
          Eigen::MatrixXd::Identity(L.cols(), L.cols()))
             .norm() <= tol;
}

inline bool is_right_orthogonal(const TTCore& c, double tol = 1e-8) {
  const Eigen::MatrixXd R = c.right_unfold();
  return (R * R.transpose() -
          Eigen::MatrixXd::Identity(R.rows(), R.rows()))
             .norm() <= tol;
}

// Core vectorization: index (a, i, b) -> b * (k_l n) + a * n + i,
// i.e. column-major stacking of the left unfolding.
inline Eigen::VectorXd core_vec(const TTCore& c) {
  const Eigen::MatrixXd L = c.left_unfold();
  return Eigen::Map<const Eigen::VectorXd>(L.data(), L.size());
}

inline TTCore core_unvec(const Eigen::VectorXd& v, Eigen::Index kl,
                         Eigen::Index n, Eigen::Index kr) {
  Eigen::Map<const Eigen::MatrixXd> L(v.data(), kl * n, kr);
  return TTCore::from_left_unfold(L, kl, n);
}

}  // namespace detail

struct LocalSystem {
  Eigen::MatrixXd H;  // (k_{mu-1} n_mu k_mu)^2 Galerkin matrix
  Eigen::VectorXd b;
};

/// Galerkin projection of `op` x = `rhs` onto the one-site frame at `mu`
/// (1-based). The train must be orthogonalized with pivot mu.
inline LocalSystem local_system(const TTOperator& op, const TTTensor& rhs,
                                const TTTensor& tt, Eigen::Index mu) {
  const Eigen::Index d = tt.order();
  if (mu < 1 || mu > d) throw Error("local_system: mu out of range");
  for (Eigen::Index j = 0; j < mu - 1; ++j)
    if (!detail::is_left_orthogonal(tt.cores[j]))
      throw NotOrthogonalized("local_system: core " + std::to_string(j) +
                              " not left-orthogonal");
  for (Eigen::Index j = mu; j < d; ++j)
    if (!detail::is_right_orthogonal(tt.cores[j]))
      throw NotOrthogonalized("local_system: core " + std::to_string(j) +
                              " not right-orthogonal");

  detail::Tensor3 lenv(1, 1, 1);
  lenv.at(0, 0, 0) = 1.0;
  Eigen::MatrixXd lrhs = Eigen::MatrixXd::Ones(1, 1);
  for (Eigen::Index j = 0; j < mu - 1; ++j) {
    lenv = detail::op_env_step_left(lenv, tt.cores[j], op.cores[j]);
    lrhs = detail::rhs_env_step_left(lrhs, tt.cores[j], rhs.cores[j]);
  }
  detail::Tensor3 renv(1, 1, 1);
  renv.at(0, 0, 0) = 1.0;
  Eigen::MatrixXd rrhs = Eigen::MatrixXd::Ones(1, 1);
  for (Eigen::Index j = d - 1; j >= mu; --j) {
    renv = detail::op_env_step_right(renv, tt.cores[j], op.cores[j]);
    rrhs = detail::rhs_env_step_right(rrhs, tt.cores[j], rhs.cores[j]);
  }

  const auto& oc = op.cores[mu - 1];
  const Eigen::Index kl = tt.cores[mu - 1].left();
  const Eigen::Index n = tt.cores[mu - 1].modes();
  const Eigen::Index kr = tt.cores[mu - 1].right();
  const Eigen::Index sz = kl * n * kr;
  auto idx = [kl, n](Eigen::Index a, Eigen::Index i, Eigen::Index b) {
    return b * (kl * n) + a * n + i;
  };

  LocalSystem sys;
  sys.H = Eigen::MatrixXd::Zero(sz, sz);
  for (Eigen::Index oi = 0; oi < n; ++oi)
    for (Eigen::Index ii = 0; ii < n; ++ii) {
      const Eigen::MatrixXd& O = oc.slices[oi][ii];
      for (Eigen::Index rl = 0; rl < O.rows(); ++rl)
        for (Eigen::Index rr = 0; rr < O.cols(); ++rr) {
          if (O(rl, rr) == 0.0) continue;
          for (Eigen::Index a = 0; a < kl; ++a)
            for (Eigen::Index ap = 0; ap < kl; ++ap) {
              const double lv = lenv.at(a, rl, ap) * O(rl, rr);
              if (lv == 0.0) continue;
              for (Eigen::Index b = 0; b < kr; ++b)
                for (Eigen::Index bp = 0; bp < kr; ++bp)
                  sys.H(idx(a, oi, b), idx(ap, ii, bp)) +=
                      lv * renv.at(b, rr, bp);
            }
        }
    }

  const auto& rc = rhs.cores[mu - 1];
  sys.b = Eigen::VectorXd::Zero(sz);
  for (Eigen::Index i = 0; i < n; ++i) {
    // b[(a,i,b)] = sum_{s_l, s_r} lrhs(a, s_l) rc.slices[i](s_l, s_r) rrhs(b, s_r)
    const Eigen::MatrixXd contrib = lrhs * rc.slices[i] * rrhs.transpose();
    for (Eigen::Index a = 0; a < kl; ++a)
      for (Eigen::Index b = 0; b < kr; ++b)
        sys.b(idx(a, i, b)) = contrib(a, b);
  }
  return sys;
}

/// One left-to-right relaxed one-site ALS sweep for the quadratic objective
/// 1/2 <op x, x> - <rhs, x>. At each site the exact local solution is blended
/// with the old core, where the old core is first transported into the
/// current gauge via the R factors accumulated while shifting the pivot.
inline TTTensor relaxed_als_sweep(const TTTensor& tt_in, const TTOperator& op,
                                  const TTTensor& rhs, double omega,
                                  double rank_tol = kDefaultRankTol) {
  TTTensor tt = orthogonalize(tt_in, 1, rank_tol);
  const Eigen::Index d = tt.order();
  std::vector<TTCore> old_gauged;
  for (const auto& c : tt.cores) old_gauged.push_back(c);

  for (Eigen::Index mu = 1; mu <= d; ++mu) {
    const LocalSystem sys = local_system(op, rhs, tt, mu);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sys.H);
    if (ldlt.info() != Eigen::Success)
      throw SolveFailure("relaxed_als_sweep: local solve failed at core " +
                         std::to_string(mu));
    const Eigen::VectorXd u_new = ldlt.solve(sys.b);
    if (!((sys.H * u_new - sys.b).norm() <=
          1e-8 * std::max(sys.b.norm(), 1e-300)))
      throw SolveFailure("relaxed_als_sweep: local system singular at core " +
                         std::to_string(mu));
    const Eigen::VectorXd u_old = detail::core_vec(old_gauged[mu - 1]);
    const Eigen::VectorXd u = (1.0 - omega) * u_old + omega * u_new;
    const auto& ref = tt.cores[mu - 1];
    tt.cores[mu - 1] = detail::core_unvec(u, ref.left(), ref.modes(), ref.right());
    if (mu < d) {
      Eigen::MatrixXd R;
      detail::push_left(tt, mu - 1, rank_tol, &R);
      // Transport the old next core into the new gauge.
      for (auto& s : old_gauged[mu].slices) s = R * s;
    }
  }
  return tt;
}

/// max over mu of || H_loc vec(core_mu) - b_loc || / || b_loc ||, sweeping
/// the pivot left to right.
inline double max_local_residual(const TTTensor& tt_in, const TTOperator& op,
                                 const TTTensor& rhs,
                                 double rank_tol = kDefaultRankTol) {
  TTTensor tt = orthogonalize(tt_in, 1, rank_tol);
  const Eigen::Index d = tt.order();
  double worst = 0.0;
  for (Eigen::Index mu = 1; mu <= d; ++mu) {
    const LocalSystem sys = local_system(op, rhs, tt, mu);
    const double bnorm = sys.b.norm();
    if (!(bnorm > 0.0))
      throw ZeroLocalRhs("max_local_residual: projected rhs vanishes at core " +
                         std::to_string(mu));
    const Eigen::VectorXd u = detail::core_vec(tt.cores[mu - 1]);
    worst = std::max(worst, (sys.H * u - sys.b).norm() / bnorm);
    if (mu < d) detail::push_left(tt, mu - 1, rank_tol);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// helpers for constructing trains

inline TTTensor tt_ones(const std::vector<Eigen::Index>& dims) {
  TTTensor tt;
  for (auto n : dims) {
    TTCore c;
    c.slices.assign(n, Eigen::MatrixXd::Ones(1, 1));
    tt.cores.push_back(std::move(c));
  }
  return tt;
}

inline TTTensor tt_random(const std::vector<Eigen::Index>& dims,
                          const std::vector<Eigen::Index>& ranks,
                          std::mt19937_64& rng) {
  const Eigen::Index d = static_cast<Eigen::Index>(dims.size());
  if (static_cast<Eigen::Index>(ranks.size()) != d - 1)
    throw Error("tt_random: need d-1 ranks");
  std::normal_distribution<double> gauss(0.0, 1.0);
  TTTensor tt;
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    const Eigen::Index kl = mu == 0 ? 1 : ranks[mu - 1];
    const Eigen::Index kr = mu == d - 1 ? 1 : ranks[mu];
    TTCore c;
    c.slices.reserve(dims[mu]);
    for (Eigen::Index i = 0; i < dims[mu]; ++i) {
      Eigen::MatrixXd s(kl, kr);
      for (Eigen::Index a = 0; a < kl; ++a)
        for (Eigen::Index b = 0; b < kr; ++b) s(a, b) = gauss(rng);
      c.slices.push_back(std::move(s));
    }
    tt.cores.push_back(std::move(c));
  }
  return tt;
}

}  // namespace relaxals
