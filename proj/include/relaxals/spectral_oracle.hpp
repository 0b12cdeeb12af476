#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "relaxals/errors.hpp"
#include "relaxals/factor_core.hpp"
#include "relaxals/objective.hpp"
#include "relaxals/shift.hpp"

namespace relaxals {

inline constexpr Eigen::Index kOracleMaxDim = 4000;
inline constexpr double kKernelTol = 1e-8;

namespace detail {

inline Eigen::VectorXd grad_F(const Objective& obj, const FactorPair& pair) {
  const Eigen::MatrixXd G = obj.gradient(pair.product());
  const Eigen::Index mk = pair.U.size(), nk = pair.V.size();
  Eigen::VectorXd g(mk + nk);
  Eigen::Map<Eigen::MatrixXd>(g.data(), pair.U.rows(), pair.U.cols()) =
      G * pair.V;
  Eigen::Map<Eigen::MatrixXd>(g.data() + mk, pair.V.rows(), pair.V.cols()) =
      G.transpose() * pair.U;
  return g;
}

}  // namespace detail

/// Exact Hessian of F(U, V) = f(U V^T) at `pair`, as a dense p x p matrix
/// with p = mk + nk and the U block first. Column j is the directional
/// derivative of grad F along the j-th coordinate direction:
///   d(grad_U F) = [hess f . (dU V^T + U dV^T)] V + grad f(X) dV,
///   d(grad_V F) = [hess f . (dU V^T + U dV^T)]^T U + grad f(X)^T dU.
/// When `validate` is set the result is cross-checked against central finite
/// differences of grad F.
inline Eigen::MatrixXd assemble_hessian(const Objective& obj,
                                        const FactorPair& pair,
                                        bool validate = true) {
  const Eigen::Index m = pair.U.rows(), n = pair.V.rows(), k = pair.rank();
  const Eigen::Index mk = m * k, nk = n * k, p = mk + nk;
  if (p > kOracleMaxDim)
    throw TooLarge("assemble_hessian: p = " + std::to_string(p) +
                   " exceeds dense oracle bound");
  const Eigen::MatrixXd G = obj.gradient(pair.product());
  Eigen::MatrixXd H(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::MatrixXd dU = Eigen::MatrixXd::Zero(m, k);
    Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(n, k);
    if (j < mk)
      dU(j % m, j / m) = 1.0;
    else
      dV((j - mk) % n, (j - mk) / n) = 1.0;
    const Eigen::MatrixXd Hdir =
        obj.hessian_apply(dU * pair.V.transpose() + pair.U * dV.transpose());
    Eigen::Map<Eigen::MatrixXd>(H.col(j).data(), m, k) = Hdir * pair.V + G * dV;
    Eigen::Map<Eigen::MatrixXd>(H.col(j).data() + mk, n, k) =
        Hdir.transpose() * pair.U + G.transpose() * dU;
  }
  H = 0.5 * (H + H.transpose()).eval();
  if (validate) {
    const double step = 1e-5;
    const double scale = std::max(H.norm(), 1.0);
    for (Eigen::Index j = 0; j < p; ++j) {
      FactorPair plus = pair, minus = pair;
      auto bump = [&](FactorPair& q, double s) {
        if (j < mk)
          q.U(j % m, j / m) += s;
        else
          q.V((j - mk) % n, (j - mk) / n) += s;
      };
      bump(plus, step);
      bump(minus, -step);
      const Eigen::VectorXd fd =
          (detail::grad_F(obj, plus) - detail::grad_F(obj, minus)) /
          (2.0 * step);
      if (!((H.col(j) - fd).norm() <= 1e-6 * scale))
        throw Asymmetry("assemble_hessian: analytic column " +
                        std::to_string(j) + " disagrees with finite differences");
    }
  }
  return H;
}

/// H = D + E + E^T with D the (U,U)/(V,V) diagonal blocks and E the strictly
/// lower (V,U) block.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> split_blocks(
    const Eigen::MatrixXd& H, Eigen::Index m, Eigen::Index n, Eigen::Index k) {
  const Eigen::Index mk = m * k, p = H.rows();
  if (p != mk + n * k) throw Error("split_blocks: dimension mismatch");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(p, p);
  D.topLeftCorner(mk, mk) = H.topLeftCorner(mk, mk);
  D.bottomRightCorner(p - mk, p - mk) = H.bottomRightCorner(p - mk, p - mk);
  E.bottomLeftCorner(p - mk, mk) = H.bottomLeftCorner(p - mk, mk);
  return {std::move(D), std::move(E)};
}

/// Orthonormal basis of the numerical null space of symmetric H
/// (eigenvalues below tol * lambda_max).
inline Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& H,
                                    double tol = kKernelTol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::Index q = 0;
  while (q < ev.size() && std::abs(ev(q)) < cutoff) ++q;
  return eig.eigenvectors().leftCols(q);
}

/// SOR error iteration matrix T_omega = I - N_omega^{-1} H with
/// N_omega = D / omega + E.
inline Eigen::MatrixXd t_omega(const Eigen::MatrixXd& H,
                               const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& E, double omega) {
  const Eigen::MatrixXd N = D / omega + E;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(N);
  if (std::abs(lu.determinant()) == 0.0)
    throw SingularN("t_omega: N_omega singular");
  return Eigen::MatrixXd::Identity(H.rows(), H.cols()) - lu.solve(H);
}

/// Spectral radius of T_omega restricted to the invariant subspace
/// W_omega = N_omega^{-1} (ker H)^perp. The restriction is expressed in the
/// explicit W_omega basis so near-unit kernel eigenvalues never contaminate
/// the result.
inline double rho_on_W(const Eigen::MatrixXd& H, const Eigen::MatrixXd& D,
                       const Eigen::MatrixXd& E, double omega,
                       const Eigen::MatrixXd& kernel) {
  const Eigen::Index p = H.rows(), q = kernel.cols();
  if ((p - q) == 0) return 0.0;
  // At omega_opt the dominant eigenvalue is defective, so its sensitivity to
  // rounding in the restricted matrix scales like sqrt(machine eps); the
  // whole restriction is therefore built and solved in extended precision.
  using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LongMatrix Hl = H.cast<long double>();
  const LongMatrix Nl =
      D.cast<long double>() / static_cast<long double>(omega) +
      E.cast<long double>();
  Eigen::PartialPivLU<LongMatrix> lu(Nl);
  if (std::abs(lu.determinant()) == 0.0L)
    throw SingularN("rho_on_W: N_omega singular");

  // Orthonormal basis of (ker H)^perp from the full eigenbasis of H.
  Eigen::SelfAdjointEigenSolver<LongMatrix> eig(Hl);
  const LongMatrix Y = eig.eigenvectors().rightCols(p - q);
  const LongMatrix W = lu.solve(Y);

  if (q > 0) {
    Eigen::MatrixXd combined(p, p);
    combined.leftCols(q) = kernel;
    combined.rightCols(p - q) = W.cast<double>();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(combined);
    if (qr.rank() < p)
      throw DegenerateSplitting("rho_on_W: kernel + W_omega not a direct sum");
  }

  // T W = W - N^{-1} H W lies in span(W); recover the coordinates.
  const LongMatrix TW = W - lu.solve(Hl * W);
  const LongMatrix M = W.colPivHouseholderQr().solve(TW);
  Eigen::EigenSolver<LongMatrix> es(M, /*computeEigenvectors=*/false);
  long double worst = 0.0L;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const long double a = std::abs(es.eigenvalues()(i));
    if (a > worst) worst = a;
  }
  return static_cast<double>(worst);
}

/// beta = max modulus over the Jacobi spectrum sigma(I - D^{-1} H) after
/// removing the q-fold eigenvalues at +1 and -1 contributed by ker H.
inline double jacobi_beta(const Eigen::MatrixXd& H, const Eigen::MatrixXd& D,
                          Eigen::Index q, double unit_tol = 1e-8) {
  // H x = (1 - mu) D x is a symmetric-definite pencil; solve it instead of
  // the nonsymmetric I - D^{-1} H.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, D);
  std::vector<double> mus;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    mus.push_back(1.0 - eig.eigenvalues()(i));
  auto drop = [&](double target, Eigen::Index count) {
    for (Eigen::Index c = 0; c < count; ++c) {
      Eigen::Index best = -1;
      double best_dist = unit_tol;
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(mus.size()); ++i)
        if (std::abs(mus[i] - target) <= best_dist) {
          best = i;
          best_dist = std::abs(mus[i] - target);
        }
      if (best >= 0) mus.erase(mus.begin() + best);
    }
  };
  drop(1.0, q);
  drop(-1.0, q);
  if (mus.empty())
    throw AllUnitEigenvalues("jacobi_beta: spectrum is exhausted by +-1");
  double beta = 0.0;
  for (double mu : mus) beta = std::max(beta, std::abs(mu));
  return beta;
}

struct YoungPairing {
  std::complex<double> lambda;
  double mu;
  double mismatch;
};

struct YoungReport {
  double omega;
  std::vector<YoungPairing> pairings;
};

/// Verifies the eigenvalue correspondence
///   lambda = 1 - omega + 1/2 omega^2 mu^2 +- omega mu sqrt(1 - omega + 1/4 omega^2 mu^2)
/// between the Jacobi spectrum and the spectrum of T_omega, for two-block
/// structure. Eigenvalues of T_omega within 1e-8 of 1 (kernel) are skipped.
inline YoungReport young_check(const Eigen::MatrixXd& H,
                               const Eigen::MatrixXd& D,
                               const Eigen::MatrixXd& E, double omega,
                               double unit_tol = 1e-8) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> jac(H, D);
  std::vector<double> mus;
  for (Eigen::Index i = 0; i < jac.eigenvalues().size(); ++i)
    mus.push_back(1.0 - jac.eigenvalues()(i));

  const Eigen::MatrixXd T = t_omega(H, D, E, omega);
  Eigen::EigenSolver<Eigen::MatrixXd> es(T, /*computeEigenvectors=*/false);

  YoungReport report{omega, {}};
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam - 1.0) <= unit_tol) continue;  // kernel copy
    double best_mismatch = std::numeric_limits<double>::infinity();
    double best_mu = 0.0;
    for (double mu : mus) {
      const std::complex<double> root =
          std::sqrt(std::complex<double>(
              1.0 - omega + 0.25 * omega * omega * mu * mu, 0.0));
      const std::complex<double> base =
          1.0 - omega + 0.5 * omega * omega * mu * mu;
      for (int sign : {-1, 1}) {
        const std::complex<double> pred =
            base + static_cast<double>(sign) * omega * mu * root;
        const double mismatch = std::abs(lam - pred);
        if (mismatch < best_mismatch) {
          best_mismatch = mismatch;
          best_mu = mu;
        }
      }
    }
    if (!(best_mismatch <= 1e-7 * std::max(1.0, std::abs(lam))))
      throw UnmatchedEigenvalue(
          "young_check: eigenvalue (" + std::to_string(lam.real()) + ", " +
          std::to_string(lam.imag()) + "i) has no Jacobi partner");
    report.pairings.push_back({lam, best_mu, best_mismatch});
  }
  return report;
}

/// Bundled spectral data of the SOR linearization at a critical point.
struct SorSpectrum {
  Eigen::MatrixXd H, D, E;
  Eigen::MatrixXd kernel;
  Eigen::Index q = 0;
  double beta = 0.0;

  static SorSpectrum analyze(const Objective& obj, const FactorPair& pair,
                             bool validate = true) {
    SorSpectrum s;
    s.H = assemble_hessian(obj, pair, validate);
    std::tie(s.D, s.E) =
        split_blocks(s.H, pair.U.rows(), pair.V.rows(), pair.rank());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dcheck(s.D);
    if (!(dcheck.eigenvalues()(0) > 0.0))
      throw Error("SorSpectrum: block diagonal D not positive definite");
    s.kernel = kernel_basis(s.H);
    s.q = s.kernel.cols();
    s.beta = jacobi_beta(s.H, s.D, s.q);
    return s;
  }

  double rho(double omega) const { return rho_on_W(H, D, E, omega, kernel); }
};

}  // namespace relaxals
