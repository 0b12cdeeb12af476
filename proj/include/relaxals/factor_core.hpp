#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "relaxals/errors.hpp"
#include "relaxals/objective.hpp"
#include "relaxals/qr.hpp"
#include "relaxals/shift.hpp"
#include "relaxals/trace.hpp"

namespace relaxals {

inline constexpr double kDefaultRankTol = 1e-10;

/// Parameter point (U, V) of the rank-k factorization X = U V^T.
struct FactorPair {
  Eigen::MatrixXd U;  // m x k
  Eigen::MatrixXd V;  // n x k

  Eigen::Index rank() const { return U.cols(); }
  Eigen::MatrixXd product() const { return U * V.transpose(); }

  bool full_rank(double rank_tol = kDefaultRankTol) const {
    auto smallest_rel_sv = [](const Eigen::MatrixXd& M) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
      const auto& s = svd.singularValues();
      return s(s.size() - 1) / s(0);
    };
    return smallest_rel_sv(U) > rank_tol && smallest_rel_sv(V) > rank_tol;
  }
};

struct RelaxConfig {
  enum class Mode { fixed_omega, auto_omega };
  double omega = 1.0;          // used in fixed mode
  int activation_iter = 0;     // used in auto mode
  int max_iters = 100;
  double tol = 1e-10;
  double rank_tol = kDefaultRankTol;
  Mode mode = Mode::fixed_omega;
};

inline Eigen::MatrixXd product(const FactorPair& pair) { return pair.product(); }

/// Group action theta_A: (U, V) -> (U A, V A^{-T}); leaves U V^T unchanged.
inline FactorPair reparametrize(const FactorPair& pair, const Eigen::MatrixXd& A,
                                double rank_tol = kDefaultRankTol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > rank_tol * s(0)))
    throw SingularGauge("reparametrize: gauge matrix numerically singular");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  return {pair.U * A, lu.solve(pair.V.transpose()).transpose()};
}

namespace detail {

inline void check_blend_rank(const Eigen::MatrixXd& R, double rank_tol,
                             const char* which) {
  const double dmax = R.diagonal().cwiseAbs().maxCoeff();
  const double dmin = R.diagonal().cwiseAbs().minCoeff();
  if (!(dmin > rank_tol * std::max(dmax, 1e-300)))
    throw RankCollapse(std::string("relaxed_sweep: blended ") + which +
                       " factor lost numerical rank");
}

}  // namespace detail

/// One overrelaxed AO sweep with QR gauge bookkeeping:
///   U <- S1(V_l);  U <- (1-w) U_l + w U;        U = Q1 R1
///   V <- S2(Q1);   V <- (1-w) V_l R1^T + w V;   V = Q2 R2
///   returns (Q1 R2^T, Q2).
/// The R1^T in the V blend transports the old V into the gauge of Q1; the
/// blend is between representatives of the same gauge, which is what keeps
/// critical points fixed points for every omega.
inline FactorPair relaxed_sweep(const FactorPair& pair, const Objective& obj,
                                double omega,
                                double rank_tol = kDefaultRankTol) {
  Eigen::MatrixXd U = obj.solve_U(pair.V);
  U = (1.0 - omega) * pair.U + omega * U;
  auto [Q1, R1] = qr_thin(U);
  detail::check_blend_rank(R1, rank_tol, "U");

  Eigen::MatrixXd V = obj.solve_V(Q1);
  V = (1.0 - omega) * pair.V * R1.transpose() + omega * V;
  auto [Q2, R2] = qr_thin(V);
  detail::check_blend_rank(R2, rank_tol, "V");

  return {Q1 * R2.transpose(), std::move(Q2)};
}

struct RunResult {
  FactorPair pair;
  ResidualTrace trace;
  bool converged = false;
};

/// Full iteration: sweeps until the objective's error metric drops below
/// cfg.tol or max_iters is reached. The controller decides omega per sweep
/// (auto mode: omega = 1 until activation, then the frozen omega_opt).
inline RunResult run(const Objective& obj, const FactorPair& pair0,
                     const RelaxConfig& cfg, ShiftController& ctrl) {
  RunResult res;
  res.pair = pair0;
  double err = obj.error(res.pair);
  if (!std::isfinite(err)) throw NonFinite("run: initial error not finite");
  res.trace.record(0, err, 1.0);
  if (err <= cfg.tol) {
    res.converged = true;
    return res;
  }
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double omega = ctrl.next_omega(res.trace, iter);
    res.pair = relaxed_sweep(res.pair, obj, omega, cfg.rank_tol);
    err = obj.error(res.pair);
    if (!std::isfinite(err))
      throw NonFinite("run: error became NaN/Inf at iteration " +
                      std::to_string(iter + 1));
    res.trace.record(iter + 1, err, omega, ctrl.beta_sq_est());
    if (err <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline RunResult run(const Objective& obj, const FactorPair& pair0,
                     const RelaxConfig& cfg) {
  ShiftController ctrl = cfg.mode == RelaxConfig::Mode::auto_omega
                             ? ShiftController::automatic(cfg.activation_iter)
                             : ShiftController::fixed(cfg.omega);
  return run(obj, pair0, cfg, ctrl);
}

}  // namespace relaxals
