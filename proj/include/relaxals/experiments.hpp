#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "relaxals/completion.hpp"
#include "relaxals/dense_quadratic.hpp"
#include "relaxals/errors.hpp"
#include "relaxals/factor_core.hpp"
#include "relaxals/lyapunov.hpp"
#include "relaxals/qtt.hpp"
#include "relaxals/shift.hpp"
#include "relaxals/spectral_oracle.hpp"
#include "relaxals/tensor_train.hpp"

namespace relaxals {

struct ExperimentConfig {
  int n = 300;
  int k = 10;
  int d = 5;           // QTT levels
  double os = 3.0;     // completion oversampling
  bool auto_omega = true;
  double omega = 1.0;  // used when auto_omega is false
  int activation_iter = 12;
  int max_iters = 500;
  double tol = 1e-10;
  std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = g(rng);
  return M;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, Eigen::Index k,
                                         std::mt19937_64& rng) {
  return qr_thin(gaussian(n, k, rng)).Q;
}

inline FactorPair random_start(Eigen::Index m, Eigen::Index n, Eigen::Index k,
                               std::mt19937_64& rng) {
  return {gaussian(m, k, rng), random_orthogonal(n, k, rng)};
}

inline ShiftController make_controller(const ExperimentConfig& cfg) {
  return cfg.auto_omega ? ShiftController::automatic(cfg.activation_iter)
                        : ShiftController::fixed(cfg.omega);
}

inline RelaxConfig make_relax_config(const ExperimentConfig& cfg) {
  RelaxConfig rc;
  rc.omega = cfg.omega;
  rc.activation_iter = cfg.activation_iter;
  rc.max_iters = cfg.max_iters;
  rc.tol = cfg.tol;
  rc.mode = cfg.auto_omega ? RelaxConfig::Mode::auto_omega
                           : RelaxConfig::Mode::fixed_omega;
  return rc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// completion (random rank-k ground truth, Gaussian factors)

inline CompletionObjective make_completion_instance(int n, int k, double os,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd Ustar = detail::gaussian(n, k, rng);
  const Eigen::MatrixXd Vstar = detail::gaussian(n, k, rng);
  auto omega_set = sample_omega(n, k, os, seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<double> values(omega_set.size());
  for (std::size_t t = 0; t < omega_set.size(); ++t)
    values[t] = Ustar.row(omega_set[t].i).dot(Vstar.row(omega_set[t].j));
  return CompletionObjective(
      CompletionData(n, n, std::move(omega_set), std::move(values)));
}

inline RunResult run_completion(const ExperimentConfig& cfg) {
  const CompletionObjective obj =
      make_completion_instance(cfg.n, cfg.k, cfg.os, cfg.seed);
  std::mt19937_64 rng(cfg.seed + 1);
  const FactorPair start = detail::random_start(cfg.n, cfg.n, cfg.k, rng);
  ShiftController ctrl = detail::make_controller(cfg);
  return run(obj, start, detail::make_relax_config(cfg), ctrl);
}

// ---------------------------------------------------------------------------
// Lyapunov (scaled 1D Laplacian, prescribed singular spectrum of X*)

/// Symmetric X* with sigma_1 = 1, sigma_2 = 0.5, sigma_3 = 0.495 (ratio
/// 0.99) and geometric factor-0.5 decay beyond, over a random orthogonal
/// eigenbasis. Symmetry keeps B = A X* + X* A^T symmetric exactly, so the
/// prescribed spectrum survives into the instance.
inline Eigen::MatrixXd lyapunov_target(int n, std::mt19937_64& rng) {
  const int nsv = std::min(n, 12);
  Eigen::VectorXd sv(nsv);
  sv(0) = 1.0;
  if (nsv > 1) sv(1) = 0.5;
  if (nsv > 2) sv(2) = 0.495;
  for (int i = 3; i < nsv; ++i) sv(i) = sv(i - 1) * 0.5;
  const Eigen::MatrixXd P = detail::random_orthogonal(n, nsv, rng);
  return P * sv.asDiagonal() * P.transpose();
}

inline LyapunovObjective make_lyapunov_instance(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd A = tridiag_laplacian(n);
  const Eigen::MatrixXd Xstar = lyapunov_target(n, rng);
  Eigen::MatrixXd B = A * Xstar + Xstar * A.transpose();
  B = 0.5 * (B + B.transpose()).eval();
  return LyapunovObjective(LyapunovData(A, std::move(B)));
}

inline RunResult run_lyapunov(const ExperimentConfig& cfg) {
  const LyapunovObjective obj = make_lyapunov_instance(cfg.n, cfg.seed);
  std::mt19937_64 rng(cfg.seed + 1);
  const FactorPair start = detail::random_start(cfg.n, cfg.n, cfg.k, rng);
  ShiftController ctrl = detail::make_controller(cfg);
  return run(obj, start, detail::make_relax_config(cfg), ctrl);
}

// ---------------------------------------------------------------------------
// QTT Lyapunov

struct QttRunResult {
  TTTensor state;
  ResidualTrace trace;
  bool converged = false;
};

struct QttInstance {
  TTOperator op;
  TTTensor rhs;
};

inline QttInstance make_qtt_instance(int d) {
  const Eigen::Index n = Eigen::Index(1) << d;
  QttInstance inst;
  inst.op = qtt_operator(tridiag_laplacian(static_cast<int>(n)));
  inst.rhs = tt_ones(std::vector<Eigen::Index>(2 * d, 2));  // B = all ones
  return inst;
}

/// Relaxed TT-ALS on the QTT Lyapunov system; the error metric is the
/// maximum relative local residual of the current sweep. In auto mode the
/// optimal-shift formula is reused as a heuristic.
inline QttRunResult run_qtt(const ExperimentConfig& cfg) {
  const QttInstance inst = make_qtt_instance(cfg.d);
  std::mt19937_64 rng(cfg.seed + 1);
  // Interface mu of a mode-2 train admits at most min(2^mu, 2^(2d-mu)).
  std::vector<Eigen::Index> ranks(2 * cfg.d - 1);
  for (int mu = 1; mu <= 2 * cfg.d - 1; ++mu) {
    Eigen::Index cap = cfg.k;
    if (mu < 30) cap = std::min(cap, Eigen::Index(1) << mu);
    if (2 * cfg.d - mu < 30)
      cap = std::min(cap, Eigen::Index(1) << (2 * cfg.d - mu));
    ranks[mu - 1] = cap;
  }
  TTTensor state =
      tt_random(std::vector<Eigen::Index>(2 * cfg.d, 2), ranks, rng);
  ShiftController ctrl = detail::make_controller(cfg);

  QttRunResult res;
  double err = max_local_residual(state, inst.op, inst.rhs);
  res.trace.record(0, err, 1.0);
  if (err <= cfg.tol) {
    res.state = std::move(state);
    res.converged = true;
    return res;
  }
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double omega = ctrl.next_omega(res.trace, iter);
    state = relaxed_als_sweep(state, inst.op, inst.rhs, omega);
    err = max_local_residual(state, inst.op, inst.rhs);
    if (!std::isfinite(err)) throw NonFinite("run_qtt: residual became NaN/Inf");
    res.trace.record(iter + 1, err, omega, ctrl.beta_sq_est());
    if (err <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.state = std::move(state);
  return res;
}

// ---------------------------------------------------------------------------
// spectral-oracle verification report

struct OracleGridPoint {
  double omega = 0.0;
  double rho_measured = 0.0;
  double rho_predicted = 0.0;
  bool matched = false;
};

struct OracleReport {
  double beta = 0.0;
  Eigen::Index q = 0;
  double omega_opt_value = 0.0;
  double rho_at_omega_opt = 0.0;
  double argmin_omega = 0.0;  // over a fine grid of step 0.01
  std::vector<OracleGridPoint> grid;
  bool all_matched = true;
  bool argmin_ok = false;
};

inline OracleReport oracle_report(const SorSpectrum& spec,
                                  const std::vector<double>& omegas,
                                  double match_tol = 1e-8) {
  OracleReport rep;
  rep.beta = spec.beta;
  rep.q = spec.q;
  rep.omega_opt_value = omega_opt(spec.beta * spec.beta);
  for (double w : omegas) {
    OracleGridPoint pt;
    pt.omega = w;
    pt.rho_measured = spec.rho(w);
    pt.rho_predicted = rho_predicted(w, spec.beta);
    pt.matched = std::abs(pt.rho_measured - pt.rho_predicted) <= match_tol;
    rep.all_matched = rep.all_matched && pt.matched;
    rep.grid.push_back(pt);
  }
  rep.rho_at_omega_opt = spec.rho(rep.omega_opt_value);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 1; t < 200; ++t) {
    const double w = 0.01 * t;
    const double r = spec.rho(w);
    if (r < best) {
      best = r;
      rep.argmin_omega = w;
    }
  }
  rep.argmin_ok = std::abs(rep.argmin_omega - rep.omega_opt_value) <= 0.01 + 1e-12;
  return rep;
}

/// Finds a critical point by running plain AO (omega = 1) to err <= 1e-12
/// on a random dense-quadratic instance with an exactly rank-k global
/// minimizer, then runs the full oracle grid.
inline OracleReport run_oracle(const ExperimentConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const int m = cfg.n, n = std::max(cfg.n - 1, cfg.k + 1), k = cfg.k;
  const Eigen::MatrixXd W = detail::gaussian(m * n, m * n, rng);
  Eigen::MatrixXd C = W.transpose() * W / static_cast<double>(m * n);
  C.diagonal().array() += 0.5;
  const Eigen::MatrixXd Xstar =
      detail::gaussian(m, k, rng) * detail::gaussian(n, k, rng).transpose();
  const Eigen::VectorXd b = C * Eigen::Map<const Eigen::VectorXd>(Xstar.data(), m * n);
  DenseQuadraticObjective obj(DenseQuadraticData(
      C, Eigen::Map<const Eigen::MatrixXd>(b.data(), m, n)));

  RelaxConfig rc;
  rc.tol = 1e-12;
  rc.max_iters = cfg.max_iters;
  const FactorPair start = detail::random_start(m, n, k, rng);
  const RunResult res = run(obj, start, rc);
  if (!res.converged)
    throw NoConvergence("run_oracle: omega = 1 search did not reach 1e-12");

  const SorSpectrum spec = SorSpectrum::analyze(obj, res.pair);
  std::vector<double> omegas;
  for (int t = 1; t <= 7; ++t) omegas.push_back(0.25 * t);
  omegas.push_back(omega_opt(spec.beta * spec.beta));
  return oracle_report(spec, omegas);
}

// ---------------------------------------------------------------------------
// trace serialization (byte-deterministic for identical inputs)

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const ResidualTrace& trace) {
  os << "iter,err,omega_used,beta_sq_est\n";
  for (const auto& e : trace.entries) {
    os << e.iter << ',' << detail::fmt(e.err) << ',' << detail::fmt(e.omega_used)
       << ',';
    if (e.beta_sq_est) os << detail::fmt(*e.beta_sq_est);
    os << '\n';
  }
}

inline void write_trace_json(std::ostream& os, const ResidualTrace& trace) {
  os << "[\n";
  for (std::size_t t = 0; t < trace.entries.size(); ++t) {
    const auto& e = trace.entries[t];
    os << "  {\"iter\": " << e.iter << ", \"err\": " << detail::fmt(e.err)
       << ", \"omega_used\": " << detail::fmt(e.omega_used)
       << ", \"beta_sq_est\": ";
    if (e.beta_sq_est)
      os << detail::fmt(*e.beta_sq_est);
    else
      os << "null";
    os << '}' << (t + 1 < trace.entries.size() ? ",\n" : "\n");
  }
  os << "]\n";
}

inline void write_oracle_json(std::ostream& os, const OracleReport& rep) {
  os << "{\n  \"beta\": " << detail::fmt(rep.beta) << ",\n  \"q\": " << rep.q
     << ",\n  \"omega_opt\": " << detail::fmt(rep.omega_opt_value)
     << ",\n  \"rho_at_omega_opt\": " << detail::fmt(rep.rho_at_omega_opt)
     << ",\n  \"argmin_omega\": " << detail::fmt(rep.argmin_omega)
     << ",\n  \"argmin_ok\": " << (rep.argmin_ok ? "true" : "false")
     << ",\n  \"grid\": [\n";
  for (std::size_t t = 0; t < rep.grid.size(); ++t) {
    const auto& pt = rep.grid[t];
    os << "    {\"omega\": " << detail::fmt(pt.omega)
       << ", \"rho_measured\": " << detail::fmt(pt.rho_measured)
       << ", \"rho_predicted\": " << detail::fmt(pt.rho_predicted)
       << ", \"beta\": " << detail::fmt(rep.beta) << ", \"q\": " << rep.q
       << ", \"matched\": " << (pt.matched ? "true" : "false") << '}'
       << (t + 1 < rep.grid.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
}

}  // namespace relaxals
