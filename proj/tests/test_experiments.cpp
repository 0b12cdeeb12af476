#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "relaxals/experiments.hpp"

using namespace relaxals;

TEST_CASE("make_completion_instance: deterministic and consistent") {
  const CompletionObjective a = make_completion_instance(30, 3, 3.0, 5);
  const CompletionObjective b = make_completion_instance(30, 3, 3.0, 5);
  REQUIRE(a.data().observed_norm() == b.data().observed_norm());
  const CompletionObjective c = make_completion_instance(30, 3, 3.0, 6);
  REQUIRE(a.data().observed_norm() != c.data().observed_norm());
}

TEST_CASE("run_completion: auto mode converges on a small instance") {
  ExperimentConfig cfg;
  cfg.n = 40;
  cfg.k = 3;
  cfg.os = 3.0;
  cfg.auto_omega = true;
  cfg.activation_iter = 12;
  cfg.max_iters = 400;
  cfg.tol = 1e-10;
  cfg.seed = 3;
  const RunResult res = run_completion(cfg);
  REQUIRE(res.converged);
  REQUIRE(res.trace.back().err <= 1e-10);
  // Trace contract: omega = 1 up to activation, frozen value afterwards,
  // beta_sq_est recorded exactly from the freeze on.
  bool saw_frozen = false;
  double frozen = 0.0;
  for (const auto& e : res.trace.entries) {
    if (e.iter == 0) continue;
    if (!saw_frozen && e.omega_used != 1.0) {
      saw_frozen = true;
      frozen = e.omega_used;
      REQUIRE(e.iter == cfg.activation_iter + 1);
    }
    if (saw_frozen) {
      REQUIRE(e.omega_used == frozen);
      REQUIRE(e.beta_sq_est.has_value());
      REQUIRE(frozen == omega_opt(*e.beta_sq_est));
    } else {
      REQUIRE_FALSE(e.beta_sq_est.has_value());
    }
  }
  REQUIRE(saw_frozen);
}

TEST_CASE("run_completion: identical seeds give identical traces") {
  ExperimentConfig cfg;
  cfg.n = 30;
  cfg.k = 3;
  cfg.max_iters = 60;
  cfg.tol = 1e-12;
  cfg.seed = 9;
  const RunResult a = run_completion(cfg);
  const RunResult b = run_completion(cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (int t = 0; t < a.trace.size(); ++t) {
    REQUIRE(a.trace.entries[t].err == b.trace.entries[t].err);
    REQUIRE(a.trace.entries[t].omega_used == b.trace.entries[t].omega_used);
  }
}

TEST_CASE("lyapunov_target: prescribed singular spectrum") {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd X = lyapunov_target(64, rng);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X);
  const Eigen::VectorXd& s = svd.singularValues();
  REQUIRE(s(0) == Catch::Approx(1.0).epsilon(1e-10));
  REQUIRE(s(1) == Catch::Approx(0.5).epsilon(1e-10));
  REQUIRE(s(2) == Catch::Approx(0.495).epsilon(1e-10));
  REQUIRE(s(2) / s(1) == Catch::Approx(0.99).epsilon(1e-10));
  REQUIRE(s(3) == Catch::Approx(0.2475).epsilon(1e-10));
}

TEST_CASE("run_lyapunov: auto mode reaches a tight projected residual") {
  ExperimentConfig cfg;
  cfg.n = 64;
  cfg.k = 2;
  cfg.auto_omega = true;
  cfg.activation_iter = 12;
  cfg.max_iters = 2000;
  cfg.tol = 1e-10;
  cfg.seed = 1;
  const RunResult res = run_lyapunov(cfg);
  REQUIRE(res.converged);
  REQUIRE(res.trace.back().err <= 1e-10);
  REQUIRE(res.trace.back().omega_used > 1.0);
}

TEST_CASE("run_qtt: relaxed sweeps solve the small QTT system") {
  ExperimentConfig cfg;
  cfg.d = 3;
  cfg.k = 4;
  cfg.auto_omega = true;
  cfg.activation_iter = 15;
  cfg.max_iters = 120;
  cfg.tol = 1e-9;
  cfg.seed = 2;
  const QttRunResult res = run_qtt(cfg);
  REQUIRE(res.converged);
  REQUIRE(res.trace.back().err <= 1e-9);
  // Spot-check against the dense solve.
  const Eigen::Index n = Eigen::Index(1) << cfg.d;
  const Eigen::MatrixXd A = tridiag_laplacian(static_cast<int>(n));
  const Eigen::MatrixXd B = Eigen::MatrixXd::Ones(n, n);
  const Eigen::MatrixXd X = sylvester_small(A, A, B);
  const Eigen::MatrixXd got = qtt_unreshape(tt_full(res.state), n);
  REQUIRE((got - X).norm() <= 1e-6 * X.norm());
}

TEST_CASE("run_oracle: theory matches measurement on the whole grid") {
  ExperimentConfig cfg;
  cfg.n = 6;
  cfg.k = 2;
  cfg.max_iters = 3000;
  cfg.seed = 4;
  const OracleReport rep = run_oracle(cfg);
  REQUIRE(rep.q == 4);
  REQUIRE(rep.beta > 0.0);
  REQUIRE(rep.beta < 1.0);
  REQUIRE(rep.all_matched);
  REQUIRE(rep.argmin_ok);
  REQUIRE(rep.grid.size() == 8);
  for (const auto& pt : rep.grid) {
    REQUIRE(pt.matched);
    REQUIRE(std::abs(pt.rho_measured - pt.rho_predicted) <= 1e-8);
  }
}

TEST_CASE("write_trace_csv: header, empty estimate cells, determinism") {
  ResidualTrace trace;
  trace.record(0, 1.0, 1.0);
  trace.record(1, 0.5, 1.0);
  trace.record(2, 0.25, 1.25, 0.5);
  std::stringstream ss;
  write_trace_csv(ss, trace);
  const std::string text = ss.str();
  REQUIRE(text.rfind("iter,err,omega_used,beta_sq_est\n", 0) == 0);
  REQUIRE(text.find("0,1,1,\n") != std::string::npos);
  REQUIRE(text.find("2,0.25,1.25,0.5\n") != std::string::npos);
  std::stringstream ss2;
  write_trace_csv(ss2, trace);
  REQUIRE(ss2.str() == text);
}

TEST_CASE("write_trace_json: explicit nulls and array shape") {
  ResidualTrace trace;
  trace.record(0, 1.0, 1.0);
  trace.record(1, 0.25, 1.25, 0.5);
  std::stringstream ss;
  write_trace_json(ss, trace);
  const std::string text = ss.str();
  REQUIRE(text.front() == '[');
  REQUIRE(text.find("\"beta_sq_est\": null") != std::string::npos);
  REQUIRE(text.find("\"beta_sq_est\": 0.5") != std::string::npos);
  REQUIRE(text.find("\"iter\": 1") != std::string::npos);
}

TEST_CASE("write_oracle_json: per-point records carry all fields") {
  ExperimentConfig cfg;
  cfg.n = 5;
  cfg.k = 1;
  cfg.max_iters = 3000;
  cfg.seed = 6;
  const OracleReport rep = run_oracle(cfg);
  std::stringstream ss;
  write_oracle_json(ss, rep);
  const std::string text = ss.str();
  for (const char* key : {"\"omega\"", "\"rho_measured\"", "\"rho_predicted\"",
                          "\"beta\"", "\"q\"", "\"matched\"", "\"argmin_omega\""})
    REQUIRE(text.find(key) != std::string::npos);
  REQUIRE(text.find("\"matched\": true") != std::string::npos);
}
