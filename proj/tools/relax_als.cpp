// Command-line front end: runs one of the experiments and writes the
// convergence trace (csv/json) or the oracle report (json).
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "relaxals/experiments.hpp"

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitError = 1;
constexpr int kExitMaxIters = 2;

struct CliOptions {
  relaxals::ExperimentConfig cfg;
  std::string omega_spec = "auto";
  std::string out;
  std::string format = "csv";
};

void parse_omega(CliOptions& opt) {
  if (opt.omega_spec == "auto") {
    opt.cfg.auto_omega = true;
    return;
  }
  opt.cfg.auto_omega = false;
  std::size_t pos = 0;
  opt.cfg.omega = std::stod(opt.omega_spec, &pos);
  if (pos != opt.omega_spec.size())
    throw CLI::ValidationError("--omega", "expected a number or 'auto'");
  if (!(opt.cfg.omega > 0.0 && opt.cfg.omega < 2.0))
    throw CLI::ValidationError("--omega", "must lie in (0, 2) or be 'auto'");
}

int write_output(const CliOptions& opt,
                 const std::function<void(std::ostream&)>& writer) {
  if (opt.out.empty()) {
    writer(std::cout);
    return 0;
  }
  std::ofstream os(opt.out);
  if (!os) {
    std::cerr << "relax-als: cannot open output file '" << opt.out << "'\n";
    return kExitError;
  }
  writer(os);
  return 0;
}

int emit_trace(const CliOptions& opt, const relaxals::ResidualTrace& trace,
               bool converged) {
  auto writer = [&](std::ostream& os) {
    if (opt.format == "json")
      relaxals::write_trace_json(os, trace);
    else
      relaxals::write_trace_csv(os, trace);
  };
  if (const int rc = write_output(opt, writer)) return rc;
  return converged ? kExitConverged : kExitMaxIters;
}

void add_common(CLI::App* sub, CliOptions& opt) {
  sub->add_option("--omega", opt.omega_spec,
                  "relaxation parameter in (0,2), or 'auto'")
      ->capture_default_str();
  sub->add_option("--activate-after", opt.cfg.activation_iter,
                  "iteration at which auto mode estimates omega")
      ->capture_default_str();
  sub->add_option("--max-iters", opt.cfg.max_iters, "sweep budget")
      ->capture_default_str();
  sub->add_option("--tol", opt.cfg.tol, "stopping tolerance on the error metric")
      ->capture_default_str();
  sub->add_option("--seed", opt.cfg.seed, "RNG seed")->capture_default_str();
  sub->add_option("--out", opt.out, "output file (default: stdout)");
  sub->add_option("--format", opt.format, "trace format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Alternating optimization with overrelaxation for low-rank matrix and "
      "tensor-train problems"};
  app.require_subcommand(1);

  CliOptions completion;
  completion.cfg.activation_iter = 12;
  auto* sub_completion = app.add_subcommand(
      "completion", "matrix completion with a random rank-k ground truth");
  sub_completion->add_option("--n", completion.cfg.n, "matrix size")
      ->capture_default_str();
  sub_completion->add_option("--k", completion.cfg.k, "rank")
      ->capture_default_str();
  sub_completion
      ->add_option("--os", completion.cfg.os, "oversampling factor")
      ->capture_default_str();
  add_common(sub_completion, completion);

  CliOptions lyapunov;
  lyapunov.cfg.n = 256;
  lyapunov.cfg.k = 2;
  lyapunov.cfg.activation_iter = 50;
  lyapunov.cfg.max_iters = 3000;
  auto* sub_lyapunov = app.add_subcommand(
      "lyapunov", "low-rank Lyapunov equation with the 1D Laplacian");
  sub_lyapunov->add_option("--n", lyapunov.cfg.n, "matrix size")
      ->capture_default_str();
  sub_lyapunov->add_option("--k", lyapunov.cfg.k, "rank")
      ->capture_default_str();
  add_common(sub_lyapunov, lyapunov);

  CliOptions qtt;
  qtt.cfg.d = 5;
  qtt.cfg.k = 4;
  qtt.cfg.activation_iter = 15;
  qtt.cfg.max_iters = 200;
  auto* sub_qtt = app.add_subcommand(
      "qtt", "QTT Lyapunov system solved by relaxed one-site TT-ALS");
  sub_qtt->add_option("--d", qtt.cfg.d, "quantization levels (n = 2^d)")
      ->capture_default_str();
  sub_qtt->add_option("--k", qtt.cfg.k, "TT rank cap")->capture_default_str();
  add_common(sub_qtt, qtt);

  CliOptions oracle;
  oracle.cfg.n = 6;
  oracle.cfg.k = 2;
  oracle.cfg.max_iters = 5000;
  auto* sub_oracle = app.add_subcommand(
      "oracle", "spectral verification of the predicted rates at a critical "
                "point of a dense quadratic testbed");
  sub_oracle->add_option("--n", oracle.cfg.n, "matrix size of the testbed")
      ->capture_default_str();
  sub_oracle->add_option("--k", oracle.cfg.k, "rank")->capture_default_str();
  add_common(sub_oracle, oracle);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sub_completion) {
      parse_omega(completion);
      const relaxals::RunResult res = relaxals::run_completion(completion.cfg);
      return emit_trace(completion, res.trace, res.converged);
    }
    if (*sub_lyapunov) {
      parse_omega(lyapunov);
      const relaxals::RunResult res = relaxals::run_lyapunov(lyapunov.cfg);
      return emit_trace(lyapunov, res.trace, res.converged);
    }
    if (*sub_qtt) {
      parse_omega(qtt);
      const relaxals::QttRunResult res = relaxals::run_qtt(qtt.cfg);
      return emit_trace(qtt, res.trace, res.converged);
    }
    if (*sub_oracle) {
      parse_omega(oracle);
      const relaxals::OracleReport rep = relaxals::run_oracle(oracle.cfg);
      const int rc = write_output(oracle, [&](std::ostream& os) {
        relaxals::write_oracle_json(os, rep);
      });
      if (rc) return rc;
      return rep.all_matched && rep.argmin_ok ? kExitConverged : kExitMaxIters;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "relax-als: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
