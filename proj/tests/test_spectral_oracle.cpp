#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "relaxals/spectral_oracle.hpp"
#include "test_support.hpp"

using namespace relaxals;
using test_support::gaussian;
using test_support::quadratic_with_rank_k_min;

namespace {

struct Fixture {
  DenseQuadraticObjective obj;
  FactorPair star;
  SorSpectrum spec;
};

Fixture make_fixture(int m, int n, int k, unsigned seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd Ustar, Vstar;
  auto obj = quadratic_with_rank_k_min(m, n, k, rng, &Ustar, &Vstar);
  FactorPair star{Ustar, Vstar};
  SorSpectrum spec = SorSpectrum::analyze(obj, star);
  return {std::move(obj), std::move(star), std::move(spec)};
}

}  // namespace

TEST_CASE("assemble_hessian: symmetric, matches finite differences") {
  std::mt19937_64 rng(51);
  const auto obj = quadratic_with_rank_k_min(4, 3, 2, rng);
  const FactorPair pair{gaussian(4, 2, rng), gaussian(3, 2, rng)};
  // validate=true internally compares every column against central
  // differences of the exact gradient and throws on disagreement.
  const Eigen::MatrixXd H = assemble_hessian(obj, pair, /*validate=*/true);
  REQUIRE((H - H.transpose()).norm() <= 1e-12 * H.norm());
  REQUIRE(H.rows() == 4 * 2 + 3 * 2);
}

TEST_CASE("assemble_hessian: dimension bound enforced") {
  std::mt19937_64 rng(52);
  const auto obj = quadratic_with_rank_k_min(3, 3, 1, rng);
  FactorPair huge{Eigen::MatrixXd::Zero(3000, 1), Eigen::MatrixXd::Zero(3000, 1)};
  REQUIRE_THROWS_AS(assemble_hessian(obj, huge, false), TooLarge);
}

TEST_CASE("split_blocks: exact reassembly and block placement") {
  std::mt19937_64 rng(53);
  const int m = 3, n = 2, k = 2;
  const int p = (m + n) * k;
  Eigen::MatrixXd H = gaussian(p, p, rng);
  H = ((H + H.transpose()) / 2.0).eval();
  const auto [D, E] = split_blocks(H, m, n, k);
  REQUIRE((D + E + E.transpose() - H).norm() <= 1e-14 * H.norm());
  REQUIRE(D.topRightCorner(m * k, n * k).norm() == 0.0);
  REQUIRE(E.topRightCorner(m * k, n * k).norm() == 0.0);
  REQUIRE(E.topLeftCorner(m * k, m * k).norm() == 0.0);
  REQUIRE(E.bottomRightCorner(n * k, n * k).norm() == 0.0);
  REQUIRE_THROWS_AS(split_blocks(H, m, n, k + 1), Error);
}

TEST_CASE("kernel_basis: dimension k^2 at a valid critical point") {
  const auto fx = make_fixture(5, 4, 2, 54);
  REQUIRE(fx.spec.q == 4);
  // Basis is orthonormal and numerically annihilated by H.
  const Eigen::MatrixXd& K = fx.spec.kernel;
  REQUIRE((K.transpose() * K - Eigen::MatrixXd::Identity(4, 4)).norm() <=
          1e-12);
  REQUIRE((fx.spec.H * K).norm() <= 1e-7 * fx.spec.H.norm());
}

TEST_CASE("kernel_basis: gauge directions span the kernel") {
  const auto fx = make_fixture(5, 4, 2, 55);
  // The k x k gauge generators give tangent directions (U A, -V A^T) along
  // which F is flat; each must lie in the numerical kernel of H.
  const int m = 5, n = 4, k = 2;
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
      A(r, c) = 1.0;
      const Eigen::MatrixXd dU = fx.star.U * A;
      const Eigen::MatrixXd dV = -fx.star.V * A.transpose();
      Eigen::VectorXd dir(m * k + n * k);
      Eigen::Map<Eigen::MatrixXd>(dir.data(), m, k) = dU;
      Eigen::Map<Eigen::MatrixXd>(dir.data() + m * k, n, k) = dV;
      dir.normalize();
      REQUIRE((fx.spec.H * dir).norm() <= 1e-7 * fx.spec.H.norm());
    }
}

TEST_CASE("t_omega: omega = 1 is the Gauss-Seidel matrix") {
  const auto fx = make_fixture(4, 3, 2, 56);
  const Eigen::MatrixXd T = t_omega(fx.spec.H, fx.spec.D, fx.spec.E, 1.0);
  // (D + E) T = -E^T by construction at omega = 1.
  const Eigen::MatrixXd lhs = (fx.spec.D + fx.spec.E) * T;
  REQUIRE((lhs + fx.spec.E.transpose()).norm() <=
          1e-10 * fx.spec.H.norm());
}

TEST_CASE("rho_on_W: measured rho(1) equals beta^2") {
  const auto fx = make_fixture(5, 4, 2, 57);
  const double rho1 = fx.spec.rho(1.0);
  REQUIRE(rho1 == Catch::Approx(fx.spec.beta * fx.spec.beta).epsilon(1e-8));
}

TEST_CASE("rho_on_W: matches the closed-form curve away from omega_opt") {
  const auto fx = make_fixture(5, 4, 2, 58);
  const double beta = fx.spec.beta;
  const double w_opt = omega_opt(beta * beta);
  for (double omega : {0.5, 0.8, 1.0, 1.1, 1.9}) {
    const double measured = fx.spec.rho(omega);
    const double predicted = rho_predicted(omega, beta);
    // The defective eigenvalue at omega_opt limits eigensolver accuracy
    // near the branch point; these omegas stay away from it.
    if (std::abs(omega - w_opt) < 0.05) continue;
    REQUIRE(measured == Catch::Approx(predicted).epsilon(1e-7).margin(1e-9));
  }
}

TEST_CASE("rho_on_W: above omega_opt the rate is omega - 1") {
  const auto fx = make_fixture(5, 4, 2, 59);
  const double w_opt = omega_opt(fx.spec.beta * fx.spec.beta);
  for (double omega : {w_opt + 0.05, w_opt + 0.2, 1.95}) {
    if (omega >= 2.0) continue;
    REQUIRE(fx.spec.rho(omega) ==
            Catch::Approx(omega - 1.0).epsilon(1e-7).margin(1e-9));
  }
}

TEST_CASE("jacobi_beta: hand-built 2x2 two-block system") {
  // H = [[1, c], [c, 1]], D = I, Jacobi matrix I - H = [[0, -c], [-c, 0]]
  // with spectrum {+-c}; no kernel, so beta = c.
  const double c = 0.37;
  Eigen::MatrixXd H(2, 2);
  H << 1.0, c, c, 1.0;
  const Eigen::MatrixXd D = Eigen::MatrixXd::Identity(2, 2);
  REQUIRE(jacobi_beta(H, D, 0) == Catch::Approx(c).epsilon(1e-12));
  // A zero Hessian has a two-dimensional kernel; dropping its two unit
  // Jacobi eigenvalues empties the spectrum.
  Eigen::MatrixXd H2 = Eigen::MatrixXd::Zero(2, 2);
  REQUIRE_THROWS_AS(jacobi_beta(H2, D, 2), AllUnitEigenvalues);
}

TEST_CASE("young_check: every T_omega eigenvalue has a Jacobi partner") {
  const auto fx = make_fixture(5, 4, 2, 60);
  for (double omega : {0.7, 1.0, 1.3, 1.8}) {
    const YoungReport rep =
        young_check(fx.spec.H, fx.spec.D, fx.spec.E, omega);
    REQUIRE_FALSE(rep.pairings.empty());
    for (const auto& pr : rep.pairings)
      REQUIRE(pr.mismatch <= 1e-7 * std::max(1.0, std::abs(pr.lambda)));
  }
}

TEST_CASE("young_check: complex pairs appear above omega_opt") {
  const auto fx = make_fixture(5, 4, 2, 61);
  const double w = std::min(1.95, omega_opt(fx.spec.beta * fx.spec.beta) + 0.1);
  const YoungReport rep = young_check(fx.spec.H, fx.spec.D, fx.spec.E, w);
  bool complex_found = false;
  for (const auto& pr : rep.pairings) {
    if (std::abs(pr.lambda.imag()) > 1e-10) {
      complex_found = true;
      // Above the branch point the modulus collapses onto omega - 1.
      REQUIRE(std::abs(pr.lambda) == Catch::Approx(w - 1.0).epsilon(1e-6));
    }
  }
  REQUIRE(complex_found);
}

TEST_CASE("SorSpectrum: gauge invariance of beta and rho") {
  std::mt19937_64 rng(62);
  Eigen::MatrixXd Ustar, Vstar;
  const auto obj = quadratic_with_rank_k_min(5, 4, 2, rng, &Ustar, &Vstar);
  const FactorPair star{Ustar, Vstar};
  const SorSpectrum a = SorSpectrum::analyze(obj, star, false);
  const Eigen::MatrixXd A = test_support::random_gauge(2, rng, 3.0);
  const SorSpectrum b = SorSpectrum::analyze(obj, reparametrize(star, A), false);
  REQUIRE(a.q == b.q);
  REQUIRE(a.beta == Catch::Approx(b.beta).epsilon(1e-7));
  for (double omega : {0.8, 1.0}) {
    REQUIRE(a.rho(omega) == Catch::Approx(b.rho(omega)).epsilon(1e-6));
  }
}

TEST_CASE("SorSpectrum: rank-1 no-gauge-freedom sanity") {
  const auto fx = make_fixture(4, 3, 1, 63);
  REQUIRE(fx.spec.q == 1);
  REQUIRE(fx.spec.beta >= 0.0);
  REQUIRE(fx.spec.beta < 1.0);
}
