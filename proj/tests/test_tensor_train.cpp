#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "relaxals/lyapunov.hpp"
#include "relaxals/qtt.hpp"
#include "relaxals/tensor_train.hpp"
#include "test_support.hpp"

using namespace relaxals;
using test_support::gaussian;

namespace {

// Rank-1 MPO O1 (x) O2 (x) ... from per-mode matrices; dense operator is the
// Kronecker product in row-major mode order.
TTOperator product_mpo(const std::vector<Eigen::MatrixXd>& factors) {
  TTOperator op;
  for (const auto& O : factors) {
    TTOpCore c;
    c.slices.assign(O.rows(), std::vector<Eigen::MatrixXd>(O.cols()));
    for (Eigen::Index i = 0; i < O.rows(); ++i)
      for (Eigen::Index j = 0; j < O.cols(); ++j)
        c.slices[i][j] = Eigen::MatrixXd::Constant(1, 1, O(i, j));
    op.cores.push_back(std::move(c));
  }
  return op;
}

Eigen::MatrixXd dense_kron(const std::vector<Eigen::MatrixXd>& factors) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& O : factors) {
    Eigen::MatrixXd next(acc.rows() * O.rows(), acc.cols() * O.cols());
    for (Eigen::Index i = 0; i < acc.rows(); ++i)
      for (Eigen::Index j = 0; j < acc.cols(); ++j)
        next.block(i * O.rows(), j * O.cols(), O.rows(), O.cols()) =
            acc(i, j) * O;
    acc = std::move(next);
  }
  return acc;
}

Eigen::MatrixXd small_spd(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::MatrixXd W = gaussian(n, n, rng);
  return W * W.transpose() / static_cast<double>(n) +
         Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("TTCore: unfoldings round-trip") {
  std::mt19937_64 rng(71);
  TTCore c;
  for (int i = 0; i < 3; ++i) c.slices.push_back(gaussian(2, 4, rng));
  const TTCore c1 = TTCore::from_left_unfold(c.left_unfold(), 2, 3);
  const TTCore c2 = TTCore::from_right_unfold(c.right_unfold(), 3, 4);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(c1.slices[i].isApprox(c.slices[i]));
    REQUIRE(c2.slices[i].isApprox(c.slices[i]));
  }
}

TEST_CASE("tt_eval and tt_full agree entrywise") {
  std::mt19937_64 rng(72);
  const std::vector<Eigen::Index> dims{2, 3, 2, 4};
  const TTTensor tt = tt_random(dims, {2, 3, 2}, rng);
  const Eigen::VectorXd full = tt_full(tt);
  Eigen::Index flat = 0;
  std::vector<Eigen::Index> idx(4, 0);
  for (idx[0] = 0; idx[0] < dims[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < dims[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < dims[2]; ++idx[2])
        for (idx[3] = 0; idx[3] < dims[3]; ++idx[3], ++flat)
          REQUIRE(tt_eval(tt, idx) == Catch::Approx(full(flat)).margin(1e-13));
}

TEST_CASE("tt_ones represents the all-ones tensor") {
  const TTTensor tt = tt_ones({2, 2, 3});
  const Eigen::VectorXd full = tt_full(tt);
  REQUIRE(full.size() == 12);
  REQUIRE((full.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("TTTensor: serialization round-trip is exact and deterministic") {
  std::mt19937_64 rng(73);
  const TTTensor tt = tt_random({2, 3, 2}, {2, 2}, rng);
  std::stringstream ss;
  tt.write(ss);
  const TTTensor back = TTTensor::read(ss);
  REQUIRE((tt_full(back) - tt_full(tt)).norm() == 0.0);
  std::stringstream s1, s2;
  tt.write(s1);
  back.write(s2);
  REQUIRE(s1.str() == s2.str());
}

TEST_CASE("TTTensor: consistency checks") {
  std::mt19937_64 rng(74);
  TTTensor tt = tt_random({2, 2}, {2}, rng);
  tt.cores[1].slices[0] = Eigen::MatrixXd::Zero(3, 1);
  tt.cores[1].slices[1] = Eigen::MatrixXd::Zero(3, 1);
  REQUIRE_THROWS_AS(tt.check_consistent(), Error);
  TTTensor bad = tt_random({2, 2}, {2}, rng);
  bad.cores[1].slices[0] = Eigen::MatrixXd::Zero(2, 2);
  bad.cores[1].slices[1] = Eigen::MatrixXd::Zero(2, 2);
  REQUIRE_THROWS_AS(bad.check_consistent(), Error);
}

TEST_CASE("apply_gauge: represented tensor is unchanged") {
  std::mt19937_64 rng(75);
  const TTTensor tt = tt_random({2, 3, 2}, {2, 2}, rng);
  GaugeTransform g;
  g.matrices.push_back(test_support::random_gauge(2, rng));
  g.matrices.push_back(test_support::random_gauge(2, rng));
  const TTTensor other = apply_gauge(tt, g);
  const Eigen::VectorXd full = tt_full(tt);
  REQUIRE((tt_full(other) - full).norm() <= 1e-11 * full.norm());

  GaugeTransform bad;
  bad.matrices.push_back(Eigen::MatrixXd::Zero(2, 2));
  bad.matrices.push_back(Eigen::MatrixXd::Identity(2, 2));
  REQUIRE_THROWS_AS(apply_gauge(tt, bad), SingularGauge);
}

TEST_CASE("orthogonalize: gauge conditions hold, tensor preserved") {
  std::mt19937_64 rng(76);
  const TTTensor tt = tt_random({2, 3, 2, 2}, {2, 3, 2}, rng);
  const Eigen::VectorXd full = tt_full(tt);
  for (Eigen::Index pivot = 1; pivot <= 4; ++pivot) {
    const TTTensor ortho = orthogonalize(tt, pivot);
    for (Eigen::Index mu = 0; mu < pivot - 1; ++mu)
      REQUIRE(detail::is_left_orthogonal(ortho.cores[mu], 1e-12));
    for (Eigen::Index mu = pivot; mu < 4; ++mu)
      REQUIRE(detail::is_right_orthogonal(ortho.cores[mu], 1e-12));
    REQUIRE((tt_full(ortho) - full).norm() <= 1e-11 * full.norm());
    // Pivot core carries the whole norm.
    double core_norm_sq = 0.0;
    for (const auto& s : ortho.cores[pivot - 1].slices)
      core_norm_sq += s.squaredNorm();
    REQUIRE(std::sqrt(core_norm_sq) ==
            Catch::Approx(full.norm()).epsilon(1e-10));
  }
  REQUIRE_THROWS_AS(orthogonalize(tt, 0), Error);
  REQUIRE_THROWS_AS(orthogonalize(tt, 5), Error);
}

TEST_CASE("tt_svd: exact recovery of a low-rank tensor") {
  std::mt19937_64 rng(77);
  const std::vector<Eigen::Index> dims{2, 3, 4, 2};
  const TTTensor tt = tt_random(dims, {2, 2, 2}, rng);
  const Eigen::VectorXd full = tt_full(tt);
  const TTTensor rec = tt_svd(full, dims);
  REQUIRE((tt_full(rec) - full).norm() <= 1e-10 * full.norm());
  const auto r = rec.ranks();
  REQUIRE(r[0] <= 2);
  REQUIRE(r[1] <= 2);
  REQUIRE(r[2] <= 2);
}

TEST_CASE("tt_svd: max_rank caps give best truncation error behavior") {
  std::mt19937_64 rng(78);
  const std::vector<Eigen::Index> dims{4, 4, 4};
  const Eigen::VectorXd dense = gaussian(64, 1, rng).col(0);
  const TTTensor full_rank = tt_svd(dense, dims);
  REQUIRE((tt_full(full_rank) - dense).norm() <= 1e-10 * dense.norm());
  const TTTensor capped = tt_svd(dense, dims, 2);
  for (auto r : capped.ranks()) REQUIRE(r <= 2);
  // Error decreases monotonically as the cap is raised.
  const double e2 = (tt_full(capped) - dense).norm();
  const double e3 = (tt_full(tt_svd(dense, dims, 3)) - dense).norm();
  REQUIRE(e3 <= e2 + 1e-14);
}

TEST_CASE("tt_apply: matches the dense Kronecker operator") {
  std::mt19937_64 rng(79);
  const std::vector<Eigen::Index> dims{2, 3, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(gaussian(n, n, rng));
  const TTOperator op = product_mpo(factors);
  const TTTensor tt = tt_random(dims, {2, 2}, rng);
  const Eigen::VectorXd expected = dense_kron(factors) * tt_full(tt);
  REQUIRE((tt_full(tt_apply(op, tt)) - expected).norm() <=
          1e-11 * expected.norm());
}

TEST_CASE("tt_dot and tt_norm match the dense inner product") {
  std::mt19937_64 rng(80);
  const std::vector<Eigen::Index> dims{2, 2, 3};
  const TTTensor a = tt_random(dims, {2, 2}, rng);
  const TTTensor b = tt_random(dims, {3, 2}, rng);
  const double dense = tt_full(a).dot(tt_full(b));
  REQUIRE(tt_dot(a, b) == Catch::Approx(dense).epsilon(1e-11));
  REQUIRE(tt_norm(a) == Catch::Approx(tt_full(a).norm()).epsilon(1e-11));
}

TEST_CASE("local_system: matches the dense frame Galerkin projection") {
  std::mt19937_64 rng(81);
  const std::vector<Eigen::Index> dims{2, 3, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(small_spd(n, rng));
  const TTOperator op = product_mpo(factors);
  const Eigen::MatrixXd Op = dense_kron(factors);
  const TTTensor rhs = tt_random(dims, {2, 2}, rng);
  const Eigen::VectorXd rhs_dense = tt_full(rhs);

  for (Eigen::Index mu = 1; mu <= 3; ++mu) {
    std::mt19937_64 rng2(82);
    TTTensor tt = orthogonalize(tt_random(dims, {2, 2}, rng2), mu);
    const LocalSystem sys = local_system(op, rhs, tt, mu);
    const auto& core = tt.cores[mu - 1];
    const Eigen::Index sz = core.left() * core.modes() * core.right();
    // Frame: column t is the full tensor with the pivot core set to e_t.
    Eigen::MatrixXd F(rhs_dense.size(), sz);
    for (Eigen::Index t = 0; t < sz; ++t) {
      TTTensor probe = tt;
      Eigen::VectorXd e = Eigen::VectorXd::Zero(sz);
      e(t) = 1.0;
      probe.cores[mu - 1] =
          detail::core_unvec(e, core.left(), core.modes(), core.right());
      F.col(t) = tt_full(probe);
    }
    REQUIRE((F.transpose() * Op * F - sys.H).norm() <= 1e-10 * sys.H.norm());
    REQUIRE((F.transpose() * rhs_dense - sys.b).norm() <=
            1e-10 * sys.b.norm());
    // The frame is orthonormal, so vec(core) reproduces the tensor.
    REQUIRE((F * detail::core_vec(core) - tt_full(tt)).norm() <=
            1e-10 * tt_full(tt).norm());
  }
}

TEST_CASE("local_system: rejects a train in the wrong gauge") {
  std::mt19937_64 rng(83);
  const std::vector<Eigen::Index> dims{2, 2, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(small_spd(n, rng));
  const TTOperator op = product_mpo(factors);
  const TTTensor rhs = tt_random(dims, {2, 2}, rng);
  const TTTensor tt = tt_random(dims, {2, 2}, rng);  // not orthogonalized
  REQUIRE_THROWS_AS(local_system(op, rhs, tt, 1), NotOrthogonalized);
}

TEST_CASE("relaxed_als_sweep: exact solution is a fixed point") {
  std::mt19937_64 rng(84);
  const std::vector<Eigen::Index> dims{2, 3, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(small_spd(n, rng));
  const TTOperator op = product_mpo(factors);
  const TTTensor star = tt_random(dims, {2, 2}, rng);
  const TTTensor rhs = tt_apply(op, star);
  const Eigen::VectorXd full = tt_full(star);
  for (double omega : {0.7, 1.0, 1.5}) {
    const TTTensor next = relaxed_als_sweep(star, op, rhs, omega);
    REQUIRE((tt_full(next) - full).norm() <= 1e-9 * full.norm());
  }
}

TEST_CASE("relaxed_als_sweep: omega = 1 converges to the solution") {
  std::mt19937_64 rng(85);
  const std::vector<Eigen::Index> dims{2, 2, 2, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(small_spd(n, rng));
  const TTOperator op = product_mpo(factors);
  const TTTensor star = tt_random(dims, {2, 2, 2}, rng);
  const TTTensor rhs = tt_apply(op, star);
  TTTensor tt = tt_random(dims, {2, 2, 2}, rng);
  double prev = max_local_residual(tt, op, rhs);
  for (int sweep = 0; sweep < 30; ++sweep) {
    tt = relaxed_als_sweep(tt, op, rhs, 1.0);
    const double res = max_local_residual(tt, op, rhs);
    // Monotone until the residual reaches the rounding floor.
    if (prev > 1e-13) REQUIRE(res <= prev * 1.001);
    prev = res;
  }
  REQUIRE(prev <= 1e-8);
}

TEST_CASE("relaxed_als_sweep: gauge invariance of the represented iterate") {
  std::mt19937_64 rng(86);
  const std::vector<Eigen::Index> dims{2, 3, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(small_spd(n, rng));
  const TTOperator op = product_mpo(factors);
  const TTTensor rhs = tt_random(dims, {2, 2}, rng);
  TTTensor a = tt_random(dims, {2, 2}, rng);
  GaugeTransform g;
  g.matrices.push_back(test_support::random_gauge(2, rng));
  g.matrices.push_back(test_support::random_gauge(2, rng));
  TTTensor b = apply_gauge(a, g);
  for (int sweep = 0; sweep < 5; ++sweep) {
    a = relaxed_als_sweep(a, op, rhs, 1.3);
    b = relaxed_als_sweep(b, op, rhs, 1.3);
    const Eigen::VectorXd fa = tt_full(a);
    REQUIRE((fa - tt_full(b)).norm() <= 1e-9 * fa.norm());
  }
}

TEST_CASE("max_local_residual: zero at the solution, positive elsewhere") {
  std::mt19937_64 rng(87);
  const std::vector<Eigen::Index> dims{2, 2, 2};
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims) factors.push_back(small_spd(n, rng));
  const TTOperator op = product_mpo(factors);
  const TTTensor star = tt_random(dims, {2, 2}, rng);
  const TTTensor rhs = tt_apply(op, star);
  REQUIRE(max_local_residual(star, op, rhs) <= 1e-10);
  const TTTensor other = tt_random(dims, {2, 2}, rng);
  REQUIRE(max_local_residual(other, op, rhs) > 1e-4);
}

// --- qtt ------------------------------------------------------------------

TEST_CASE("qtt_level: powers of two only") {
  REQUIRE(qtt_level(2) == 1);
  REQUIRE(qtt_level(32) == 5);
  REQUIRE_THROWS_AS(qtt_level(12), NotPowerOfTwo);
  REQUIRE_THROWS_AS(qtt_level(1), NotPowerOfTwo);
}

TEST_CASE("qtt_reshape: row-major flattening and round-trip") {
  Eigen::MatrixXd M(2, 2);
  M << 1, 2, 3, 4;
  const Eigen::VectorXd t = qtt_reshape(M);
  REQUIRE(t(0) == 1.0);
  REQUIRE(t(1) == 2.0);
  REQUIRE(t(2) == 3.0);
  REQUIRE(t(3) == 4.0);
  REQUIRE(qtt_unreshape(t, 2).isApprox(M));
  std::mt19937_64 rng(88);
  const Eigen::MatrixXd X = gaussian(8, 8, rng);
  REQUIRE(qtt_unreshape(qtt_reshape(X), 8).isApprox(X));
}

TEST_CASE("qtt_tensor: exact representation at full rank") {
  std::mt19937_64 rng(89);
  const Eigen::MatrixXd X = gaussian(8, 8, rng);
  const TTTensor tt = qtt_tensor(X);
  REQUIRE(tt.order() == 6);
  REQUIRE((qtt_unreshape(tt_full(tt), 8) - X).norm() <= 1e-10 * X.norm());
}

TEST_CASE("qtt_operator: reproduces the dense Lyapunov action") {
  std::mt19937_64 rng(90);
  for (int d : {1, 2, 3}) {
    const Eigen::Index n = Eigen::Index(1) << d;
    const Eigen::MatrixXd A = small_spd(n, rng);
    const TTOperator op = qtt_operator(A);
    const Eigen::MatrixXd X = gaussian(n, n, rng);
    const Eigen::MatrixXd expected = A * X + X * A.transpose();
    const TTTensor applied = tt_apply(op, qtt_tensor(X));
    REQUIRE((qtt_unreshape(tt_full(applied), n) - expected).norm() <=
            1e-10 * expected.norm());
  }
}

TEST_CASE("qtt_operator: tridiagonal A keeps modest MPO ranks") {
  const Eigen::MatrixXd A = tridiag_laplacian(16);
  const TTOperator op = qtt_operator(A);
  for (const auto& core : op.cores) {
    REQUIRE(core.left() <= 8);
    REQUIRE(core.right() <= 8);
  }
}
