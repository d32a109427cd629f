#include "wavespec/numlin.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace wavespec::numlin;

namespace {

std::mt19937_64 rng(20240817);

Vec random_vec(int n) {
  std::normal_distribution<double> dist;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

Vec random_weights(int n) {
  std::uniform_real_distribution<double> dist(0.3, 2.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

Mat random_mat(int r, int c) {
  Mat m(r, c);
  for (int j = 0; j < c; ++j) m.col(j) = random_vec(r);
  return m;
}

SymOp random_symop(const Vec& w) {
  int n = static_cast<int>(w.size());
  Mat s = random_mat(n, n);
  s = 0.5 * (s + s.transpose()).eval();
  // conjugate a symmetric matrix back into the weighted picture
  Vec d = sqrt_weights(w);
  return SymOp(d.cwiseInverse().asDiagonal() * s * d.asDiagonal(), w);
}

Vec e(int n, int i) {
  Vec v = Vec::Zero(n);
  v(i) = 1;
  return v;
}

}  // namespace

TEST_CASE("orthonormalize colinear input collapses to one direction") {
  Vec w = Vec::Ones(4);
  Mat m(4, 2);
  m.col(0) = e(4, 0);
  m.col(1) = 2 * e(4, 0);
  Subspace s = orthonormalize(m, w, 1e-8);
  REQUIRE(s.rank() == 1);
  REQUIRE(std::abs(std::abs(s.frame(0, 0)) - 1.0) < 1e-12);
  REQUIRE(s.frame.col(0).tail(3).norm() < 1e-12);
}

TEST_CASE("orthonormalize orthogonal pair keeps both") {
  Vec w = Vec::Ones(4);
  Mat m(4, 2);
  m.col(0) << 1, 1, 0, 0;
  m.col(1) << 1, -1, 0, 0;
  Subspace s = orthonormalize(m, w, 1e-8);
  REQUIRE(s.rank() == 2);
  Subspace target = orthonormalize(Mat(Mat::Identity(4, 4).leftCols(2)), w, 1e-8);
  auto angles = principal_angles(s, target);
  for (double a : angles) REQUIRE(a < 1e-10);
}

TEST_CASE("orthonormalize drops a nearly dependent third vector") {
  Vec w = random_weights(4);
  Mat m(4, 3);
  m.col(0) = random_vec(4);
  m.col(1) = random_vec(4);
  m.col(2) = m.col(0) + m.col(1) + 1e-12 * random_vec(4);
  // exact-arithmetic rank of the construction is 2
  REQUIRE(orthonormalize(m, w, 1e-8).rank() == 2);
}

TEST_CASE("orthonormalize edge cases") {
  Vec w = Vec::Ones(3);
  REQUIRE(orthonormalize(Mat(Mat::Zero(3, 2)), w).rank() == 0);
  REQUIRE_THROWS(orthonormalize(Mat(Mat::Ones(4, 1)), w));
  REQUIRE_THROWS(orthonormalize(Mat(Mat::Ones(3, 1)), w, 0.0));
}

TEST_CASE("frame is weighted-orthonormal and projection is idempotent") {
  Vec w = random_weights(6);
  Subspace s = orthonormalize(random_mat(6, 3), w);
  Mat gram = s.frame.transpose() * w.asDiagonal() * s.frame;
  REQUIRE((gram - Mat::Identity(3, 3)).norm() < 1e-10);
  Mat p = s.projection();
  REQUIRE((p * p - p).norm() < 1e-10);
  // W-self-adjoint: W P = P^T W
  REQUIRE((Mat(w.asDiagonal()) * p - p.transpose() * Mat(w.asDiagonal())).norm() < 1e-10);
}

TEST_CASE("lattice meet of coordinate planes") {
  Vec w = Vec::Ones(3);
  Subspace a = orthonormalize(Mat(Mat::Identity(3, 3).leftCols(2)), w);
  Mat mb(3, 2);
  mb.col(0) = e(3, 1);
  mb.col(1) = e(3, 2);
  Subspace b = orthonormalize(mb, w);
  Subspace m = lattice_ops(a, b, LatticeKind::meet);
  REQUIRE(m.rank() == 1);
  REQUIRE(std::abs(std::abs(m.frame(1, 0)) - 1.0) < 1e-10);
}

TEST_CASE("lattice complement of a line in dim 3") {
  Vec w = Vec::Ones(3);
  Subspace a = orthonormalize(Mat(e(3, 0)), w);
  Subspace c = lattice_ops(a, a, LatticeKind::complement);
  REQUIRE(c.rank() == 2);
  for (int j = 0; j < 2; ++j) REQUIRE(std::abs(c.frame(0, j)) < 1e-10);
}

TEST_CASE("meet of random 3-dim subspaces of a 4-dim space vs nullspace oracle") {
  Vec w = random_weights(4);
  Subspace a = orthonormalize(random_mat(4, 3), w);
  Subspace b = orthonormalize(random_mat(4, 3), w);
  Subspace m = lattice_ops(a, b, LatticeKind::meet);
  REQUIRE(m.rank() == 2);
  // oracle: common vectors solve the stacked system [P_a - I; P_b - I] x = 0
  Mat stack(8, 4);
  stack.topRows(4) = a.projection() - Mat::Identity(4, 4);
  stack.bottomRows(4) = b.projection() - Mat::Identity(4, 4);
  Eigen::BDCSVD<Mat> svd(stack, Eigen::ComputeFullV);
  int null_rank = 0;
  for (int i = 0; i < 4; ++i)
    if (svd.singularValues()(i) < 1e-8 * svd.singularValues()(0)) ++null_rank;
  REQUIRE(null_rank == m.rank());
  Subspace oracle = orthonormalize(Mat(svd.matrixV().rightCols(null_rank)), w);
  auto angles = principal_angles(m, oracle);
  for (double th : angles) REQUIRE(th < 1e-7);
}

TEST_CASE("principal angles on coordinate examples") {
  Vec w = Vec::Ones(3);
  Subspace a = orthonormalize(Mat(e(3, 0)), w);
  SECTION("identical subspaces have zero angles") {
    auto angles = principal_angles(a, a);
    REQUIRE(angles.size() == 1);
    REQUIRE(angles[0] < 1e-12);
  }
  SECTION("orthogonal lines are at a right angle") {
    Subspace b = orthonormalize(Mat(e(3, 1)), w);
    auto angles = principal_angles(a, b);
    REQUIRE(std::abs(angles[0] - M_PI / 2) < 1e-12);
  }
  SECTION("diagonal line is at 45 degrees") {
    Vec d(3);
    d << 1, 1, 0;
    Subspace b = orthonormalize(Mat(d), w);
    auto angles = principal_angles(a, b);
    REQUIRE(std::abs(angles[0] - M_PI / 4) < 1e-12);
  }
  SECTION("rank-0 input yields an empty list") {
    REQUIRE(principal_angles(a, zero_space(w)).empty());
  }
}

TEST_CASE("psd order on diagonal examples") {
  Vec w = Vec::Ones(2);
  SymOp zero = SymOp::zero(w);
  Vec d12(2);
  d12 << 1, 2;
  SymOp b = SymOp::diagonal(d12, w);
  REQUIRE(psd_order(zero, b, 1e-10) == PsdOrder::a_below);
  REQUIRE(psd_order(b, b, 1e-10) == PsdOrder::equal);
  Vec d10(2), d01(2);
  d10 << 1, 0;
  d01 << 0, 1;
  REQUIRE(psd_order(SymOp::diagonal(d10, w), SymOp::diagonal(d01, w), 1e-10) ==
          PsdOrder::incomparable);
  REQUIRE(psd_order(b, zero, 1e-10) == PsdOrder::a_above);
}

TEST_CASE("operator norms") {
  REQUIRE(std::abs(op_norm(SymOp(Mat::Identity(5, 5), Vec::Ones(5))) - 1.0) < 1e-12);
  Vec d(4);
  d << 0.2, 0, 0.2, 0.4;
  REQUIRE(std::abs(op_norm(SymOp::diagonal(d, random_weights(4))) - 0.4) < 1e-12);
}

TEST_CASE("fit_linear_map scalar example") {
  Vec w = Vec::Ones(3);
  std::vector<std::pair<Vec, Vec>> pairs = {{e(3, 0), 2 * e(3, 0)}};
  FittedMap f = fit_linear_map(pairs, w);
  REQUIRE(f.residual < 1e-12);
  REQUIRE(std::abs(f.op(0, 0) - 2.0) < 1e-12);
  REQUIRE(f.domain.rank() == 1);
}

TEST_CASE("fit_linear_map recovers a sampled operator on the sampled span") {
  Vec w = random_weights(5);
  SymOp a = random_symop(w);
  Mat u = random_mat(5, 5);
  Mat v = a.entries * u;
  FittedMap f = fit_linear_map(u, v, w);
  REQUIRE(f.residual < 1e-10);
  REQUIRE((f.op - a.entries).norm() < 1e-8 * a.entries.norm());
}

TEST_CASE("modular law: rank(meet) + rank(join) = rank a + rank b") {
  for (int trial = 0; trial < 10; ++trial) {
    Vec w = random_weights(6);
    int ra = 1 + static_cast<int>(rng() % 4), rb = 1 + static_cast<int>(rng() % 4);
    Subspace a = orthonormalize(random_mat(6, ra), w);
    Subspace b = orthonormalize(random_mat(6, rb), w);
    Subspace m = lattice_ops(a, b, LatticeKind::meet);
    Subspace j = lattice_ops(a, b, LatticeKind::join);
    REQUIRE(m.rank() + j.rank() == a.rank() + b.rank());
  }
}

TEST_CASE("psd order is transitive and antisymmetric on multiplication operators") {
  Vec w = random_weights(5);
  for (int trial = 0; trial < 10; ++trial) {
    Vec d1 = random_vec(5).cwiseAbs();
    Vec d2 = d1 + random_vec(5).cwiseAbs();
    Vec d3 = d2 + random_vec(5).cwiseAbs();
    SymOp a = SymOp::diagonal(d1, w), b = SymOp::diagonal(d2, w), c = SymOp::diagonal(d3, w);
    REQUIRE(psd_order(a, b, 1e-10) == PsdOrder::a_below);
    REQUIRE(psd_order(b, c, 1e-10) == PsdOrder::a_below);
    REQUIRE(psd_order(a, c, 1e-10) == PsdOrder::a_below);
    REQUIRE(psd_order(c, a, 1e-10) == PsdOrder::a_above);
  }
}

TEST_CASE("projections have unit norm and op_norm obeys the triangle inequality") {
  Vec w = random_weights(6);
  Subspace s = orthonormalize(random_mat(6, 3), w);
  REQUIRE(std::abs(op_norm(s.projection_op()) - 1.0) < 1e-10);
  for (int trial = 0; trial < 10; ++trial) {
    SymOp a = random_symop(w), b = random_symop(w);
    REQUIRE(op_norm(a + b) <= op_norm(a) + op_norm(b) + 1e-10);
  }
}

TEST_CASE("orthonormalize is idempotent") {
  Vec w = random_weights(6);
  Subspace s = orthonormalize(random_mat(6, 3), w);
  Subspace again = orthonormalize(s.frame, w);
  REQUIRE(again.rank() == s.rank());
  for (double th : principal_angles(s, again)) REQUIRE(th < 1e-10);
}

TEST_CASE("eigh reproduces the operator and respects the weighted product") {
  Vec w = random_weights(6);
  SymOp a = random_symop(w);
  // weighted self-adjointness on random pairs
  for (int trial = 0; trial < 5; ++trial) {
    Vec y = random_vec(6), z = random_vec(6);
    double lhs = wdot(w, a.apply(y), z), rhs = wdot(w, y, a.apply(z));
    REQUIRE(std::abs(lhs - rhs) <=
            1e-10 * op_norm(a) * wnorm(w, y) * wnorm(w, z) + 1e-12);
  }
  EigPairs ep = eigh(a);
  Mat rebuilt = ep.vectors * ep.values.asDiagonal() * ep.vectors.transpose() * Mat(w.asDiagonal());
  REQUIRE(op_norm(SymOp(Mat(rebuilt - a.entries), w)) < 1e-10 * (1 + op_norm(a)));
  Mat gram = ep.vectors.transpose() * w.asDiagonal() * ep.vectors;
  REQUIRE((gram - Mat::Identity(6, 6)).norm() < 1e-10);
}

TEST_CASE("projection family validation") {
  Vec w = Vec::Ones(3);
  ProjectionFamily fam;
  fam.breakpoints = {0.0, 1.0, 2.0};
  fam.stages = {orthonormalize(Mat(e(3, 0)), w),
                orthonormalize(Mat(Mat::Identity(3, 3).leftCols(2)), w), full_space(w)};
  REQUIRE_NOTHROW(fam.validate());
  REQUIRE(fam.complete());
  std::swap(fam.stages[0], fam.stages[2]);
  REQUIRE_THROWS(fam.validate());
}
