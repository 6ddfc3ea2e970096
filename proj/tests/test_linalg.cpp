#include <cmath>
#include <random>

#include "doctest.h"
#include "kvb/linalg.hpp"
#include "test_support.hpp"

using namespace kvb;
using kvb::testing::random_hermitian;
using kvb::testing::random_mat;
using kvb::testing::random_vec;
using kvb::testing::unit;

TEST_CASE("orthonormalize drops dependent inputs in order") {
  std::vector<Vec> vs = {unit(2, 0), 2.0 * unit(2, 0), unit(2, 1)};
  const Frame f = orthonormalize(std::span<const Vec>(vs));
  REQUIRE(f.size() == 2);
  CHECK((f.column(0) - unit(2, 0)).norm() < 1e-15);
  CHECK((f.column(1) - unit(2, 1)).norm() < 1e-15);
}

TEST_CASE("orthonormalize of nothing is the empty frame") {
  std::vector<Vec> none;
  const Frame f = orthonormalize(std::span<const Vec>(none));
  CHECK(f.size() == 0);
}

TEST_CASE("orthonormalize rejects mixed dimensions") {
  std::vector<Vec> vs = {unit(2, 0), unit(3, 0)};
  try {
    orthonormalize(std::span<const Vec>(vs));
    FAIL("expected MixedDimensions");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MixedDimensions);
  }
}

TEST_CASE("orthonormalize rank matches row reduction on 50 vectors in C^8") {
  std::mt19937_64 rng(7);
  // Low-rank generator: 50 combinations of 5 random directions, plus a few
  // exact copies so the drop rule is exercised.
  const Mat basis = random_mat(rng, 8, 5);
  std::vector<Vec> vs;
  Mat stacked(8, 50);
  for (int i = 0; i < 50; ++i) {
    Vec v = (i % 7 == 3 && i > 0) ? vs.back() : Vec(basis * random_vec(rng, 5));
    vs.push_back(v);
    stacked.col(i) = v;
  }
  const Frame f = orthonormalize(std::span<const Vec>(vs));
  CHECK(f.size() == kvb::testing::row_reduction_rank(stacked));
  CHECK(f.size() == 5);

  // Full-rank case.
  std::vector<Vec> full;
  Mat stacked_full(8, 50);
  for (int i = 0; i < 50; ++i) {
    full.push_back(random_vec(rng, 8));
    stacked_full.col(i) = full.back();
  }
  CHECK(orthonormalize(std::span<const Vec>(full)).size() ==
        kvb::testing::row_reduction_rank(stacked_full));
}

TEST_CASE("orthonormalize is idempotent on random frames") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Frame f = orthonormalize(random_mat(rng, 7, 1 + trial % 6));
    const Frame g = orthonormalize(f.columns());
    CHECK(subspace_distance(f, g) < 1e-10);
    const Mat gram = f.columns().adjoint() * f.columns();
    CHECK(max_abs(gram - Mat::Identity(f.size(), f.size())) < 1e-12);
  }
}

TEST_CASE("hermitian_eigs small closed cases") {
  {
    const double d[] = {2.0, 0.5};
    const auto es = hermitian_eigs(HermMatrix::diagonal(d));
    CHECK(es.values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(es.values[1] == doctest::Approx(2.0).epsilon(1e-15));
  }
  {
    const auto es = hermitian_eigs(HermMatrix::identity(3));
    for (double v : es.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }
  {
    Mat px(2, 2);
    px << 0, 1, 1, 0;
    const auto es = hermitian_eigs(HermMatrix(px));
    CHECK(std::abs(es.values[0] + 1.0) < 1e-14);
    CHECK(std::abs(es.values[1] - 1.0) < 1e-14);
  }
}

TEST_CASE("hermitian_eigs rejects non-Hermitian input") {
  Mat m(2, 2);
  m << 1, 2, 0, 1;
  CHECK_THROWS_AS(HermMatrix{m}, Error);
}

TEST_CASE("hermitian_eigs agrees with Eigen and reconstructs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 1 + trial % 12;
    const Mat a = random_hermitian(rng, n);
    const HermMatrix h(a);
    const auto es = hermitian_eigs(h);
    Eigen::SelfAdjointEigenSolver<Mat> ref(a);
    const double norm = spectral_norm(h);
    for (Index i = 0; i < n; ++i) {
      CHECK(std::abs(es.values[i] - ref.eigenvalues()(i)) < 1e-12 * std::max(1.0, norm));
      if (i > 0) CHECK(es.values[i - 1] <= es.values[i]);
      const Vec v = es.vectors.column(i);
      CHECK((a * v - es.values[i] * v).norm() < 1e-10 * norm);
    }
    Mat lambda = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i) lambda(i, i) = es.values[i];
    const Mat& v = es.vectors.columns();
    CHECK(max_abs(v * lambda * v.adjoint() - a) < 1e-10 * norm);
  }
}

TEST_CASE("solve closed cases and residual bound") {
  Mat d(2, 2);
  d << 2, 0, 0, 1;
  Vec rhs(2);
  rhs << 2, 1;
  const Vec x = solve(d, rhs);
  CHECK(std::abs(x(0) - 1.0) < 1e-15);
  CHECK(std::abs(x(1) - 1.0) < 1e-15);

  const Vec b = Vec::LinSpaced(3, 1.0, 3.0);
  CHECK((solve(Mat(Mat::Identity(3, 3)), b) - b).norm() == 0.0);

  std::mt19937_64 rng(5);
  const Mat m = random_mat(rng, 6, 6) + 6.0 * Mat::Identity(6, 6);
  const Mat r = random_mat(rng, 6, 2);
  const Mat sol = solve(m, r);
  CHECK((m * sol - r).norm() < 1e-10 * (m.norm() * sol.norm() + r.norm()));
}

TEST_CASE("solve reports singular matrices") {
  Mat s(2, 2);
  s << 2, 0, 0, 0;
  try {
    solve(s, Vec(Vec::Ones(2)));
    FAIL("expected Singular");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Singular);
  }
}

TEST_CASE("subspace_distance closed cases") {
  const Frame e1 = kvb::testing::span_of({unit(2, 0)});
  const Frame e2 = kvb::testing::span_of({unit(2, 1)});
  const Frame diag = kvb::testing::span_of({Vec(unit(2, 0) + unit(2, 1))});
  CHECK(subspace_distance(e1, e1) == 0.0);
  CHECK(std::abs(subspace_distance(e1, e2) - std::sqrt(2.0)) < 1e-15);
  // P1 - P2 = [[1/2, -1/2], [-1/2, -1/2]], Frobenius norm 1.
  CHECK(std::abs(subspace_distance(e1, diag) - 1.0) < 1e-15);
  CHECK_THROWS_AS(subspace_distance(e1, Frame(3)), Error);
}

TEST_CASE("subspace_distance is a metric on random frames") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 6;
    const Frame a = orthonormalize(random_mat(rng, n, 1 + trial % 4));
    const Frame b = orthonormalize(random_mat(rng, n, 1 + (trial / 2) % 4));
    const Frame c = orthonormalize(random_mat(rng, n, 1 + (trial / 3) % 4));
    const double ab = subspace_distance(a, b);
    CHECK(std::abs(ab - subspace_distance(b, a)) < 1e-12);
    CHECK(subspace_distance(a, c) <= ab + subspace_distance(b, c) + 1e-12);
  }
}

TEST_CASE("null_space matches an LU kernel oracle and is canonical") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat m = random_mat(rng, 3, 2) * random_mat(rng, 2, 7);  // rank 2
    const Frame k = null_space(m);
    CHECK(k.size() == 5);
    CHECK(subspace_distance(k, kvb::testing::lu_kernel(m)) < 1e-9);
    CHECK((m * k.columns()).norm() < 1e-10 * m.norm());
  }
  // Canonical basis: kernel of rows e1, e2 in C^4 is returned as (e3, e4).
  Mat rows = Mat::Zero(2, 4);
  rows(0, 0) = 1.5;
  rows(1, 1) = 2.5;
  const Frame k = null_space(rows);
  REQUIRE(k.size() == 2);
  CHECK((k.column(0) - unit(4, 2)).norm() < 1e-14);
  CHECK((k.column(1) - unit(4, 3)).norm() < 1e-14);
}
