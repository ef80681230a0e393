// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "dcl/clifford.hpp"

using namespace dcl;
using Catch::Matchers::WithinAbs;

namespace {

using Mat = CliffordAlgebra::Matrix;

Mat symbol(const CliffordAlgebra& c, const std::vector<double>& xi) {
  const int N = c.spinor_dimension();
  Mat A = Mat::Zero(N, N);
  for (int j = 0; j < c.dimension(); ++j) A += cplx(0.0, xi[j]) * c.gamma(j);
  return A;
}

}  // namespace

TEST_CASE("spinor dimension doubles every two dimensions", "[clifford]") {
  for (int n = 2; n <= 7; ++n) {
    const auto c = build_clifford(n);
    CHECK(c.dimension() == n);
    CHECK(c.spinor_dimension() == (1 << (n / 2)));
    CHECK(static_cast<int>(c.gammas().size()) == n);
  }
}

TEST_CASE("generators anticommute to -2 delta", "[clifford]") {
  for (int n = 2; n <= 6; ++n) {
    const auto c = build_clifford(n);
    const int N = c.spinor_dimension();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Mat ac = c.gamma(i) * c.gamma(j) + c.gamma(j) * c.gamma(i);
        const Mat want = (i == j ? -2.0 : 0.0) * Mat::Identity(N, N);
        CHECK((ac - want).norm() < 1e-12);
      }
  }
}

TEST_CASE("generators are anti-Hermitian and unitary", "[clifford]") {
  for (int n = 2; n <= 6; ++n) {
    const auto c = build_clifford(n);
    const int N = c.spinor_dimension();
    for (const auto& G : c.gammas()) {
      CHECK((G.adjoint() + G).norm() < 1e-12);
      CHECK((G.adjoint() * G - Mat::Identity(N, N)).norm() < 1e-12);
    }
  }
}

TEST_CASE("odd dimensions: volume element is a scalar", "[clifford]") {
  for (int n : {3, 5, 7}) {
    const auto c = build_clifford(n);
    const int N = c.spinor_dimension();
    Mat w = Mat::Identity(N, N);
    for (const auto& G : c.gammas()) w = w * G;
    const cplx z = w(0, 0);
    CHECK(std::abs(std::abs(z) - 1.0) < 1e-12);
    CHECK((w - z * Mat::Identity(N, N)).norm() < 1e-12);
  }
}

TEST_CASE("symbol has eigenvalues +-|xi|, each with half multiplicity",
          "[clifford]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int n = 2; n <= 6; ++n) {
    const auto c = build_clifford(n);
    const int N = c.spinor_dimension();
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> xi(n);
      double r2 = 0.0;
      for (auto& x : xi) {
        x = nd(rng);
        r2 += x * x;
      }
      const Mat A = symbol(c, xi);
      CHECK((A - A.adjoint()).norm() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Mat> es(A);
      const auto& ev = es.eigenvalues();
      for (int k = 0; k < N; ++k) {
        const double want = (k < N / 2 ? -1.0 : 1.0) * std::sqrt(r2);
        CHECK_THAT(ev(k), WithinAbs(want, 1e-12 * (1.0 + std::sqrt(r2))));
      }
      CHECK(((A * A) - r2 * Mat::Identity(N, N)).norm() < 1e-12 * (1 + r2));
    }
  }
}

TEST_CASE("monomial application matches dense matrices", "[clifford]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int n = 2; n <= 6; ++n) {
    const auto c = build_clifford(n);
    const int N = c.spinor_dimension();
    std::vector<cplx> v(N);
    for (auto& z : v) z = cplx(nd(rng), nd(rng));
    for (int j = 0; j < n; ++j) {
      std::vector<cplx> out(N, cplx{});
      const cplx coeff(0.3, -1.1);
      c.apply_gamma_add(j, coeff, v, out);
      Eigen::VectorXcd ev = Eigen::Map<Eigen::VectorXcd>(v.data(), N);
      Eigen::VectorXcd want = coeff * (c.gamma(j) * ev);
      for (int r = 0; r < N; ++r) CHECK(std::abs(out[r] - want(r)) < 1e-14);
      for (int r = 0; r < N; ++r) {
        CHECK(std::abs(c.gamma(j)(r, c.perm(j, r)) - c.phase(j, r)) < 1e-15);
      }
    }
  }
}

TEST_CASE("Clifford multiplication is an isometry", "[clifford]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int n = 2; n <= 6; ++n) {
    const auto c = build_clifford(n);
    const int N = c.spinor_dimension();
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(n);
      std::vector<cplx> s(N);
      double x2 = 0.0, s2 = 0.0;
      for (auto& a : x) {
        a = nd(rng);
        x2 += a * a;
      }
      for (auto& z : s) {
        z = cplx(nd(rng), nd(rng));
        s2 += std::norm(z);
      }
      const auto y = clifford_mul(c, x, s);
      double y2 = 0.0;
      for (const auto& z : y) y2 += std::norm(z);
      CHECK_THAT(y2, WithinAbs(x2 * s2, 1e-12 * x2 * s2));
      // x.(x.s) = -|x|^2 s
      const auto yy = clifford_mul(c, x, y);
      for (int r = 0; r < N; ++r) {
        CHECK(std::abs(yy[r] + x2 * s[r]) < 1e-12 * (1 + x2) * std::sqrt(s2));
      }
    }
  }
}

TEST_CASE("invalid inputs are rejected", "[clifford]") {
  CHECK_THROWS_AS(build_clifford(1), InvalidDimension);
  CHECK_THROWS_AS(build_clifford(0), InvalidDimension);
  const auto c = build_clifford(3);
  std::vector<double> x(2, 1.0);
  std::vector<cplx> s(2);
  CHECK_THROWS_AS(clifford_mul(c, x, s), ShapeError);
  std::vector<double> x3(3, 1.0);
  std::vector<cplx> s3(3);
  CHECK_THROWS_AS(clifford_mul(c, x3, s3), ShapeError);
}
