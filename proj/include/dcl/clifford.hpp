// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dcl/errors.hpp"

namespace dcl {

using cplx = std::complex<double>;

/// Irreducible complex representation of the Clifford algebra of R^n with the
/// geometric sign convention  G_i G_j + G_j G_i = -2 delta_ij.
///
/// Generators are anti-Hermitian, so the Fourier symbol i sum xi_j G_j of the
/// Dirac operator is Hermitian. Every generator produced by the recursive
/// construction is a monomial matrix (one non-zero per row); that structure is
/// kept alongside the dense matrices for fast application on fields.
///
/// Construction, with s1,s2,s3 the Pauli matrices:
///   n = 2:      G_1 = i s1, G_2 = i s2
///   n -> n+2:   G_j -> G_j (x) s3,  plus  I (x) i s1  and  I (x) i s2
///   odd n:      G_n = w or i w, w the ordered product of the even-n
///               generators, the factor chosen so that G_n^2 = -I.
/// For odd n this fixes one of the two inequivalent representations; all
/// quantities computed downstream (|psi|^2, <D psi, psi>) do not depend on it.
class CliffordAlgebra {
 public:
  using Matrix = Eigen::MatrixXcd;

  int dimension() const { return n_; }
  int spinor_dimension() const { return N_; }
  const std::vector<Matrix>& gammas() const { return gammas_; }
  const Matrix& gamma(int i) const { return gammas_.at(i); }

  /// out += coeff * G_j v, using the monomial structure.
  void apply_gamma_add(int j, cplx coeff, std::span<const cplx> v,
                       std::span<cplx> out) const {
    const auto& perm = perm_[j];
    const auto& phase = phase_[j];
    for (int r = 0; r < N_; ++r) out[r] += coeff * phase[r] * v[perm[r]];
  }

  /// Pointwise access to the monomial form: G_j[r, perm(j,r)] = phase(j,r).
  int perm(int j, int r) const { return perm_[j][r]; }
  cplx phase(int j, int r) const { return phase_[j][r]; }

 private:
  friend CliffordAlgebra build_clifford(int n);

  int n_ = 0;
  int N_ = 0;
  std::vector<Matrix> gammas_;
  std::vector<std::vector<int>> perm_;
  std::vector<std::vector<cplx>> phase_;
};

namespace detail {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a,
                             const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace detail

inline CliffordAlgebra build_clifford(int n) {
  if (n < 2) {
    throw InvalidDimension("build_clifford: dimension must be >= 2, got " +
                           std::to_string(n));
  }
  using Matrix = CliffordAlgebra::Matrix;
  const cplx I(0.0, 1.0);
  Matrix s1(2, 2), s2(2, 2), s3(2, 2);
  s1 << 0, 1, 1, 0;
  s2 << 0, -I, I, 0;
  s3 << 1, 0, 0, -1;

  std::vector<Matrix> g{I * s1, I * s2};
  int even = 2;
  while (even + 2 <= n) {
    const auto dim = g.front().rows();
    std::vector<Matrix> next;
    for (const auto& m : g) next.push_back(detail::kron(m, s3));
    Matrix id = Matrix::Identity(dim, dim);
    next.push_back(detail::kron(id, I * s1));
    next.push_back(detail::kron(id, I * s2));
    g = std::move(next);
    even += 2;
  }
  if (n % 2 == 1) {
    const auto dim = g.front().rows();
    Matrix w = Matrix::Identity(dim, dim);
    for (const auto& m : g) w = w * m;
    // w^2 = (-1)^(even/2) I
    if ((even / 2) % 2 == 0) w *= I;
    g.push_back(w);
  }

  CliffordAlgebra c;
  c.n_ = n;
  c.N_ = static_cast<int>(g.front().rows());
  c.gammas_ = std::move(g);
  for (const auto& m : c.gammas_) {
    std::vector<int> perm(c.N_, -1);
    std::vector<cplx> phase(c.N_);
    for (int r = 0; r < c.N_; ++r) {
      for (int col = 0; col < c.N_; ++col) {
        if (std::abs(m(r, col)) > 0.5) {
          perm[r] = col;
          phase[r] = m(r, col);
        }
      }
    }
    c.perm_.push_back(std::move(perm));
    c.phase_.push_back(std::move(phase));
  }
  return c;
}

inline std::shared_ptr<const CliffordAlgebra> make_clifford(int n) {
  return std::make_shared<const CliffordAlgebra>(build_clifford(n));
}

/// Clifford multiplication (sum_i v_i G_i) s.
inline std::vector<cplx> clifford_mul(const CliffordAlgebra& c,
                                      std::span<const double> v,
                                      std::span<const cplx> s) {
  if (static_cast<int>(v.size()) != c.dimension()) {
    throw ShapeError("clifford_mul: vector has " + std::to_string(v.size()) +
                     " entries, algebra dimension is " +
                     std::to_string(c.dimension()));
  }
  if (static_cast<int>(s.size()) != c.spinor_dimension()) {
    throw ShapeError("clifford_mul: spinor has " + std::to_string(s.size()) +
                     " entries, expected " +
                     std::to_string(c.spinor_dimension()));
  }
  std::vector<cplx> out(s.size(), cplx{});
  for (int j = 0; j < c.dimension(); ++j) {
    if (v[j] != 0.0) c.apply_gamma_add(j, v[j], s, out);
  }
  return out;
}

}  // namespace dcl
