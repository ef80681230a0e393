// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dcl/clifford.hpp"
#include "dcl/errors.hpp"
#include "dcl/fft.hpp"

namespace dcl {

/// Periodic box [-L/2, L/2)^n sampled with m points per axis.
///
/// Point i along an axis sits at x_i = (i - m/2) h. Flat indices are
/// row-major with the last axis fastest. FFT index j along an axis carries
/// the integer wavenumber k = j for j < m/2 and k = j - m otherwise, so
/// xi = 2 pi k / L with k in {-m/2, ..., m/2-1}. The row k = -m/2 is the
/// Nyquist row; it has no partner under negation and every multiplier sets
/// it to zero.
class BoxGrid {
 public:
  BoxGrid(int n, double L, int m) : n_(n), L_(L), m_(m) {
    if (n < 2) {
      throw InvalidDimension("BoxGrid: dimension must be >= 2, got " +
                             std::to_string(n));
    }
    if (!(L > 0.0) || !std::isfinite(L)) {
      throw InvalidArgument("BoxGrid: box length must be positive");
    }
    if (m < 8 || m % 2 != 0) {
      throw InvalidArgument("BoxGrid: points per axis must be even and >= 8, "
                            "got " + std::to_string(m));
    }
    points_ = 1;
    for (int i = 0; i < n; ++i) points_ *= static_cast<std::size_t>(m);
  }

  int n() const { return n_; }
  double L() const { return L_; }
  int m() const { return m_; }
  double h() const { return L_ / m_; }
  std::size_t points() const { return points_; }
  double cell_volume() const { return std::pow(h(), n_); }
  double volume() const { return std::pow(L_, n_); }
  std::vector<int> dims() const { return std::vector<int>(n_, m_); }

  double coord(int i) const { return (i - m_ / 2) * h(); }
  int wavenumber(int j) const { return j < m_ / 2 ? j : j - m_; }
  bool nyquist(int j) const { return j == m_ / 2; }
  /// Smallest non-zero frequency 2 pi / L.
  double xi_min() const { return 2.0 * std::numbers::pi / L_; }

  bool operator==(const BoxGrid& o) const {
    return n_ == o.n_ && L_ == o.L_ && m_ == o.m_;
  }

 private:
  int n_;
  double L_;
  int m_;
  std::size_t points_ = 0;
};

/// Walks all grid points in flat order, passing the flat index and the
/// per-axis integer indices.
template <class F>
void for_each_point(const BoxGrid& g, F&& fn) {
  const int n = g.n();
  const int m = g.m();
  std::vector<int> idx(n, 0);
  for (std::size_t p = 0; p < g.points(); ++p) {
    fn(p, std::span<const int>(idx));
    for (int a = n - 1; a >= 0; --a) {
      if (++idx[a] < m) break;
      idx[a] = 0;
    }
  }
}

/// Walks all Fourier modes in FFT order. The callback receives the flat
/// index, the integer wavenumbers and whether any axis sits on the Nyquist
/// row.
template <class F>
void for_each_mode(const BoxGrid& g, F&& fn) {
  const int n = g.n();
  std::vector<int> k(n, 0);
  for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
    bool nyq = false;
    for (int a = 0; a < n; ++a) {
      k[a] = g.wavenumber(idx[a]);
      nyq = nyq || g.nyquist(idx[a]);
    }
    fn(p, std::span<const int>(k), nyq);
  });
}

/// Position of a grid point.
inline std::vector<double> point_coords(const BoxGrid& g,
                                        std::span<const int> idx) {
  std::vector<double> x(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) x[a] = g.coord(idx[a]);
  return x;
}

/// Real scalar field on a grid.
class ScalarDensity {
 public:
  explicit ScalarDensity(const BoxGrid& g) : grid_(g), v_(g.points(), 0.0) {}

  const BoxGrid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  ScalarDensity& operator*=(double c) {
    for (auto& x : v_) x *= c;
    return *this;
  }

 private:
  BoxGrid grid_;
  std::vector<double> v_;
};

/// Complex N-vector per grid point. Storage is component-major: component a
/// of point p lives at a * points + p.
class SpinorField {
 public:
  SpinorField(const BoxGrid& g, std::shared_ptr<const CliffordAlgebra> c)
      : grid_(g), cl_(std::move(c)) {
    if (!cl_) throw InvalidArgument("SpinorField: missing Clifford algebra");
    if (cl_->dimension() != g.n()) {
      throw ShapeError("SpinorField: algebra dimension " +
                       std::to_string(cl_->dimension()) +
                       " does not match grid dimension " +
                       std::to_string(g.n()));
    }
    v_.assign(g.points() * cl_->spinor_dimension(), cplx{});
  }

  const BoxGrid& grid() const { return grid_; }
  const CliffordAlgebra& algebra() const { return *cl_; }
  std::shared_ptr<const CliffordAlgebra> algebra_ptr() const { return cl_; }
  int N() const { return cl_->spinor_dimension(); }
  std::size_t points() const { return grid_.points(); }
  std::size_t size() const { return v_.size(); }

  cplx& at(int a, std::size_t p) { return v_[a * points() + p]; }
  cplx at(int a, std::size_t p) const { return v_[a * points() + p]; }
  std::span<cplx> data() { return v_; }
  std::span<const cplx> data() const { return v_; }

  SpinorField& operator+=(const SpinorField& o) {
    check(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  SpinorField& operator-=(const SpinorField& o) {
    check(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  SpinorField& operator*=(double c) {
    for (auto& x : v_) x *= c;
    return *this;
  }
  /// this += c * o
  SpinorField& axpy(double c, const SpinorField& o) {
    check(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += c * o.v_[i];
    return *this;
  }
  void set_zero() { std::fill(v_.begin(), v_.end(), cplx{}); }

  bool compatible(const SpinorField& o) const {
    return grid_ == o.grid_ && N() == o.N();
  }
  void check(const SpinorField& o) const {
    if (!compatible(o)) throw ShapeError("SpinorField: grid mismatch");
  }

 private:
  BoxGrid grid_;
  std::shared_ptr<const CliffordAlgebra> cl_;
  std::vector<cplx> v_;
};

inline SpinorField operator+(SpinorField a, const SpinorField& b) {
  return a += b;
}
inline SpinorField operator-(SpinorField a, const SpinorField& b) {
  return a -= b;
}
inline SpinorField operator*(double c, SpinorField a) { return a *= c; }

/// |psi(x)|^2 at each grid point.
inline ScalarDensity pointwise_density(const SpinorField& psi) {
  ScalarDensity rho(psi.grid());
  const std::size_t P = psi.points();
  for (int a = 0; a < psi.N(); ++a)
    for (std::size_t p = 0; p < P; ++p) rho[p] += std::norm(psi.at(a, p));
  return rho;
}

/// Real part of the integrated Hermitian product.
inline double l2_inner(const SpinorField& a, const SpinorField& b) {
  a.check(b);
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
  return s * a.grid().cell_volume();
}

inline double l2_norm(const SpinorField& a) {
  return std::sqrt(l2_inner(a, a));
}

inline double integrate(const ScalarDensity& f) {
  double s = 0.0;
  for (double x : f.values()) s += x;
  return s * f.grid().cell_volume();
}

inline double integrate_product(const ScalarDensity& f,
                                const ScalarDensity& g) {
  if (!(f.grid() == g.grid())) throw ShapeError("density grid mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid().cell_volume();
}

/// Unnormalised forward transform of every spinor component.
inline std::vector<cplx> to_fourier(const SpinorField& psi) {
  std::vector<cplx> hat(psi.data().begin(), psi.data().end());
  FftEngine::instance().c2c(hat, psi.grid().dims(), psi.N(), FFTW_FORWARD);
  return hat;
}

/// Inverse of to_fourier; consumes the coefficient buffer.
inline SpinorField from_fourier(std::vector<cplx> hat,
                                const SpinorField& like) {
  FftEngine::instance().c2c(hat, like.grid().dims(), like.N(), FFTW_BACKWARD);
  SpinorField out(like.grid(), like.algebra_ptr());
  const double inv = 1.0 / static_cast<double>(like.points());
  auto d = out.data();
  for (std::size_t i = 0; i < hat.size(); ++i) d[i] = hat[i] * inv;
  return out;
}

inline std::vector<cplx> to_fourier(const ScalarDensity& f) {
  std::vector<cplx> hat(f.values().begin(), f.values().end());
  FftEngine::instance().c2c(hat, f.grid().dims(), 1, FFTW_FORWARD);
  return hat;
}

/// Inverse transform keeping the real part.
inline ScalarDensity from_fourier(std::vector<cplx> hat, const BoxGrid& g) {
  FftEngine::instance().c2c(hat, g.dims(), 1, FFTW_BACKWARD);
  ScalarDensity out(g);
  const double inv = 1.0 / static_cast<double>(g.points());
  for (std::size_t i = 0; i < hat.size(); ++i) out[i] = hat[i].real() * inv;
  return out;
}

/// Removes the Nyquist rows from a field.
inline SpinorField band_limit(const SpinorField& psi) {
  auto hat = to_fourier(psi);
  const std::size_t P = psi.points();
  for_each_mode(psi.grid(), [&](std::size_t p, std::span<const int>, bool nyq) {
    if (!nyq) return;
    for (int a = 0; a < psi.N(); ++a) hat[a * P + p] = 0.0;
  });
  return from_fourier(std::move(hat), psi);
}

/// Smooth, localized random spinor field without Nyquist content.
///
/// White complex noise is multiplied by a Gaussian envelope of width
/// `envelope` and then low-pass filtered with exp(-|xi|^2 corr^2 / 2).
inline SpinorField random_spinor(const BoxGrid& g,
                                 std::shared_ptr<const CliffordAlgebra> c,
                                 std::mt19937_64& rng, double envelope,
                                 double corr) {
  SpinorField psi(g, std::move(c));
  std::normal_distribution<double> nd;
  const int N = psi.N();
  for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int i : idx) r2 += g.coord(i) * g.coord(i);
    const double env = std::exp(-0.5 * r2 / (envelope * envelope));
    for (int a = 0; a < N; ++a) psi.at(a, p) = env * cplx(nd(rng), nd(rng));
  });
  auto hat = to_fourier(psi);
  const double k0 = g.xi_min();
  for_each_mode(g, [&](std::size_t p, std::span<const int> k, bool nyq) {
    double q = 0.0;
    for (int ki : k) q += static_cast<double>(ki) * ki;
    const double w = nyq ? 0.0 : std::exp(-0.5 * q * k0 * k0 * corr * corr);
    for (int a = 0; a < N; ++a) hat[a * g.points() + p] *= w;
  });
  return from_fourier(std::move(hat), psi);
}

/// Scalar analogue of random_spinor (real valued).
inline ScalarDensity random_density(const BoxGrid& g, std::mt19937_64& rng,
                                    double envelope, double corr) {
  ScalarDensity f(g);
  std::normal_distribution<double> nd;
  for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int i : idx) r2 += g.coord(i) * g.coord(i);
    f[p] = std::exp(-0.5 * r2 / (envelope * envelope)) * nd(rng);
  });
  auto hat = to_fourier(f);
  const double k0 = g.xi_min();
  for_each_mode(g, [&](std::size_t p, std::span<const int> k, bool nyq) {
    double q = 0.0;
    for (int ki : k) q += static_cast<double>(ki) * ki;
    hat[p] *= nyq ? 0.0 : std::exp(-0.5 * q * k0 * k0 * corr * corr);
  });
  return from_fourier(std::move(hat), g);
}

}  // namespace dcl
