// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcl/clifford.hpp"
#include "dcl/errors.hpp"
#include "dcl/grid.hpp"
#include "dcl/spectral.hpp"

namespace dcl {

/// Area of the unit sphere S^k in R^{k+1}.
inline double sphere_area(int k) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (k + 1)) /
         std::tgamma(0.5 * (k + 1));
}

/// int_0^inf r^{n-1} / (1 + r^2)^k dr by double-exponential quadrature.
inline double radial_integral(int n, int k) {
  if (2 * k <= n) {
    throw InvalidArgument("radial_integral: integral diverges");
  }
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate([=](double r) {
    if (r == 0.0) return 0.0;
    const double lr = std::log(r);
    // log1p(r^2) written to stay finite for huge r
    const double l1 = lr > 300.0 ? 2.0 * lr : std::log1p(r * r);
    return std::exp((n - 1) * lr - k * l1);
  });
}

/// The conformal bubble
///   A sigma^{-(n-1)/2} (1 + |y|^2)^{-n/2} (1 - y) . Phi0,  y = (x - x0)/sigma,
/// where (1 - y) . Phi0 = Phi0 - clifford_mul(y, Phi0).
struct BubbleParams {
  std::vector<double> center;
  double sigma = 1.0;
  std::vector<cplx> direction;
  double amplitude = 1.0;

  void validate(int n, int N) const {
    if (static_cast<int>(center.size()) != n) {
      throw ShapeError("BubbleParams: center has wrong dimension");
    }
    if (static_cast<int>(direction.size()) != N) {
      throw ShapeError("BubbleParams: direction has wrong spinor dimension");
    }
    if (!(sigma > 0.0)) throw InvalidArgument("BubbleParams: sigma must be > 0");
    if (!(amplitude > 0.0)) {
      throw InvalidArgument("BubbleParams: amplitude must be > 0");
    }
    double s = 0.0;
    for (const auto& z : direction) s += std::norm(z);
    if (std::abs(s - 1.0) > 1e-12) {
      throw InvalidArgument("BubbleParams: direction must be a unit spinor");
    }
  }
};

/// Centered bubble with the first basis spinor as direction.
inline BubbleParams unit_bubble_params(int n, int N, double amplitude,
                                       double sigma = 1.0) {
  BubbleParams p;
  p.center.assign(n, 0.0);
  p.sigma = sigma;
  p.direction.assign(N, cplx{});
  p.direction[0] = 1.0;
  p.amplitude = amplitude;
  return p;
}

inline SpinorField standard_bubble(const BubbleParams& params,
                                   const BoxGrid& grid,
                                   std::shared_ptr<const CliffordAlgebra> c) {
  SpinorField psi(grid, c);
  const int n = grid.n();
  const int N = psi.N();
  params.validate(n, N);
  const double pre =
      params.amplitude * std::pow(params.sigma, -0.5 * (n - 1));
  std::vector<double> y(n);
  for_each_point(grid, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int a = 0; a < n; ++a) {
      y[a] = (grid.coord(idx[a]) - params.center[a]) / params.sigma;
      r2 += y[a] * y[a];
    }
    const auto ys = clifford_mul(*c, y, params.direction);
    const double s = pre * std::pow(1.0 + r2, -0.5 * n);
    for (int a = 0; a < N; ++a) psi.at(a, p) = s * (params.direction[a] - ys[a]);
  });
  return psi;
}

/// f(r) = 1 / (1 + r^2) on the grid, optionally raised to a power.
inline ScalarDensity conformal_factor(const BoxGrid& g, double power = 1.0) {
  ScalarDensity f(g);
  for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int i : idx) r2 += g.coord(i) * g.coord(i);
    f[p] = std::pow(1.0 + r2, -power);
  });
  return f;
}

struct Constants {
  int n = 0;
  double d = 0.0;
  double a_n = 0.0;
  double c_n = 0.0;
  double Ybar = 0.0;
  double I_n = 0.0;
  double QCoef = 0.0;
  double fit_deviation = 0.0;
  double consistency_residual = 0.0;

  /// Amplitude A making |Psi|^2 = a_n f^{n-1} for the unit bubble.
  double bubble_amplitude() const { return std::sqrt(a_n); }
};

/// Fit region radius used by calibrate_constants.
inline double calibration_radius(const BoxGrid& g) { return g.L() / 16.0; }

/// Constants derived from the grid value of d in (-Delta)^s f = d f^{n-1}.
///
/// The bubble obeys D Psi = n f Psi, and G * |Psi|^2 = (a_n/d) f, so the
/// equation D Psi = (G * |Psi|^2) Psi fixes a_n = n d.
inline Constants constants_from_d(int n, double d) {
  Constants c;
  c.n = n;
  c.d = d;
  c.a_n = n * d;
  c.c_n = std::pow(c.a_n, n - 2) / std::pow(d, n - 1);
  c.I_n = radial_integral(n, n);
  const double omega = sphere_area(n - 1);
  c.QCoef = c.a_n * omega * radial_integral(n, n - 1);
  c.Ybar = 0.25 * std::pow(c.c_n, 1.0 / (n - 1)) *
           std::pow(c.a_n, static_cast<double>(n) / (n - 1)) * omega * c.I_n;
  c.consistency_residual =
      std::pow(c.a_n, static_cast<double>(n) / (n - 1)) * sphere_area(n) -
      std::pow(2.0, n) * c.Ybar * std::pow(c.c_n, -1.0 / (n - 1));
  return c;
}

inline Constants calibrate_constants(int n, const BoxGrid& grid) {
  if (n < 3) throw InvalidDimension("calibrate_constants: n must be >= 3");
  if (grid.n() != n) throw ShapeError("calibrate_constants: grid dimension");
  const auto f0 = conformal_factor(grid);
  const auto lhs = frac_laplacian_apply(f0, n - 2.0);
  const double R = calibration_radius(grid);
  double num = 0.0, den = 0.0;
  std::vector<double> ratios;
  for_each_point(grid, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int i : idx) r2 += grid.coord(i) * grid.coord(i);
    if (r2 > R * R) return;
    const double t = std::pow(f0[p], n - 1);
    num += lhs[p] * t;
    den += t * t;
    ratios.push_back(lhs[p] / t);
  });
  if (ratios.empty()) {
    throw CalibrationError("calibrate_constants: empty fit region");
  }
  const double d = num / den;
  double dev = 0.0;
  for (double r : ratios) dev = std::max(dev, std::abs(r - d) / d);
  if (!(dev <= 0.01)) {
    throw CalibrationError(
        "calibrate_constants: pointwise ratio deviates by " +
        std::to_string(dev) + " from fitted d = " + std::to_string(d) +
        " over |x| <= " + std::to_string(R) + " (grid too coarse or small)");
  }
  Constants c = constants_from_d(n, d);
  c.fit_deviation = dev;
  return c;
}

/// Q(eps) = eps * QCoef, the leading term of ||phi_eps||^2_{L2}.
inline double q_of_eps(double eps, const Constants& c) {
  if (!(eps > 0.0)) throw InvalidArgument("q_of_eps: eps must be > 0");
  return eps * c.QCoef;
}

/// Smooth radial cutoff: 1 for r <= delta, 0 for r >= 2 delta.
inline double cutoff_bump(double r, double delta) {
  const double t = (r - delta) / delta;
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  auto e = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  const double a = e(1.0 - t);
  return a / (a + e(t));
}

/// eta(x) eps^{-(n-1)/2} Psi(x/eps) with Psi the centered unit bubble of
/// amplitude sqrt(a_n). A non-positive cutoff radius disables the cutoff.
inline SpinorField graft_test_spinor(double eps, double cutoff_radius,
                                     const BoxGrid& grid,
                                     std::shared_ptr<const CliffordAlgebra> c,
                                     const Constants& k) {
  if (!(eps > 0.0)) {
    throw InvalidArgument("graft_test_spinor: eps must be > 0");
  }
  if (cutoff_radius > 0.0 && !(2.0 * cutoff_radius < 0.5 * grid.L())) {
    throw InvalidArgument("graft_test_spinor: cutoff support 2*delta = " +
                          std::to_string(2.0 * cutoff_radius) +
                          " does not fit inside half the box");
  }
  auto params = unit_bubble_params(grid.n(), c->spinor_dimension(),
                                   k.bubble_amplitude(), eps);
  SpinorField psi = standard_bubble(params, grid, c);
  if (cutoff_radius > 0.0) {
    for_each_point(grid, [&](std::size_t p, std::span<const int> idx) {
      double r2 = 0.0;
      for (int i : idx) r2 += grid.coord(i) * grid.coord(i);
      const double eta = cutoff_bump(std::sqrt(r2), cutoff_radius);
      for (int a = 0; a < psi.N(); ++a) psi.at(a, p) *= eta;
    });
  }
  return psi;
}

/// Centered unit bubble at the amplitude fixed by the constants.
inline SpinorField calibrated_bubble(const BoxGrid& grid,
                                     std::shared_ptr<const CliffordAlgebra> c,
                                     const Constants& k, double sigma = 1.0) {
  const int N = c->spinor_dimension();
  return standard_bubble(
      unit_bubble_params(grid.n(), N, k.bubble_amplitude(), sigma), grid, c);
}

/// ||D Psi - n f Psi|| / ||Psi|| for the calibrated bubble.
inline double eigen_identity_residual(const BoxGrid& grid,
                                      std::shared_ptr<const CliffordAlgebra> c,
                                      const Constants& k) {
  const auto psi = calibrated_bubble(grid, c, k);
  const auto f = conformal_factor(grid);
  SpinorField r = dirac_apply(psi);
  const double scale = l2_norm(psi);
  SpinorField nf = psi;
  for (int a = 0; a < nf.N(); ++a)
    for (std::size_t p = 0; p < nf.points(); ++p) nf.at(a, p) *= grid.n() * f[p];
  r -= nf;
  return scale > 0.0 ? l2_norm(r) / scale : 0.0;
}

/// ||D Psi - (G * |Psi|^2) Psi|| / ||Psi|| for the calibrated bubble.
inline double equation_residual(const BoxGrid& grid,
                                std::shared_ptr<const CliffordAlgebra> c,
                                const Constants& k, GreenMode mode) {
  const auto psi = calibrated_bubble(grid, c, k);
  const auto V = green_convolve(pointwise_density(psi), mode);
  SpinorField r = dirac_apply(psi);
  const double scale = l2_norm(psi);
  SpinorField vp = psi;
  for (int a = 0; a < vp.N(); ++a)
    for (std::size_t p = 0; p < vp.points(); ++p) vp.at(a, p) *= V[p];
  r -= vp;
  return scale > 0.0 ? l2_norm(r) / scale : 0.0;
}

/// Range of the pointwise ratio (G * |Psi|^2) / f over |x| <= radius,
/// returned as (min, max).
inline std::pair<double, double> green_chain_ratio(
    const BoxGrid& grid, std::shared_ptr<const CliffordAlgebra> c,
    const Constants& k, GreenMode mode, double radius) {
  const auto psi = calibrated_bubble(grid, c, k);
  const auto V = green_convolve(pointwise_density(psi), mode);
  const auto f = conformal_factor(grid);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for_each_point(grid, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int i : idx) r2 += grid.coord(i) * grid.coord(i);
    if (r2 > radius * radius) return;
    const double q = V[p] / f[p];
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  });
  return {lo, hi};
}

}  // namespace dcl
