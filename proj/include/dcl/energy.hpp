// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcl/grid.hpp"
#include "dcl/spectral.hpp"

namespace dcl {

struct EnergyBreakdown {
  /// 1/2 int <D psi, psi> - lambda |psi|^2
  double quadratic = 0.0;
  /// 1/4 int (G * |psi|^2) |psi|^2
  double quartic = 0.0;
  double total = 0.0;
};

/// Energy, gradient and the Green potential of one field, sharing one
/// convolution.
struct Evaluation {
  EnergyBreakdown energy;
  SpinorField gradient;
  ScalarDensity potential;
};

/// V psi for a real potential V.
inline SpinorField multiply(const ScalarDensity& V, const SpinorField& psi) {
  SpinorField out = psi;
  const std::size_t P = psi.points();
  for (int a = 0; a < psi.N(); ++a)
    for (std::size_t p = 0; p < P; ++p) out.at(a, p) *= V[p];
  return out;
}

inline double quartic_term(const ScalarDensity& rho, const ScalarDensity& V) {
  return 0.25 * integrate_product(V, rho);
}

inline EnergyBreakdown energy(const SpinorField& psi, double lambda,
                              GreenMode mode) {
  const auto rho = pointwise_density(psi);
  const auto V = green_convolve(rho, mode);
  EnergyBreakdown e;
  e.quadratic = 0.5 * (dirac_form(psi) - lambda * l2_inner(psi, psi));
  e.quartic = quartic_term(rho, V);
  e.total = e.quadratic - e.quartic;
  return e;
}

/// D psi - lambda psi - (G * |psi|^2) psi.
inline SpinorField gradient(const SpinorField& psi, double lambda,
                            GreenMode mode) {
  const auto V = green_convolve(pointwise_density(psi), mode);
  SpinorField g = dirac_apply(psi);
  g.axpy(-lambda, psi);
  g -= multiply(V, psi);
  return g;
}

inline Evaluation evaluate(const SpinorField& psi, double lambda,
                           GreenMode mode) {
  const auto rho = pointwise_density(psi);
  auto V = green_convolve(rho, mode);
  SpinorField Dpsi = dirac_apply(psi);
  EnergyBreakdown e;
  const double l2 = l2_inner(psi, psi);
  e.quadratic = 0.5 * (l2_inner(Dpsi, psi) - lambda * l2);
  e.quartic = quartic_term(rho, V);
  e.total = e.quadratic - e.quartic;
  Dpsi.axpy(-lambda, psi);
  Dpsi -= multiply(V, psi);
  return {e, std::move(Dpsi), std::move(V)};
}

/// |2 J - <grad J, psi> - 2 quartic|, identically zero in exact arithmetic.
inline double identity_defect(const SpinorField& psi, double lambda,
                              GreenMode mode = GreenMode::Free) {
  const auto ev = evaluate(psi, lambda, mode);
  return std::abs(2.0 * ev.energy.total - l2_inner(ev.gradient, psi) -
                  2.0 * ev.energy.quartic);
}

/// Minimum of V over the points where rho >= rel * max rho. The periodic
/// Green function has zero mean and turns negative at the box scale.
inline double support_min(const ScalarDensity& V, const ScalarDensity& rho,
                          double rel = 1e-3) {
  double top = 0.0;
  for (double r : rho.values()) top = std::max(top, r);
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (rho[i] >= rel * top) lo = std::min(lo, V[i]);
  return lo;
}

/// || |D - lambda|^{-1/2} r ||_{L2}.
inline double dual_norm(const SpinorField& r, double lambda) {
  return sobolev_seminorm(r, lambda, -0.5);
}

}  // namespace dcl
