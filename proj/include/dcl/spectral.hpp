// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dcl/errors.hpp"
#include "dcl/fft.hpp"
#include "dcl/grid.hpp"

namespace dcl {

// ---------------------------------------------------------------------------
// Discrete spectrum of the Dirac operator on the grid

/// Number of non-Nyquist lattice vectors k with |k|^2 = q, indexed by q.
inline std::vector<long long> lattice_shell_counts(const BoxGrid& g) {
  const int kmax = g.m() / 2 - 1;
  std::vector<long long> axis(kmax * kmax + 1, 0);
  for (int k = -kmax; k <= kmax; ++k) axis[k * k] += 1;
  std::vector<long long> acc{1};
  for (int a = 0; a < g.n(); ++a) {
    std::vector<long long> next(acc.size() + axis.size() - 1, 0);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (acc[i] == 0) continue;
      for (std::size_t j = 0; j < axis.size(); ++j)
        next[i + j] += acc[i] * axis[j];
    }
    acc = std::move(next);
  }
  return acc;
}

/// True if lambda coincides, to 1e-12 relative, with an eigenvalue
/// +-|xi_k| (or 0) of the grid Dirac operator.
inline bool on_spectrum(const BoxGrid& g, double lambda) {
  if (lambda == 0.0) return true;
  const double t = std::abs(lambda) / g.xi_min();
  const double q = std::round(t * t);
  const auto counts = lattice_shell_counts(g);
  if (q < 1.0 || q >= static_cast<double>(counts.size())) return false;
  if (counts[static_cast<std::size_t>(q)] == 0) return false;
  return std::abs(std::sqrt(q) * g.xi_min() - std::abs(lambda)) <=
         1e-12 * std::abs(lambda);
}

inline void require_off_spectrum(const BoxGrid& g, double lambda,
                                 const char* what) {
  if (on_spectrum(g, lambda)) {
    throw SpectrumError(std::string(what) + ": lambda = " +
                        std::to_string(lambda) +
                        " lies on the discrete Dirac spectrum");
  }
}

struct SpectrumEntry {
  double eigenvalue;
  long long multiplicity;
};

/// Sorted eigenvalues of the grid Dirac operator (Nyquist rows excluded).
inline std::vector<SpectrumEntry> dirac_spectrum(const BoxGrid& g) {
  const long long N = 1LL << (g.n() / 2);
  const auto counts = lattice_shell_counts(g);
  std::vector<SpectrumEntry> out;
  for (std::size_t q = counts.size(); q-- > 1;) {
    if (counts[q] == 0) continue;
    out.push_back({-std::sqrt(static_cast<double>(q)) * g.xi_min(),
                   counts[q] * N / 2});
  }
  out.push_back({0.0, N});
  for (std::size_t q = 1; q < counts.size(); ++q) {
    if (counts[q] == 0) continue;
    out.push_back({std::sqrt(static_cast<double>(q)) * g.xi_min(),
                   counts[q] * N / 2});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spinor multipliers

namespace detail {

/// Applies a function of the Dirac symbol mode by mode.
///
/// On a mode with xi != 0 the symbol A(xi) = i sum xi_j G_j has eigenvalues
/// +-|xi| and mu(A) v = (mu+ + mu-)/2 v + (mu+ - mu-)/2 A v / |xi|. The zero
/// mode receives mu(0); Nyquist modes are zeroed.
template <class Mu>
std::vector<cplx> apply_symbol_function(const SpinorField& psi, Mu&& mu) {
  auto hat = to_fourier(psi);
  const auto& cl = psi.algebra();
  const BoxGrid& g = psi.grid();
  const int N = psi.N();
  const int n = g.n();
  const std::size_t P = g.points();
  const double k0 = g.xi_min();
  std::vector<cplx> v(N), av(N);
  for_each_mode(g, [&](std::size_t p, std::span<const int> k, bool nyq) {
    if (nyq) {
      for (int a = 0; a < N; ++a) hat[a * P + p] = 0.0;
      return;
    }
    double q = 0.0;
    for (int ki : k) q += static_cast<double>(ki) * ki;
    if (q == 0.0) {
      const cplx m0 = mu(0.0);
      for (int a = 0; a < N; ++a) hat[a * P + p] *= m0;
      return;
    }
    const double r = std::sqrt(q) * k0;
    for (int a = 0; a < N; ++a) {
      v[a] = hat[a * P + p];
      av[a] = 0.0;
    }
    for (int j = 0; j < n; ++j) {
      if (k[j] != 0) cl.apply_gamma_add(j, cplx(0.0, k[j] * k0 / r), v, av);
    }
    const cplx mp = mu(r);
    const cplx mm = mu(-r);
    const cplx even = 0.5 * (mp + mm);
    const cplx odd = 0.5 * (mp - mm);
    for (int a = 0; a < N; ++a) hat[a * P + p] = even * v[a] + odd * av[a];
  });
  return hat;
}

/// Sum over modes of sum_b w(b|xi|) |Pi_b v|^2, scaled to an L2 integral.
template <class W>
double branch_quadratic_form(const SpinorField& psi, W&& w) {
  const auto hat = to_fourier(psi);
  const auto& cl = psi.algebra();
  const BoxGrid& g = psi.grid();
  const int N = psi.N();
  const int n = g.n();
  const std::size_t P = g.points();
  const double k0 = g.xi_min();
  std::vector<cplx> v(N), av(N);
  double acc = 0.0;
  for_each_mode(g, [&](std::size_t p, std::span<const int> k, bool nyq) {
    if (nyq) return;
    double q = 0.0;
    for (int ki : k) q += static_cast<double>(ki) * ki;
    if (q == 0.0) {
      double s = 0.0;
      for (int a = 0; a < N; ++a) s += std::norm(hat[a * P + p]);
      acc += w(0.0) * s;
      return;
    }
    const double r = std::sqrt(q) * k0;
    for (int a = 0; a < N; ++a) {
      v[a] = hat[a * P + p];
      av[a] = 0.0;
    }
    for (int j = 0; j < n; ++j) {
      if (k[j] != 0) cl.apply_gamma_add(j, cplx(0.0, k[j] * k0 / r), v, av);
    }
    double sp = 0.0, sm = 0.0;
    for (int a = 0; a < N; ++a) {
      sp += std::norm(0.5 * (v[a] + av[a]));
      sm += std::norm(0.5 * (v[a] - av[a]));
    }
    acc += w(r) * sp + w(-r) * sm;
  });
  return acc * g.cell_volume() / static_cast<double>(P);
}

}  // namespace detail

/// D psi.
inline SpinorField dirac_apply(const SpinorField& psi) {
  return from_fourier(
      detail::apply_symbol_function(psi, [](double e) { return cplx(e); }),
      psi);
}

/// -Laplacian acting componentwise (symbol |xi|^2).
inline SpinorField laplacian_apply(const SpinorField& psi) {
  return from_fourier(
      detail::apply_symbol_function(psi, [](double e) { return cplx(e * e); }),
      psi);
}

/// |D - lambda|^power psi. Negative powers need lambda off the spectrum.
inline SpinorField abs_power_apply(const SpinorField& psi, double lambda,
                                   double power) {
  if (power < 0.0) require_off_spectrum(psi.grid(), lambda, "abs_power_apply");
  return from_fourier(detail::apply_symbol_function(
                          psi,
                          [&](double e) {
                            return cplx(std::pow(std::abs(e - lambda), power));
                          }),
                      psi);
}

/// Keeps the modes with sign(b|xi| - lambda) == sign.
inline SpinorField spectral_project(const SpinorField& psi, double lambda,
                                    int sign) {
  if (sign != 1 && sign != -1) {
    throw InvalidArgument("spectral_project: sign must be +1 or -1");
  }
  require_off_spectrum(psi.grid(), lambda, "spectral_project");
  return from_fourier(detail::apply_symbol_function(
                          psi,
                          [&](double e) {
                            const bool pos = e - lambda > 0.0;
                            return cplx(pos == (sign > 0) ? 1.0 : 0.0);
                          }),
                      psi);
}

/// || |D - lambda|^power psi ||_{L2}, evaluated mode by mode.
inline double sobolev_seminorm(const SpinorField& psi, double lambda,
                               double power) {
  if (power == 0.0) return l2_norm(psi);
  if (power < 0.0) require_off_spectrum(psi.grid(), lambda, "sobolev_seminorm");
  const double s = detail::branch_quadratic_form(psi, [&](double e) {
    return std::pow(std::abs(e - lambda), 2.0 * power);
  });
  return std::sqrt(s);
}

/// ||psi||_lambda^2 = || |D - lambda|^{1/2} psi ||^2.
inline double lambda_norm_sq(const SpinorField& psi, double lambda) {
  return detail::branch_quadratic_form(
      psi, [&](double e) { return std::abs(e - lambda); });
}

/// int <D psi, psi>, computed in Fourier space.
inline double dirac_form(const SpinorField& psi) {
  return detail::branch_quadratic_form(psi, [](double e) { return e; });
}

// ---------------------------------------------------------------------------
// Scalar multipliers and Green convolution

/// Fourier multiplier |xi|^two_s on a scalar field.
inline ScalarDensity frac_laplacian_apply(const ScalarDensity& f,
                                          double two_s) {
  if (!(two_s > 0.0)) {
    throw InvalidArgument("frac_laplacian_apply: order must be positive");
  }
  const BoxGrid& g = f.grid();
  auto hat = to_fourier(f);
  const double k0 = g.xi_min();
  for_each_mode(g, [&](std::size_t p, std::span<const int> k, bool nyq) {
    double q = 0.0;
    for (int ki : k) q += static_cast<double>(ki) * ki;
    hat[p] *= nyq ? 0.0 : std::pow(std::sqrt(q) * k0, two_s);
  });
  return from_fourier(std::move(hat), g);
}

enum class GreenMode { Periodic, Free };

inline const char* to_string(GreenMode m) {
  return m == GreenMode::Periodic ? "periodic" : "free";
}

inline GreenMode green_mode_from_string(const std::string& s) {
  if (s == "periodic") return GreenMode::Periodic;
  if (s == "free") return GreenMode::Free;
  throw InvalidArgument("unknown Green mode '" + s + "'");
}

/// Literature value of the kernel constant of (-Delta)^s at 2s = n - 2,
/// used only as an independent cross-check of the calibrated constant.
inline double analytic_green_constant(int n) {
  const double s = 0.5 * (n - 2);
  return std::tgamma(0.5 * n - s) /
         (std::pow(4.0, s) * std::pow(std::numbers::pi, 0.5 * n) *
          std::tgamma(s));
}

namespace detail {

/// Integral of |z|^{-2} over [-a, a]^n (n >= 3), by splitting the cube into
/// 2n pyramids: 2n a^{n-2}/(n-2) * int_{[-1,1]^{n-1}} (1+|u|^2)^{-1} du.
inline double cube_integral_inv_sq(int n, double a) {
  using Q = boost::math::quadrature::gauss<double, 30>;
  const auto& x = Q::abscissa();
  const auto& w = Q::weights();
  std::vector<double> nodes, weights;
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(x[i]);
    weights.push_back(w[i]);
    if (x[i] != 0.0) {
      nodes.push_back(-x[i]);
      weights.push_back(w[i]);
    }
  }
  const int d = n - 1;
  const std::size_t q = nodes.size();
  std::vector<std::size_t> idx(d, 0);
  double u = 0.0;
  while (true) {
    double r2 = 1.0, wt = 1.0;
    for (int i = 0; i < d; ++i) {
      r2 += nodes[idx[i]] * nodes[idx[i]];
      wt *= weights[idx[i]];
    }
    u += wt / r2;
    int i = d - 1;
    while (i >= 0 && ++idx[i] == q) idx[i--] = 0;
    if (i < 0) break;
  }
  return 2.0 * n * std::pow(a, n - 2) / (n - 2) * u;
}

/// Sum of |j|^{-2} over non-zero integer vectors with max-norm <= M.
inline double lattice_sum_inv_sq(int n, int M) {
  std::vector<int> j(n, -M);
  double s = 0.0;
  while (true) {
    long long q = 0;
    for (int v : j) q += static_cast<long long>(v) * v;
    if (q != 0) s += 1.0 / static_cast<double>(q);
    int i = n - 1;
    while (i >= 0 && ++j[i] > M) j[i--] = -M;
    if (i < 0) break;
  }
  return s;
}

}  // namespace detail

/// Origin weight of the sampled kernel |z|^{-2} on the unit lattice.
///
/// The value w makes h^n (w/h^2 + sum_{j != 0} |jh|^{-2}) reproduce the
/// integral of |x|^{-2} over large cubes, i.e.
///   w = lim_M [ int_{[-M-1/2, M+1/2]^n} |z|^{-2} - sum_{0<|j|_inf<=M} |j|^{-2} ].
/// The limit exists for n = 3 (error ~ 1/M) and n = 4 (error ~ 1/M^2, the
/// kernel being harmonic there) and is extrapolated from two cube sizes.
/// For n >= 5 it diverges and the plain unit-cell average is returned.
inline double lattice_origin_weight(int n) {
  if (n < 3) throw InvalidDimension("lattice_origin_weight: n must be >= 3");
  static std::mutex mu;
  static std::map<int, double> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  double w = 0.0;
  auto partial = [n](int M) {
    return detail::cube_integral_inv_sq(n, M + 0.5) -
           detail::lattice_sum_inv_sq(n, M);
  };
  if (n == 3) {
    w = 2.0 * partial(64) - partial(32);
  } else if (n == 4) {
    w = (4.0 * partial(24) - partial(12)) / 3.0;
  } else {
    w = detail::cube_integral_inv_sq(n, 0.5);
  }
  cache[n] = w;
  return w;
}

struct GreenCalibration {
  double constant = 0.0;
  double analytic = 0.0;
  /// max |c v - g| / max |g| over the fit region.
  double fit_residual = 0.0;
};

/// How the free-space kernel |x|^{-2} is turned into lattice weights.
enum class KernelRule {
  /// Weights of the kernel truncated at radius sqrt(n) L, obtained from its
  /// closed-form Fourier transform on an oversampled lattice. Spectrally
  /// accurate for smooth densities.
  Spectral,
  /// Point samples h^n |x_j|^{-2} with the origin weight of
  /// lattice_origin_weight. Second-order accurate.
  Lattice,
};

namespace detail {

/// Fourier transform of |x|^{-2} restricted to the ball of radius R, at
/// frequencies |k| = kappa sqrt(q), q = 0..qmax:
///   F(k) = (2 pi)^{n/2} k^{2-n} int_0^{kR} t^{nu-1} J_nu(t) dt,  nu = n/2-1.
/// The t-integral is accumulated panel by panel over increasing q.
inline std::vector<double> truncated_kernel_transform(int n, double kappa,
                                                      double R,
                                                      std::size_t qmax) {
  using Q = boost::math::quadrature::gauss<double, 10>;
  const double nu = 0.5 * n - 1.0;
  auto integrand = [nu](double t) {
    return t == 0.0 ? (nu == 0.5 ? std::sqrt(2.0 / std::numbers::pi) : 0.0)
                    : std::pow(t, nu - 1.0) * std::cyl_bessel_j(nu, t);
  };
  std::vector<double> F(qmax + 1);
  F[0] = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n) *
         std::pow(R, n - 2) / (n - 2);
  double acc = 0.0, t_prev = 0.0;
  const double pref = std::pow(2.0 * std::numbers::pi, 0.5 * n);
  for (std::size_t q = 1; q <= qmax; ++q) {
    const double k = kappa * std::sqrt(static_cast<double>(q));
    const double t = k * R;
    // panels no longer than 1 keep the 10-point rule at round-off level
    const int panels = std::max(1, static_cast<int>(std::ceil(t - t_prev)));
    const double w = (t - t_prev) / panels;
    for (int i = 0; i < panels; ++i) {
      const double a = t_prev + i * w;
      acc += Q::integrate(integrand, a, a + w);
    }
    t_prev = t;
    F[q] = pref * std::pow(k, 2 - n) * acc;
  }
  return F;
}

}  // namespace detail

/// Convolution with the Green function of (-Delta)^s at 2s = n - 2.
///
/// Periodic mode applies the multiplier |xi|^{-(n-2)} with the zero mode
/// removed. Free mode zero-pads to 2m points per axis and convolves with
/// lattice weights of c |x|^{-2} built according to a KernelRule.
class GreenOperator {
 public:
  /// Free mode calibrates the kernel constant on the grid.
  GreenOperator(const BoxGrid& g, GreenMode mode,
                KernelRule rule = KernelRule::Spectral)
      : grid_(g), mode_(mode), rule_(rule) {
    if (g.n() < 3) {
      throw InvalidDimension("GreenOperator: critical order needs n >= 3");
    }
    if (mode_ == GreenMode::Free) {
      build_kernel();
      calibration_ = calibrate();
      constant_ = calibration_.constant;
    }
  }

  /// Free mode with an explicitly chosen kernel constant.
  GreenOperator(const BoxGrid& g, GreenMode mode, double constant,
                KernelRule rule = KernelRule::Spectral)
      : grid_(g), mode_(mode), rule_(rule) {
    if (g.n() < 3) {
      throw InvalidDimension("GreenOperator: critical order needs n >= 3");
    }
    if (mode_ == GreenMode::Free) {
      build_kernel();
      constant_ = constant;
      calibration_.constant = constant;
      calibration_.analytic = analytic_green_constant(g.n());
    }
  }

  const BoxGrid& grid() const { return grid_; }
  GreenMode mode() const { return mode_; }
  double constant() const { return constant_; }
  const GreenCalibration& calibration() const { return calibration_; }

  /// G * f. In periodic mode the mean of f, which the operator cannot
  /// invert, is dropped and written to *discarded_mean.
  ScalarDensity apply(const ScalarDensity& f,
                      double* discarded_mean = nullptr) const {
    if (!(f.grid() == grid_)) throw ShapeError("green_convolve: grid mismatch");
    if (mode_ == GreenMode::Periodic) {
      auto hat = to_fourier(f);
      if (discarded_mean) {
        *discarded_mean = hat[0].real() / static_cast<double>(grid_.points());
      }
      const double k0 = grid_.xi_min();
      const double p = -(grid_.n() - 2.0);
      for_each_mode(grid_, [&](std::size_t i, std::span<const int> k,
                               bool nyq) {
        double q = 0.0;
        for (int ki : k) q += static_cast<double>(ki) * ki;
        hat[i] *= (nyq || q == 0.0) ? 0.0 : std::pow(std::sqrt(q) * k0, p);
      });
      return from_fourier(std::move(hat), grid_);
    }
    if (discarded_mean) *discarded_mean = 0.0;
    auto out = convolve_raw(f);
    out *= constant_;
    return out;
  }

 private:
  /// Offset of grid point idx in the in-place padded real buffer.
  std::size_t padded_index(std::span<const int> idx) const {
    const std::size_t M = 2 * static_cast<std::size_t>(grid_.m());
    const std::size_t last = 2 * (static_cast<std::size_t>(grid_.m()) + 1);
    std::size_t p = 0;
    for (std::size_t a = 0; a + 1 < idx.size(); ++a)
      p = p * M + static_cast<std::size_t>(idx[a]);
    return p * last + static_cast<std::size_t>(idx.back());
  }

  /// Lattice weights of |x|^{-2} (times h^n) on the quadrant [0, m]^n.
  std::vector<double> lattice_weights() const {
    const int n = grid_.n();
    const int m = grid_.m();
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(m + 1);
    std::vector<double> w(total);
    const double scale = std::pow(grid_.h(), n - 2);
    const double w0 = lattice_origin_weight(n);
    std::vector<int> idx(n, 0);
    for (std::size_t p = 0; p < total; ++p) {
      long long q = 0;
      for (int v : idx) q += static_cast<long long>(v) * v;
      w[p] = q == 0 ? w0 * scale : scale / static_cast<double>(q);
      for (int a = n - 1; a >= 0; --a) {
        if (++idx[a] <= m) break;
        idx[a] = 0;
      }
    }
    return w;
  }

  /// Same quadrant, from the truncated kernel. On a lattice of period
  /// P = s L >= (1 + sqrt n) L the truncated kernel sees no periodic images
  /// for any pair of box points; its even real-space samples come from a
  /// type-I DCT of the closed-form transform.
  std::vector<double> spectral_weights() const {
    const int n = grid_.n();
    const int m = grid_.m();
    const int s = static_cast<int>(std::ceil(1.0 + std::sqrt(double(n))));
    const int half = s * m / 2;
    const double P = s * grid_.L();
    const double R = std::sqrt(double(n)) * grid_.L();
    const auto F = detail::truncated_kernel_transform(
        n, 2.0 * std::numbers::pi / P, R,
        static_cast<std::size_t>(n) * half * half);
    std::vector<int> fdims(n, half + 1);
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(half + 1);
    std::vector<double> big(total);
    std::vector<int> idx(n, 0);
    for (std::size_t p = 0; p < total; ++p) {
      std::size_t q = 0;
      for (int v : idx) q += static_cast<std::size_t>(v) * v;
      big[p] = F[q];
      for (int a = n - 1; a >= 0; --a) {
        if (++idx[a] <= half) break;
        idx[a] = 0;
      }
    }
    FftEngine::instance().redft00(big, fdims);
    const double scale = grid_.cell_volume() / std::pow(P, n);
    std::size_t qtotal = 1;
    for (int i = 0; i < n; ++i) qtotal *= static_cast<std::size_t>(m + 1);
    std::vector<double> w(qtotal);
    std::fill(idx.begin(), idx.end(), 0);
    for (std::size_t p = 0; p < qtotal; ++p) {
      std::size_t src = 0;
      for (int v : idx) src = src * (half + 1) + static_cast<std::size_t>(v);
      w[p] = big[src] * scale;
      for (int a = n - 1; a >= 0; --a) {
        if (++idx[a] <= m) break;
        idx[a] = 0;
      }
    }
    return w;
  }

  /// Transform of the quadrant weights on the 2m-periodic padded lattice.
  /// The weights are even along every axis, so the transform is real and is
  /// a type-I DCT of the (m+1)^n quadrant.
  void build_kernel() {
    const int n = grid_.n();
    const int m = grid_.m();
    pdims_.assign(n, 2 * m);
    kernel_hat_ = rule_ == KernelRule::Spectral ? spectral_weights()
                                                : lattice_weights();
    FftEngine::instance().redft00(kernel_hat_, std::vector<int>(n, m + 1));
    double inv = 1.0;
    for (int i = 0; i < n; ++i) inv /= 2.0 * m;
    for (auto& v : kernel_hat_) v *= inv;
  }

  /// Free-space convolution with kernel |x|^{-2} (constant 1).
  ScalarDensity convolve_raw(const ScalarDensity& f) const {
    const int n = grid_.n();
    const int m = grid_.m();
    const int M = 2 * m;
    std::vector<double> buf(FftEngine::inplace_size(pdims_), 0.0);
    for_each_point(grid_, [&](std::size_t p, std::span<const int> idx) {
      buf[padded_index(idx)] = f[p];
    });
    auto& fft = FftEngine::instance();
    fft.r2c_inplace(buf, pdims_);
    auto* hat = reinterpret_cast<cplx*>(buf.data());
    // walk the half-complex array: axes 0..n-2 of length M, last of m+1
    std::vector<int> idx(n - 1, 0);
    std::size_t outer = buf.size() / (2 * static_cast<std::size_t>(m + 1));
    for (std::size_t o = 0; o < outer; ++o) {
      std::size_t kbase = 0;
      for (int a = 0; a < n - 1; ++a) {
        const int k = idx[a] <= m ? idx[a] : M - idx[a];
        kbase = kbase * (m + 1) + static_cast<std::size_t>(k);
      }
      kbase *= static_cast<std::size_t>(m + 1);
      cplx* row = hat + o * (m + 1);
      for (int j = 0; j <= m; ++j) row[j] *= kernel_hat_[kbase + j];
      for (int a = n - 2; a >= 0; --a) {
        if (++idx[a] < M) break;
        idx[a] = 0;
      }
    }
    fft.c2r_inplace(buf, pdims_);
    ScalarDensity out(grid_);
    for_each_point(grid_, [&](std::size_t p, std::span<const int> idx) {
      out[p] = buf[padded_index(idx)];
    });
    return out;
  }

  /// Least-squares fit of c in c * K * (-Delta)^s g = g on Gaussians g.
  GreenCalibration calibrate() const {
    const BoxGrid& g = grid_;
    const double two_s = g.n() - 2.0;
    const double fit_r = g.L() / 8.0;
    double num = 0.0, den = 0.0;
    std::vector<std::pair<ScalarDensity, ScalarDensity>> pairs;
    for (double frac : {1.0 / 32.0, 1.0 / 24.0}) {
      const double w = std::max(frac * g.L(), 2.5 * g.h());
      ScalarDensity gauss(g);
      for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
        double r2 = 0.0;
        for (int i : idx) r2 += g.coord(i) * g.coord(i);
        gauss[p] = std::exp(-0.5 * r2 / (w * w));
      });
      auto v = convolve_raw(frac_laplacian_apply(gauss, two_s));
      for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
        double r2 = 0.0;
        for (int i : idx) r2 += g.coord(i) * g.coord(i);
        if (r2 > fit_r * fit_r) return;
        num += v[p] * gauss[p];
        den += v[p] * v[p];
      });
      pairs.emplace_back(std::move(gauss), std::move(v));
    }
    GreenCalibration cal;
    cal.constant = num / den;
    cal.analytic = analytic_green_constant(g.n());
    double worst = 0.0;
    for (const auto& [gauss, v] : pairs) {
      double gmax = 0.0, emax = 0.0;
      for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
        double r2 = 0.0;
        for (int i : idx) r2 += g.coord(i) * g.coord(i);
        if (r2 > fit_r * fit_r) return;
        gmax = std::max(gmax, std::abs(gauss[p]));
        emax = std::max(emax, std::abs(cal.constant * v[p] - gauss[p]));
      });
      worst = std::max(worst, emax / gmax);
    }
    cal.fit_residual = worst;
    return cal;
  }

  BoxGrid grid_;
  GreenMode mode_;
  KernelRule rule_ = KernelRule::Spectral;
  double constant_ = 1.0;
  GreenCalibration calibration_;
  std::vector<int> pdims_;
  std::vector<double> kernel_hat_;
};

/// Shared operator per (grid, mode). Free-mode operators hold a padded
/// kernel transform, so only the most recent few are kept.
inline std::shared_ptr<const GreenOperator> green_operator(const BoxGrid& g,
                                                           GreenMode mode) {
  static std::mutex mu;
  static std::deque<std::shared_ptr<const GreenOperator>> cache;
  std::lock_guard lock(mu);
  for (const auto& op : cache) {
    if (op->grid() == g && op->mode() == mode) return op;
  }
  auto op = std::make_shared<const GreenOperator>(g, mode);
  cache.push_back(op);
  if (cache.size() > 3) cache.pop_front();
  return op;
}

inline ScalarDensity green_convolve(const ScalarDensity& f, GreenMode mode,
                                    double* discarded_mean = nullptr) {
  return green_operator(f.grid(), mode)->apply(f, discarded_mean);
}

}  // namespace dcl
