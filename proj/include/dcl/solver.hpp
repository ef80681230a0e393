// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dcl/closed_form.hpp"
#include "dcl/energy.hpp"
#include "dcl/errors.hpp"
#include "dcl/grid.hpp"
#include "dcl/spectral.hpp"

namespace dcl {

struct SolverConfig {
  double tol_tau = 1e-9;
  double tol_nehari = 1e-8;
  double tol_outer = 1e-5;
  int max_iter_tau = 400;
  int max_iter_nehari = 60;
  int max_iter_outer = 400;
  /// Armijo constant and backtracking factor of the outer descent.
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtrack = 30;
  double step0 = 1.0;
  /// Stored pairs of the limited-memory BFGS outer iteration.
  int history = 8;
  /// Initial bracket for the Nehari scaling; expanded geometrically up to
  /// a factor 1e3 beyond either end before giving up.
  double t_min = 1e-2;
  double t_max = 1e2;
  /// Points of the optional scan for several Nehari roots on a ray (0: off).
  int nehari_scan = 0;
  /// Relative size of a seeded random perturbation of the initial field.
  double perturbation = 0.0;
  std::uint64_t seed = 0;
  GreenMode mode = GreenMode::Free;

  void validate() const {
    if (!(tol_tau > 0 && tol_nehari > 0 && tol_outer > 0)) {
      throw InvalidArgument("SolverConfig: tolerances must be positive");
    }
    if (max_iter_tau < 1 || max_iter_nehari < 1 || max_iter_outer < 1) {
      throw InvalidArgument("SolverConfig: iteration limits must be >= 1");
    }
    if (!(armijo > 0 && armijo < 1 && backtrack > 0 && backtrack < 1)) {
      throw InvalidArgument("SolverConfig: bad line search parameters");
    }
    if (history < 0 || max_backtrack < 1 || !(step0 > 0)) {
      throw InvalidArgument("SolverConfig: bad step control parameters");
    }
    if (!(t_min > 0 && t_max > t_min)) {
      throw InvalidArgument("SolverConfig: need 0 < t_min < t_max");
    }
  }
};

// ---------------------------------------------------------------------------
// Spectral splitting with preconditioning in one pass

struct SplitField {
  /// P_sign r
  SpinorField part;
  /// |D - lambda|^{-1} P_sign r
  SpinorField precond;
  /// || |D - lambda|^{-1/2} P_sign r ||^2
  double dual_sq = 0.0;
};

inline SplitField split_precondition(const SpinorField& r, double lambda,
                                     int sign) {
  require_off_spectrum(r.grid(), lambda, "split_precondition");
  auto hat = to_fourier(r);
  std::vector<cplx> phat(hat.size());
  const auto& cl = r.algebra();
  const BoxGrid& g = r.grid();
  const int N = r.N();
  const int n = g.n();
  const std::size_t P = g.points();
  const double k0 = g.xi_min();
  std::vector<cplx> v(N), av(N);
  double acc = 0.0;
  auto keep = [&](double e) { return (e - lambda > 0.0) == (sign > 0); };
  for_each_mode(g, [&](std::size_t p, std::span<const int> k, bool nyq) {
    if (nyq) {
      for (int a = 0; a < N; ++a) hat[a * P + p] = phat[a * P + p] = 0.0;
      return;
    }
    double q = 0.0;
    for (int ki : k) q += static_cast<double>(ki) * ki;
    if (q == 0.0) {
      const double w = keep(0.0) ? 1.0 : 0.0;
      const double inv = 1.0 / std::abs(lambda);
      for (int a = 0; a < N; ++a) {
        hat[a * P + p] *= w;
        phat[a * P + p] = hat[a * P + p] * inv;
        acc += std::norm(hat[a * P + p]) * inv;
      }
      return;
    }
    const double rr = std::sqrt(q) * k0;
    for (int a = 0; a < N; ++a) {
      v[a] = hat[a * P + p];
      av[a] = 0.0;
    }
    for (int j = 0; j < n; ++j) {
      if (k[j] != 0) cl.apply_gamma_add(j, cplx(0.0, k[j] * k0 / rr), v, av);
    }
    const bool kp = keep(rr), km = keep(-rr);
    const double ip = 1.0 / std::abs(rr - lambda);
    const double im = 1.0 / std::abs(-rr - lambda);
    for (int a = 0; a < N; ++a) {
      const cplx vp = kp ? 0.5 * (v[a] + av[a]) : cplx{};
      const cplx vm = km ? 0.5 * (v[a] - av[a]) : cplx{};
      hat[a * P + p] = vp + vm;
      phat[a * P + p] = vp * ip + vm * im;
      acc += std::norm(vp) * ip + std::norm(vm) * im;
    }
  });
  SplitField out{from_fourier(std::move(hat), r),
                 from_fourier(std::move(phat), r), 0.0};
  out.dual_sq = acc * g.cell_volume() / static_cast<double>(P);
  return out;
}

/// Pointwise 2 Re <a, b>.
inline ScalarDensity cross_density(const SpinorField& a, const SpinorField& b) {
  a.check(b);
  ScalarDensity out(a.grid());
  const std::size_t P = a.points();
  for (int c = 0; c < a.N(); ++c)
    for (std::size_t p = 0; p < P; ++p) {
      const cplx x = a.at(c, p), y = b.at(c, p);
      out[p] += 2.0 * (x.real() * y.real() + x.imag() * y.imag());
    }
  return out;
}

// ---------------------------------------------------------------------------
// tau map

struct TauResult {
  /// Component in the negative space.
  SpinorField h;
  /// u + h
  SpinorField w;
  /// G * |w|^2
  ScalarDensity V;
  EnergyBreakdown energy;
  /// dual norm of P^- grad J(w)
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

/// Largest root of the decreasing cubic derivative of the line objective.
inline double concave_quartic_argmax(double c1, double c2, double c3,
                                     double c4) {
  // phi'(a) = c1 + 2 c2 a - 3 c3 a^2 - 4 c4 a^3, c1 > 0, phi' decreasing
  auto dphi = [&](double a) {
    return c1 + 2.0 * c2 * a - 3.0 * c3 * a * a - 4.0 * c4 * a * a * a;
  };
  if (!(c1 > 0.0)) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (dphi(hi) > 0.0 && guard++ < 200) hi *= 2.0;
  if (dphi(hi) > 0.0) return hi;
  double lo = 0.0;
  std::uintmax_t it = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  auto [a, b] = boost::math::tools::toms748_solve(dphi, lo, hi, dphi(lo),
                                                  dphi(hi), tol, it);
  return 0.5 * (a + b);
}

}  // namespace detail

/// Maximizer of h -> J_lambda(u + h) over the negative spectral space, for
/// u the positive part of psi_plus. Nonlinear conjugate gradients
/// (Polak-Ribiere+) preconditioned by |D - lambda|^{-1}, with exact line
/// search: along a direction the energy is a concave quartic polynomial.
/// `warm` seeds the iteration (its negative part is used).
inline TauResult tau_solve(const SpinorField& psi_plus, double lambda,
                           const SolverConfig& cfg,
                           const SpinorField* warm = nullptr) {
  const BoxGrid& g = psi_plus.grid();
  require_off_spectrum(g, lambda, "tau_solve");
  const auto G = green_operator(g, cfg.mode);
  SpinorField u = spectral_project(psi_plus, lambda, +1);
  SpinorField h = warm ? spectral_project(*warm, lambda, -1)
                       : SpinorField(g, psi_plus.algebra_ptr());
  SpinorField w = u + h;
  ScalarDensity V = G->apply(pointwise_density(w));
  std::optional<SpinorField> p_prev, r_prev, z_prev;
  double rz_prev = 0.0;
  TauResult res{h, w, V, {}, 0.0, 0};
  int it = 0;
  for (;; ++it) {
    if (it > 0 && it % 25 == 0) V = G->apply(pointwise_density(w));
    SpinorField grad = dirac_apply(w);
    grad.axpy(-lambda, w);
    grad -= multiply(V, w);
    auto sp = split_precondition(grad, lambda, -1);
    const double resid = std::sqrt(sp.dual_sq);
    res.residual = resid;
    if (resid < cfg.tol_tau) break;
    if (it >= cfg.max_iter_tau) {
      throw ConvergenceError("tau_solve: no convergence, residual " +
                                 std::to_string(resid),
                             resid, it);
    }
    // ascent direction for the concave map h -> J(u + h)
    SpinorField p = sp.precond;
    if (p_prev) {
      const double num = sp.dual_sq - l2_inner(sp.precond, *r_prev);
      const double beta = std::max(0.0, num / rz_prev);
      p.axpy(beta, *p_prev);
      if (l2_inner(sp.part, p) <= 0.0) p = sp.precond;
    }
    const auto rho1 = cross_density(w, p);
    const auto rho2 = pointwise_density(p);
    const auto G1 = G->apply(rho1);
    const auto G2 = G->apply(rho2);
    const double c1 = l2_inner(sp.part, p);
    // rounding floor: no ascent left along the preconditioned gradient
    if (!(c1 > 0.0)) break;
    const double c2 = -0.5 * lambda_norm_sq(p, lambda) -
                      0.25 * (integrate_product(G1, rho1) +
                              2.0 * integrate_product(V, rho2));
    const double c3 = 0.5 * integrate_product(G1, rho2);
    const double c4 = 0.25 * integrate_product(G2, rho2);
    // J(w + a p) - J(w) = c1 a + c2 a^2 - c3 a^3 - c4 a^4
    const double alpha = detail::concave_quartic_argmax(c1, c2, c3, c4);
    h.axpy(alpha, p);
    w.axpy(alpha, p);
    auto Vs = V.values();
    for (std::size_t i = 0; i < Vs.size(); ++i)
      Vs[i] += alpha * G1[i] + alpha * alpha * G2[i];
    rz_prev = sp.dual_sq;
    r_prev = std::move(sp.part);
    z_prev = std::move(sp.precond);
    p_prev = std::move(p);
  }
  V = G->apply(pointwise_density(w));
  res.h = std::move(h);
  res.energy.quadratic =
      0.5 * (dirac_form(w) - lambda * l2_inner(w, w));
  res.energy.quartic = quartic_term(pointwise_density(w), V);
  res.energy.total = res.energy.quadratic - res.energy.quartic;
  res.w = std::move(w);
  res.V = std::move(V);
  res.iterations = it;
  return res;
}

/// J_lambda(u + tau(u)).
inline double reduced_energy(const SpinorField& psi_plus, double lambda,
                             const SolverConfig& cfg) {
  return tau_solve(psi_plus, lambda, cfg).energy.total;
}

// ---------------------------------------------------------------------------
// Nehari scaling

struct NehariResult {
  double t = 1.0;
  /// <grad Jred(t u), u>
  double defect = 0.0;
  int evaluations = 0;
  TauResult tau;
  /// All sign changes of the root function found by the optional scan.
  std::vector<double> roots;
};

namespace detail {

/// Root function g(t) = ||u||_lambda^2 - B(t)/t along the ray t u, with
/// B(t) = <V w, u>, w = t u + tau(t u) and V = G * |w|^2. Its zero is the
/// Nehari point; t g(t) is the defect <grad Jred(t u), u>.
class NehariRay {
 public:
  NehariRay(const SpinorField& u, double lambda, const SolverConfig& cfg)
      : u_(u), lambda_(lambda), cfg_(cfg) {
    norm_sq_ = lambda_norm_sq(u_, lambda_);
  }

  double operator()(double t) {
    SpinorField tu = u_;
    tu *= t;
    std::optional<SpinorField> warm;
    if (last_) {
      // tau is cubic in the amplitude to leading order
      warm = last_->h;
      *warm *= std::pow(t / last_t_, 3);
    }
    auto tr = tau_solve(tu, lambda_, cfg_, warm ? &*warm : nullptr);
    ++evals_;
    double s = 0.0;
    const std::size_t P = u_.points();
    for (int a = 0; a < u_.N(); ++a)
      for (std::size_t p = 0; p < P; ++p) {
        const cplx x = tr.w.at(a, p), y = u_.at(a, p);
        s += tr.V[p] * (x.real() * y.real() + x.imag() * y.imag());
      }
    s *= u_.grid().cell_volume();
    last_ = std::move(tr);
    last_t_ = t;
    last_coupling_ = s;
    return norm_sq_ - s / t;
  }

  int evaluations() const { return evals_; }
  double norm_sq() const { return norm_sq_; }
  double last_t() const { return last_t_; }
  double last_coupling() const { return last_coupling_; }
  double last_defect() const { return last_t_ * norm_sq_ - last_coupling_; }
  TauResult take_last() { return std::move(*last_); }

 private:
  const SpinorField& u_;
  double lambda_;
  const SolverConfig& cfg_;
  double norm_sq_ = 0.0;
  std::optional<TauResult> last_;
  double last_t_ = 1.0;
  double last_coupling_ = 0.0;
  int evals_ = 0;
};

}  // namespace detail

/// t > 0 with tu on the Nehari manifold, u = P^+ psi_plus.
///
/// B(t)/t grows like t^2, so secant steps on log(B(t)/t) = log ||u||^2 in
/// log t usually land within a few evaluations. If they do not, the root is
/// bracketed by geometric expansion from t_guess and refined with TOMS 748.
inline NehariResult nehari_scale(const SpinorField& psi_plus, double lambda,
                                 const SolverConfig& cfg,
                                 double t_guess = 1.0) {
  const BoxGrid& g = psi_plus.grid();
  require_off_spectrum(g, lambda, "nehari_scale");
  SpinorField u = spectral_project(psi_plus, lambda, +1);
  if (l2_norm(u) == 0.0) {
    throw InvalidArgument("nehari_scale: zero positive part has no Nehari "
                          "point");
  }
  detail::NehariRay ray(u, lambda, cfg);
  std::vector<double> roots;

  if (cfg.nehari_scan > 1) {
    detail::NehariRay scan(u, lambda, cfg);
    double prev_t = cfg.t_min, prev_v = scan(prev_t);
    const double ratio =
        std::pow(cfg.t_max / cfg.t_min, 1.0 / (cfg.nehari_scan - 1));
    for (int i = 1; i < cfg.nehari_scan; ++i) {
      const double t = cfg.t_min * std::pow(ratio, i);
      const double v = scan(t);
      if ((prev_v > 0) != (v > 0)) roots.push_back(std::sqrt(prev_t * t));
      prev_t = t;
      prev_v = v;
    }
  }

  const double a0 = ray.norm_sq();
  double best_t = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  auto eval = [&](double t) {
    const double v = ray(t);
    if (std::abs(ray.last_defect()) < best_d) {
      best_d = std::abs(ray.last_defect());
      best_t = t;
    }
    return v;
  };
  auto done = [&] { return best_d < cfg.tol_nehari; };

  double t0 = std::clamp(t_guess, cfg.t_min, cfg.t_max);
  double v0 = eval(t0);
  double lo = 0.0, hi = 0.0, flo = 0.0, fhi = 0.0;
  auto note = [&](double t, double v) {
    if (v > 0.0 && (lo == 0.0 || t > lo)) { lo = t; flo = v; }
    if (v <= 0.0 && (hi == 0.0 || t < hi)) { hi = t; fhi = v; }
  };
  note(t0, v0);

  // secant phase
  {
    double s_prev = std::log(t0);
    double B = ray.last_coupling();
    double F_prev = B > 0.0 ? std::log(B / t0) - std::log(a0) : 0.0;
    double slope = 2.0;
    for (int k = 0; k < 8 && !done() && B > 0.0; ++k) {
      double step = -F_prev / slope;
      step = std::clamp(step, -2.0, 2.0);
      const double s = s_prev + step;
      const double t = std::exp(s);
      const double v = eval(t);
      note(t, v);
      B = ray.last_coupling();
      if (!(B > 0.0)) break;
      const double F = std::log(B / t) - std::log(a0);
      if (F != F_prev) {
        slope = std::clamp((F - F_prev) / (s - s_prev), 0.5, 8.0);
      }
      s_prev = s;
      F_prev = F;
    }
  }

  if (!done()) {
    const double lo_limit = cfg.t_min * 1e-3;
    const double hi_limit = cfg.t_max * 1e3;
    if (lo == 0.0) {
      lo = hi;
      do {
        lo *= 0.5;
        if (lo < lo_limit) {
          throw BracketError("nehari_scale: root function stays negative "
                             "down to t = " + std::to_string(lo_limit));
        }
        flo = eval(lo);
      } while (flo <= 0.0);
    }
    if (hi == 0.0) {
      hi = lo;
      do {
        hi *= 2.0;
        if (hi > hi_limit) {
          throw BracketError("nehari_scale: root function stays positive "
                             "up to t = " + std::to_string(hi_limit));
        }
        fhi = eval(hi);
      } while (fhi > 0.0);
    }
    auto tol = [](double x, double y) {
      return std::abs(y - x) <= 1e-13 * std::max(x, y);
    };
    std::uintmax_t iters = static_cast<std::uintmax_t>(cfg.max_iter_nehari);
    auto f = [&](double t) {
      const double v = eval(t);
      return done() ? 0.0 : v;
    };
    boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  }
  if (ray.last_t() != best_t) ray(best_t);
  const double defect = ray.last_defect();
  return NehariResult{best_t, defect, ray.evaluations(), ray.take_last(),
                      std::move(roots)};
}

// ---------------------------------------------------------------------------
// Ground states

struct GroundStateReport {
  double lambda = 0.0;
  EnergyBreakdown energy;
  /// Converged reduced energy; an upper estimate of the min-max level.
  double delta_lambda = 0.0;
  double l2_norm = 0.0;
  double grad_dual = 0.0;
  double tau_residual = 0.0;
  double nehari_defect = 0.0;
  /// Nehari scaling applied to the initial field.
  double t_nehari = 0.0;
  int iters_outer = 0;
  int iters_tau = 0;
  int nehari_evals = 0;
  bool converged = false;
  /// delta_lambda < Ybar
  bool below_threshold = false;
  /// energy below the 0.25 Ybar sanity floor
  bool spurious = false;
  std::string message;
  std::vector<double> energy_history;
  std::vector<double> grad_history;
};

struct GroundState {
  GroundStateReport report;
  SpinorField solution;
};

/// Positive part of a grafted bubble whose scale minimizes the maximum of
/// J_lambda along its ray, Q^2/(4K) with Q the quadratic and K the quartic
/// term. Scales range over [2h, L/8] on a geometric grid.
inline SpinorField initial_guess(const BoxGrid& g,
                                 std::shared_ptr<const CliffordAlgebra> c,
                                 const Constants& k, double lambda,
                                 GreenMode mode, int samples = 8) {
  const double delta = 0.24 * g.L();
  const double lo = 2.0 * g.h(), hi = g.L() / 8.0;
  double best = std::numeric_limits<double>::infinity();
  std::optional<SpinorField> pick;
  for (int i = 0; i < samples; ++i) {
    const double eps =
        lo * std::pow(hi / lo, samples > 1 ? double(i) / (samples - 1) : 0.0);
    auto phi = spectral_project(graft_test_spinor(eps, delta, g, c, k), lambda,
                                +1);
    const auto e = energy(phi, lambda, mode);
    if (e.quadratic <= 0.0 || e.quartic <= 0.0) continue;
    const double peak = e.quadratic * e.quadratic / (4.0 * e.quartic);
    if (peak < best) {
      best = peak;
      pick = std::move(phi);
    }
  }
  if (!pick) throw InvalidArgument("initial_guess: no admissible scale");
  return *pick;
}

/// Minimizes the reduced energy over the Nehari manifold: limited-memory
/// BFGS on the positive space in the |D - lambda|^{-1} metric, each trial
/// point projected back to the manifold, step lengths by Armijo
/// backtracking.
inline GroundState ground_state(double lambda, const SolverConfig& cfg,
                                const SpinorField& init,
                                const Constants& constants) {
  cfg.validate();
  const BoxGrid& g = init.grid();
  if (!(lambda > 0.0)) {
    throw InvalidArgument("ground_state: lambda must be positive");
  }
  require_off_spectrum(g, lambda, "ground_state");
  GroundStateReport rep;
  rep.lambda = lambda;
  SpinorField u0 = spectral_project(init, lambda, +1);
  if (cfg.perturbation > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    auto noise = spectral_project(
        random_spinor(g, init.algebra_ptr(), rng, g.L() / 8.0, 2.0 * g.h()),
        lambda, +1);
    noise *= cfg.perturbation * l2_norm(u0) / l2_norm(noise);
    u0 += noise;
  }
  if (l2_norm(u0) == 0.0) {
    throw InvalidArgument("ground_state: initial field has no positive part");
  }

  auto finish = [&](GroundState gs) {
    auto& r = gs.report;
    r.delta_lambda = r.energy.total;
    r.l2_norm = l2_norm(gs.solution);
    r.below_threshold = r.delta_lambda < constants.Ybar;
    r.spurious = r.energy.total < 0.25 * constants.Ybar;
    return gs;
  };

  std::optional<NehariResult> nr;
  try {
    nr.emplace(nehari_scale(u0, lambda, cfg));
  } catch (const Error& e) {
    rep.message = e.what();
    return finish({rep, init});
  }
  rep.t_nehari = nr->t;
  rep.nehari_evals += nr->evaluations;
  SpinorField u = u0;
  u *= nr->t;
  TauResult tau = std::move(nr->tau);
  rep.nehari_defect = nr->defect;
  nr.reset();
  double J = tau.energy.total;
  rep.energy_history.push_back(J);
  // limited-memory BFGS pairs (s, y, 1 / <s, y>) in the |D - lambda|^{-1}
  // metric; history is dropped whenever a direction fails to descend
  struct Pair {
    SpinorField s, y;
    double rho;
  };
  std::deque<Pair> hist;
  std::optional<SpinorField> u_prev, r_prev;
  double gamma = 1.0;
  for (int it = 0;; ++it) {
    SpinorField grad = dirac_apply(tau.w);
    grad.axpy(-lambda, tau.w);
    grad -= multiply(tau.V, tau.w);
    rep.grad_dual = dual_norm(grad, lambda);
    rep.grad_history.push_back(rep.grad_dual);
    rep.tau_residual = tau.residual;
    rep.iters_outer = it;
    if (rep.grad_dual < cfg.tol_outer) {
      rep.converged = true;
      break;
    }
    if (it >= cfg.max_iter_outer) {
      rep.message = "outer iteration limit reached";
      break;
    }
    auto sp = split_precondition(grad, lambda, +1);
    if (u_prev) {
      SpinorField sv = u - *u_prev;
      SpinorField yv = sp.part - *r_prev;
      const double sy = l2_inner(sv, yv);
      if (sy > 0.0) {
        const auto Ky = abs_power_apply(yv, lambda, -1.0);
        gamma = sy / l2_inner(yv, Ky);
        hist.push_back({std::move(sv), std::move(yv), 1.0 / sy});
        if (hist.size() > static_cast<std::size_t>(cfg.history)) {
          hist.pop_front();
        }
      }
    }
    SpinorField q = sp.part;
    std::vector<double> alpha(hist.size());
    for (std::size_t i = hist.size(); i-- > 0;) {
      alpha[i] = hist[i].rho * l2_inner(hist[i].s, q);
      q.axpy(-alpha[i], hist[i].y);
    }
    SpinorField dir = abs_power_apply(q, lambda, -1.0);
    dir *= hist.empty() ? 1.0 : gamma;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      const double beta = hist[i].rho * l2_inner(hist[i].y, dir);
      dir.axpy(alpha[i] - beta, hist[i].s);
    }
    dir *= -1.0;
    double slope = l2_inner(sp.part, dir);
    if (!(slope < 0.0)) {
      hist.clear();
      dir = sp.precond;
      dir *= -1.0;
      slope = -sp.dual_sq;
    }
    bool accepted = false;
    double a = hist.empty() ? cfg.step0 : 1.0;
    for (int bt = 0; bt < cfg.max_backtrack; ++bt, a *= cfg.backtrack) {
      SpinorField trial = u;
      trial.axpy(a, dir);
      std::optional<NehariResult> tr;
      try {
        tr.emplace(nehari_scale(trial, lambda, cfg));
      } catch (const Error&) {
        continue;
      }
      rep.nehari_evals += tr->evaluations;
      rep.iters_tau += tr->tau.iterations;
      if (tr->tau.energy.total <= J + cfg.armijo * a * slope) {
        u_prev = std::move(u);
        u = std::move(trial);
        u *= tr->t;
        tau = std::move(tr->tau);
        rep.nehari_defect = tr->defect;
        J = tau.energy.total;
        accepted = true;
        break;
      }
    }
    rep.energy_history.push_back(J);
    if (!accepted) {
      rep.message = "line search failed";
      break;
    }
    r_prev = std::move(sp.part);
  }
  rep.energy = tau.energy;
  return finish({rep, std::move(tau.w)});
}

/// Ground states along a list of lambda values, each warm-started from the
/// previous solution. Failures are recorded and the sweep continues.
inline std::vector<GroundState> lambda_sweep(
    const std::vector<double>& lambdas, const SolverConfig& cfg,
    const SpinorField& first_init, const Constants& constants,
    std::vector<std::string>* errors = nullptr) {
  std::vector<GroundState> out;
  std::optional<SpinorField> warm;
  for (double lambda : lambdas) {
    try {
      require_off_spectrum(first_init.grid(), lambda, "lambda_sweep");
      const SpinorField& init = warm ? *warm : first_init;
      auto gs = ground_state(lambda, cfg, init, constants);
      if (gs.report.converged) warm = gs.solution;
      out.push_back(std::move(gs));
    } catch (const Error& e) {
      if (errors) errors->push_back(e.what());
      GroundStateReport r;
      r.lambda = lambda;
      r.message = e.what();
      out.push_back({r, first_init});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grafted test spinor scaling

struct TestSpinorRow {
  double eps = 0.0;
  EnergyBreakdown energy;
  /// J at lambda = 0
  double energy0 = 0.0;
  double grad_dual = 0.0;
  double l2_sq = 0.0;
  double q_eps = 0.0;
  /// Ybar - (lambda/2) Q(eps) - J_lambda(phi_eps)
  double remainder = 0.0;
  bool resolved = true;
};

struct TestSpinorSweep {
  std::vector<TestSpinorRow> rows;
  double grad_slope = std::numeric_limits<double>::quiet_NaN();
  double remainder_slope = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// Least-squares slope of log y against log x over positive pairs.
inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) return std::numeric_limits<double>::quiet_NaN();
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) return std::numeric_limits<double>::quiet_NaN();
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

/// Energy, gradient dual norm and L2 mass of phi_eps for each eps. Values
/// below 4h are under-resolved and excluded from the fits.
inline TestSpinorSweep test_spinor_sweep(
    const std::vector<double>& eps_list, double lambda, double cutoff_radius,
    const BoxGrid& g, std::shared_ptr<const CliffordAlgebra> c,
    const Constants& k, GreenMode mode) {
  require_off_spectrum(g, lambda, "test_spinor_sweep");
  TestSpinorSweep out;
  std::vector<double> xe, yg, xr, yr;
  for (double eps : eps_list) {
    TestSpinorRow row;
    row.eps = eps;
    row.resolved = eps >= 4.0 * g.h();
    const auto phi = graft_test_spinor(eps, cutoff_radius, g, c, k);
    const auto ev = evaluate(phi, lambda, mode);
    row.energy = ev.energy;
    row.l2_sq = l2_inner(phi, phi);
    row.energy0 = ev.energy.total + 0.5 * lambda * row.l2_sq;
    row.grad_dual = dual_norm(ev.gradient, lambda);
    row.q_eps = q_of_eps(eps, k);
    row.remainder = k.Ybar - 0.5 * lambda * row.q_eps - ev.energy.total;
    if (row.resolved) {
      xe.push_back(eps);
      yg.push_back(row.grad_dual);
      xr.push_back(eps);
      yr.push_back(row.remainder);
    } else {
      out.warnings.push_back("eps = " + std::to_string(eps) +
                             " is below 4h and excluded from the fits");
    }
    out.rows.push_back(row);
  }
  out.grad_slope = loglog_slope(xe, yg);
  out.remainder_slope = loglog_slope(xr, yr);
  return out;
}

}  // namespace dcl
