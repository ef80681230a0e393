// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0
//
// dcl: command-line driver for the Dirac-Choquard lab.
//
//   dcl <subcommand> [--config PATH] [--out DIR] [--threads K] [--seed S]
//
// Exit codes: 0 success, 1 experiment failure, 2 configuration error.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dcl/dcl.hpp"
#include "dcl/io.hpp"

namespace fs = std::filesystem;
using namespace dcl;
using io::json;
using io::num;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

struct Context {
  io::RunConfig cfg;
  fs::path out;
  std::chrono::steady_clock::time_point start;
  std::shared_ptr<const CliffordAlgebra> algebra;

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }

  void manifest(const std::string& command, const std::optional<Constants>& k,
                const json& convergence) const {
    io::write_json(out / "manifest.json",
                   io::manifest_json(cfg, command, k, elapsed(), convergence));
  }
};

Constants obtain_constants(const Context& c) {
  if (!c.cfg.constants_file.empty()) {
    const auto text = io::read_file(c.cfg.constants_file);
    Constants k;
    try {
      k = io::constants_from_json(json::parse(text));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad constants file: ") + e.what());
    }
    if (k.n != c.cfg.n) throw ConfigError("constants file has the wrong n");
    return k;
  }
  return calibrate_constants(c.cfg.n, c.cfg.calibration_grid());
}

int cmd_calibrate(Context& c) {
  const auto k = calibrate_constants(c.cfg.n, c.cfg.calibration_grid());
  io::write_json(c.out / "constants.json", io::constants_json(k));
  std::FILE* f = std::fopen((c.out / "summary.txt").c_str(), "w");
  if (!f) throw Error("cannot write summary.txt");
  const auto g = c.cfg.calibration_grid();
  fmt::print(f, "# quantity: Ybar\n");
  fmt::print(f, "grid n={} L={} m={} h={}\n", g.n(), g.L(), g.m(), g.h());
  fmt::print(f, "d = {}\na_n = {}\nc_n = {}\nYbar = {}\n", k.d, k.a_n, k.c_n,
             k.Ybar);
  fmt::print(f, "I_n = {}\nQCoef = {}\n", k.I_n, k.QCoef);
  fmt::print(f, "fit deviation over |x| <= {} : {}\n", calibration_radius(g),
             k.fit_deviation);
  fmt::print(f, "consistency residual: {}\n", k.consistency_residual);
  std::fclose(f);
  fmt::print("d = {:.8g}  a_n = {:.8g}  c_n = {:.8g}  Ybar = {:.8g}\n", k.d,
             k.a_n, k.c_n, k.Ybar);
  c.manifest("calibrate", k, json{{"fit_deviation", k.fit_deviation}});
  return kOk;
}

std::vector<io::LadderStep> default_ladder(int n) {
  if (n == 3) return {{20.0, 32}, {40.0, 64}, {80.0, 128}};
  if (n == 4) return {{12.0, 16}, {24.0, 32}};
  return {{10.0, 16}, {20.0, 32}};
}

int cmd_bubble_verify(Context& c) {
  const auto k = obtain_constants(c);
  auto ladder = c.cfg.ladder.empty() ? default_ladder(c.cfg.n) : c.cfg.ladder;
  io::CsvWriter w(c.out / "ladder.csv", "bubble eigen-identity residual",
                  {"field", "L", "m", "h", "eig_residual", "eq_residual_free",
                   "eq_residual_periodic"});
  {
    // zero field: every residual vanishes
    BoxGrid g(c.cfg.n, ladder.front().L, ladder.front().m);
    SpinorField zero(g, c.algebra);
    const auto d0 = dirac_apply(zero);
    const double r0 = l2_norm(d0);
    w.row({"zero", num(g.L()), std::to_string(g.m()), num(g.h()), num(r0),
           num(r0), num(r0)});
  }
  std::vector<double> eig;
  json rows = json::array();
  for (const auto& s : ladder) {
    BoxGrid g(c.cfg.n, s.L, s.m);
    const double e = eigen_identity_residual(g, c.algebra, k);
    const double rf = equation_residual(g, c.algebra, k, GreenMode::Free);
    const double rp = equation_residual(g, c.algebra, k, GreenMode::Periodic);
    eig.push_back(e);
    w.row({"bubble", num(s.L), std::to_string(s.m), num(g.h()), num(e),
           num(rf), num(rp)});
    fmt::print("L={:g} m={} eig={:.4e} eq_free={:.4e} eq_periodic={:.4e}\n",
               s.L, s.m, e, rf, rp);
    rows.push_back(json{{"L", s.L}, {"m", s.m}, {"eig_residual", e}});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < eig.size(); ++i) monotone &= eig[i] < eig[i - 1];
  c.manifest("bubble-verify", k, json{{"monotone", monotone}, {"ladder", rows}});
  if (!monotone) {
    fmt::print(stderr, "residual ladder is not monotonically decreasing\n");
    return kFail;
  }
  return kOk;
}

int cmd_graft_sweep(Context& c) {
  const auto k = obtain_constants(c);
  const auto g = c.cfg.grid();
  const double lambda = c.cfg.lambda();
  const auto sw = test_spinor_sweep(c.cfg.eps, lambda, c.cfg.cutoff_radius, g,
                                    c.algebra, k, c.cfg.mode);
  for (const auto& msg : sw.warnings) fmt::print(stderr, "warning: {}\n", msg);
  io::CsvWriter w(c.out / "graft.csv", "grad_dual",
                  {"eps_or_lambda", "energy_total", "quartic", "grad_dual",
                   "l2_norm", "t_nehari", "iters", "converged"});
  io::CsvWriter q(c.out / "graft_remainder.csv", "Q_eps",
                  {"eps", "Q_eps", "l2_sq", "energy_lambda0",
                   "energy_lambda0_over_Ybar", "remainder", "resolved"});
  bool below = true;
  for (const auto& r : sw.rows) {
    const double t = std::numeric_limits<double>::quiet_NaN();
    w.row({num(r.eps), num(r.energy.total), num(r.energy.quartic),
           num(r.grad_dual), num(std::sqrt(r.l2_sq)), num(t), "0", "1"});
    q.row({num(r.eps), num(r.q_eps), num(r.l2_sq), num(r.energy0),
           num(r.energy0 / k.Ybar), num(r.remainder), r.resolved ? "1" : "0"});
    below &= r.energy0 <= 1.02 * k.Ybar;
  }
  const bool grad_ok = sw.grad_slope >= 0.8 && sw.grad_slope <= 1.2;
  const bool rem_ok = sw.remainder_slope >= 1.6 && sw.remainder_slope <= 2.4;
  fmt::print("gradient slope {:.4f}  remainder slope {:.4f}  J0 <= 1.02 Ybar: "
             "{}\n",
             sw.grad_slope, sw.remainder_slope, below);
  json summary{{"lambda", lambda},
               {"cutoff_radius", c.cfg.cutoff_radius},
               {"grad_slope", std::isnan(sw.grad_slope) ? json(nullptr)
                                                        : json(sw.grad_slope)},
               {"remainder_slope", std::isnan(sw.remainder_slope)
                                       ? json(nullptr)
                                       : json(sw.remainder_slope)},
               {"grad_slope_ok", grad_ok},
               {"remainder_slope_ok", rem_ok},
               {"energy_below_threshold", below}};
  io::write_json(c.out / "summary.json", summary);
  c.manifest("graft-sweep", k, summary);
  return grad_ok && rem_ok && below ? kOk : kFail;
}

SpinorField default_init(const Context& c, const Constants& k, double lambda) {
  const auto g = c.cfg.grid();
  auto init = initial_guess(g, c.algebra, k, lambda, c.cfg.mode,
                            c.cfg.init_samples);
  init *= c.cfg.init_scale;
  return init;
}

std::vector<std::string> sweep_row(const GroundStateReport& r) {
  return {num(r.lambda),           num(r.energy.total),
          num(r.energy.quartic),   num(r.grad_dual),
          num(r.l2_norm),          num(r.t_nehari),
          std::to_string(r.iters_outer), r.converged ? "1" : "0"};
}

const std::vector<std::string> kSweepColumns = {
    "eps_or_lambda", "energy_total", "quartic",  "grad_dual",
    "l2_norm",       "t_nehari",     "iters",    "converged"};

int cmd_solve(Context& c) {
  const auto k = obtain_constants(c);
  const double lambda = c.cfg.lambda();
  const auto init = default_init(c, k, lambda);
  const auto gs = ground_state(lambda, c.cfg.solver, init, k);
  const auto& r = gs.report;
  const auto ev = evaluate(gs.solution, lambda, c.cfg.mode);
  io::CsvWriter e(c.out / "energy.csv", "delta_lambda",
                  {"lambda", "quadratic", "quartic", "total", "grad_l2",
                   "grad_dual"});
  e.row({lambda, ev.energy.quadratic, ev.energy.quartic, ev.energy.total,
         l2_norm(ev.gradient), dual_norm(ev.gradient, lambda)});
  io::CsvWriter h(c.out / "history.csv", "delta_lambda",
                  {"iteration", "energy", "grad_dual"});
  for (std::size_t i = 0; i < r.energy_history.size(); ++i) {
    const double gd = i < r.grad_history.size()
                          ? r.grad_history[i]
                          : std::numeric_limits<double>::quiet_NaN();
    h.row({std::to_string(i), num(r.energy_history[i]), num(gd)});
  }
  io::write_snapshot(c.out / "solution.dclf", gs.solution);
  io::write_radial_csv(c.out / "radial.csv", gs.solution, "|psi_lambda|(r)");
  auto rep = io::report_json(r);
  rep["Ybar"] = k.Ybar;
  const double vmin =
      support_min(ev.potential, pointwise_density(gs.solution));
  rep["potential_min_on_support"] = vmin;
  if (!(vmin > 0.0)) {
    fmt::print(stderr, "warning: Green potential {:.3e} <= 0 on the support "
                       "of the solution\n", vmin);
  }
  io::write_json(c.out / "report.json", rep);
  fmt::print("lambda = {:.6g}  delta_lambda = {:.8g}  Ybar = {:.8g}  "
             "grad_dual = {:.3e}  converged = {}\n",
             lambda, r.delta_lambda, k.Ybar, r.grad_dual, r.converged);
  if (!r.below_threshold) {
    fmt::print(stderr, "warning: delta_lambda estimate is not below Ybar\n");
  }
  if (r.spurious) {
    fmt::print(stderr, "warning: energy below the 0.25 Ybar sanity floor\n");
  }
  c.manifest("solve", k, rep);
  if (!r.converged) {
    fmt::print(stderr, "not converged: {}\n", r.message);
    return kFail;
  }
  return kOk;
}

int cmd_lambda_sweep(Context& c) {
  const auto k = obtain_constants(c);
  const auto g = c.cfg.grid();
  std::vector<double> lambdas;
  for (double f : c.cfg.lambda_fractions) lambdas.push_back(f * g.xi_min());
  const auto init = default_init(c, k, lambdas.front());
  std::vector<std::string> errors;
  const auto res = lambda_sweep(lambdas, c.cfg.solver, init, k, &errors);
  for (const auto& e : errors) fmt::print(stderr, "error: {}\n", e);
  io::CsvWriter w(c.out / "sweep.csv", "delta_lambda", kSweepColumns);
  json reports = json::array();
  bool all = true, below = true;
  std::vector<double> norms;
  for (const auto& gs : res) {
    w.row(sweep_row(gs.report));
    reports.push_back(io::report_json(gs.report));
    all &= gs.report.converged;
    below &= gs.report.below_threshold;
    norms.push_back(gs.report.l2_norm);
    fmt::print("lambda = {:.6g}  delta_lambda = {:.8g}  l2 = {:.6g}  "
               "converged = {}\n",
               gs.report.lambda, gs.report.delta_lambda, gs.report.l2_norm,
               gs.report.converged);
  }
  bool trend = true;
  const std::size_t K = norms.size();
  for (std::size_t i = K >= 3 ? K - 2 : 1; i < K; ++i) {
    trend &= norms[i] < norms[i - 1];
  }
  c.manifest("lambda-sweep", k,
             json{{"all_converged", all},
                  {"all_below_threshold", below},
                  {"norm_decreasing_at_edge", trend},
                  {"reports", reports}});
  if (!all) fmt::print(stderr, "some solves did not converge\n");
  if (!below) fmt::print(stderr, "some energies are not below Ybar\n");
  if (!trend) fmt::print(stderr, "L2 norm not decreasing near the gap edge\n");
  return all && below && trend ? kOk : kFail;
}

int cmd_spectrum(Context& c) {
  const auto g = c.cfg.grid();
  io::CsvWriter w(c.out / "spectrum.csv", "grid Dirac eigenvalues",
                  {"eigenvalue", "multiplicity"});
  for (const auto& e : dirac_spectrum(g)) {
    w.row({num(e.eigenvalue), std::to_string(e.multiplicity)});
  }
  fmt::print("first positive eigenvalue 2 pi / L = {:.10g}\n", g.xi_min());
  c.manifest("spectrum", std::nullopt,
             json{{"first_positive_eigenvalue", g.xi_min()}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the Dirac-Choquard equation"};
  app.set_help_all_flag("--help-all");
  std::string config_path, out_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "FFT thread cap")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed");
  app.require_subcommand(1, 1);
  app.fallthrough();
  for (const char* name : {"calibrate", "bubble-verify", "graft-sweep",
                           "solve", "lambda-sweep", "spectrum"}) {
    app.add_subcommand(name);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  Context c;
  c.start = std::chrono::steady_clock::now();
  try {
    c.cfg = config_path.empty() ? io::parse_config("")
                                : io::load_config(config_path);
    if (!out_dir.empty()) c.cfg.out_dir = out_dir;
    if (seed) {
      c.cfg.seed = *seed;
      c.cfg.solver.seed = *seed;
    }
    if (threads) c.cfg.threads = *threads;
    c.cfg.validate();
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  }
  FftEngine::instance().set_threads(c.cfg.threads);
  c.out = c.cfg.out_dir;
  try {
    fs::create_directories(c.out);
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "config error: cannot create {}: {}\n", c.out.string(),
               e.what());
    return kConfig;
  }
  c.algebra = make_clifford(c.cfg.n);

  try {
    if (cmd == "calibrate") return cmd_calibrate(c);
    if (cmd == "bubble-verify") return cmd_bubble_verify(c);
    if (cmd == "graft-sweep") return cmd_graft_sweep(c);
    if (cmd == "solve") return cmd_solve(c);
    if (cmd == "lambda-sweep") return cmd_lambda_sweep(c);
    if (cmd == "spectrum") return cmd_spectrum(c);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFail;
  }
  return kFail;
}
