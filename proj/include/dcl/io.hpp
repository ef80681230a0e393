// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fmt/format.h>
#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcl/closed_form.hpp"
#include "dcl/errors.hpp"
#include "dcl/grid.hpp"
#include "dcl/solver.hpp"

// Link against OpenSSL::Crypto when including this header.

namespace dcl::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Numbers and hashes

/// Fixed, locale-independent formatting used in every CSV body.
inline std::string num(double x) { return fmt::format("{:.12e}", x); }

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the bytes.
inline std::string git_blob_sha1(const std::string& bytes) {
  const std::string head = "blob " + std::to_string(bytes.size());
  const std::string full = head + std::string(1, '\0') + bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(full.data(), full.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("git_blob_sha1: digest failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV

/// CSV file with a leading comment naming the estimated quantity, a header
/// row and fixed-format numeric rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& quantity,
            const std::vector<std::string>& columns)
      : out_(path), ncol_(columns.size()) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# quantity: " << quantity << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != ncol_) throw ShapeError("CsvWriter: wrong row width");
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(num(v));
    row(cells);
  }

 private:
  std::ofstream out_;
  std::size_t ncol_;
};

/// Body of a CSV file without its comment lines.
inline std::string csv_body(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    out += line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshots
//
// Layout: ASCII header lines
//   DCLFIELD 1
//   n <int>
//   N <int>            (1 for scalar densities)
//   L <double, %.17g>
//   m <int>
//   kind spinor|scalar
//   end
// followed by little-endian float64 data, point-major in row-major point
// order (last axis fastest). A spinor stores re, im of each component per
// point; a scalar stores one value per point.

namespace detail {

inline void put_f64(std::ostream& out, double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  out.write(reinterpret_cast<const char*>(&u), 8);
}

inline double get_f64(std::istream& in) {
  std::uint64_t u;
  in.read(reinterpret_cast<char*>(&u), 8);
  if (!in) throw ShapeError("snapshot: truncated data");
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  double x;
  std::memcpy(&x, &u, 8);
  return x;
}

inline void write_header(std::ostream& out, const BoxGrid& g, int N,
                         const char* kind) {
  out << "DCLFIELD 1\n"
      << "n " << g.n() << "\n"
      << "N " << N << "\n"
      << fmt::format("L {:.17g}\n", g.L()) << "m " << g.m() << "\n"
      << "kind " << kind << "\n"
      << "end\n";
}

struct Header {
  int n = 0, N = 0, m = 0;
  double L = 0.0;
  std::string kind;
};

inline Header read_header(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line != "DCLFIELD 1") throw ShapeError("snapshot: bad magic line");
  Header h;
  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "n") ls >> h.n;
    else if (key == "N") ls >> h.N;
    else if (key == "L") ls >> h.L;
    else if (key == "m") ls >> h.m;
    else if (key == "kind") ls >> h.kind;
    else throw ShapeError("snapshot: unknown header key '" + key + "'");
  }
  if (line != "end") throw ShapeError("snapshot: missing end of header");
  return h;
}

}  // namespace detail

inline void write_snapshot(const std::filesystem::path& path,
                           const SpinorField& psi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  detail::write_header(out, psi.grid(), psi.N(), "spinor");
  for (std::size_t p = 0; p < psi.points(); ++p)
    for (int a = 0; a < psi.N(); ++a) {
      detail::put_f64(out, psi.at(a, p).real());
      detail::put_f64(out, psi.at(a, p).imag());
    }
}

inline void write_snapshot(const std::filesystem::path& path,
                           const ScalarDensity& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  detail::write_header(out, f.grid(), 1, "scalar");
  for (std::size_t p = 0; p < f.size(); ++p) detail::put_f64(out, f[p]);
}

inline SpinorField read_spinor_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const auto h = detail::read_header(in);
  if (h.kind != "spinor") throw ShapeError("snapshot: not a spinor field");
  BoxGrid g(h.n, h.L, h.m);
  SpinorField psi(g, make_clifford(h.n));
  if (psi.N() != h.N) throw ShapeError("snapshot: spinor dimension mismatch");
  for (std::size_t p = 0; p < psi.points(); ++p)
    for (int a = 0; a < psi.N(); ++a) {
      const double re = detail::get_f64(in);
      psi.at(a, p) = cplx(re, detail::get_f64(in));
    }
  return psi;
}

inline ScalarDensity read_scalar_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const auto h = detail::read_header(in);
  if (h.kind != "scalar" || h.N != 1) {
    throw ShapeError("snapshot: not a scalar field");
  }
  ScalarDensity f(BoxGrid(h.n, h.L, h.m));
  for (std::size_t p = 0; p < f.size(); ++p) f[p] = detail::get_f64(in);
  return f;
}

/// Shell averages of |psi| in bins of width h about the origin, up to L/2.
inline std::vector<std::pair<double, double>> radial_profile(
    const SpinorField& psi) {
  const BoxGrid& g = psi.grid();
  const int bins = g.m() / 2;
  std::vector<double> sum(bins, 0.0);
  std::vector<int> cnt(bins, 0);
  for_each_point(g, [&](std::size_t p, std::span<const int> idx) {
    double r2 = 0.0;
    for (int i : idx) r2 += g.coord(i) * g.coord(i);
    const int b = static_cast<int>(std::sqrt(r2) / g.h() + 0.5);
    if (b >= bins) return;
    double s = 0.0;
    for (int a = 0; a < psi.N(); ++a) s += std::norm(psi.at(a, p));
    sum[b] += std::sqrt(s);
    cnt[b] += 1;
  });
  std::vector<std::pair<double, double>> out;
  for (int b = 0; b < bins; ++b)
    if (cnt[b] > 0) out.emplace_back(b * g.h(), sum[b] / cnt[b]);
  return out;
}

inline void write_radial_csv(const std::filesystem::path& path,
                             const SpinorField& psi,
                             const std::string& quantity) {
  CsvWriter w(path, quantity, {"r", "abs_psi"});
  for (const auto& [r, v] : radial_profile(psi)) w.row({r, v});
}

// ---------------------------------------------------------------------------
// JSON reports

inline json constants_json(const Constants& c) {
  json j;
  j["n"] = c.n;
  j["d"] = c.d;
  j["a_n"] = c.a_n;
  j["c_n"] = c.c_n;
  j["Ybar"] = c.Ybar;
  j["I_n"] = c.I_n;
  j["QCoef"] = c.QCoef;
  j["fit_deviation"] = c.fit_deviation;
  j["consistency_residual"] = c.consistency_residual;
  return j;
}

inline Constants constants_from_json(const json& j) {
  Constants c;
  c.n = j.at("n").get<int>();
  c.d = j.at("d").get<double>();
  c.a_n = j.at("a_n").get<double>();
  c.c_n = j.at("c_n").get<double>();
  c.Ybar = j.at("Ybar").get<double>();
  c.I_n = j.at("I_n").get<double>();
  c.QCoef = j.at("QCoef").get<double>();
  c.fit_deviation = j.at("fit_deviation").get<double>();
  c.consistency_residual = j.at("consistency_residual").get<double>();
  return c;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline json grid_json(const BoxGrid& g) {
  return json{{"n", g.n()}, {"L", g.L()}, {"m", g.m()}, {"h", g.h()}};
}

inline json report_json(const GroundStateReport& r) {
  return json{{"lambda", r.lambda},
              {"delta_lambda", r.delta_lambda},
              {"quadratic", r.energy.quadratic},
              {"quartic", r.energy.quartic},
              {"total", r.energy.total},
              {"l2_norm", r.l2_norm},
              {"grad_dual", r.grad_dual},
              {"tau_residual", r.tau_residual},
              {"nehari_defect", r.nehari_defect},
              {"t_nehari", r.t_nehari},
              {"iters_outer", r.iters_outer},
              {"iters_tau", r.iters_tau},
              {"nehari_evals", r.nehari_evals},
              {"converged", r.converged},
              {"below_threshold", r.below_threshold},
              {"spurious", r.spurious},
              {"message", r.message}};
}

// ---------------------------------------------------------------------------
// Run configuration
//
// INI file with sections [model], [grid], [calibration], [solver],
// [experiment] and [output]. Lists are comma separated. Unknown keys are
// rejected.

/// Working grid used when the configuration names none.
inline std::pair<double, int> default_grid(int n) {
  switch (n) {
    case 3: return {40.0, 128};
    case 4: return {12.0, 40};
    default: return {20.0, 32};
  }
}

struct LadderStep {
  double L = 0.0;
  int m = 0;
};

struct RunConfig {
  int n = 3;
  GreenMode mode = GreenMode::Free;
  double L = 0.0;
  int m = 0;
  double calib_L = 0.0;
  int calib_m = 0;
  /// Constants JSON to use instead of calibrating.
  std::string constants_file;
  SolverConfig solver;
  /// lambda in units of the first positive grid eigenvalue 2 pi / L.
  double lambda_fraction = 0.5;
  std::vector<double> lambda_fractions = {0.2, 0.4, 0.6, 0.8, 0.95};
  std::vector<double> eps = {0.1, 0.15, 0.2, 0.3, 0.4};
  double cutoff_radius = 0.0;
  std::vector<double> sigmas = {0.5, 1.0, 2.0};
  std::vector<LadderStep> ladder;
  double init_scale = 1.0;
  int init_samples = 8;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  /// key = value pairs as read, for the manifest.
  std::map<std::string, std::string> raw;
  std::string source_hash;

  BoxGrid grid() const { return BoxGrid(n, L, m); }
  BoxGrid calibration_grid() const { return BoxGrid(n, calib_L, calib_m); }
  double lambda() const { return lambda_fraction * 2.0 * std::numbers::pi / L; }

  /// Throws ConfigError if any module precondition is violated.
  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (n < 3) fail("model.n must be >= 3");
    if (n > 6) fail("model.n must be <= 6");
    auto check_grid = [&](double l, int mm, const char* what) {
      if (!(l > 0.0)) fail(std::string(what) + ".L must be > 0");
      if (mm < 8 || mm % 2 != 0) {
        fail(std::string(what) + ".m must be even and >= 8");
      }
    };
    check_grid(L, m, "grid");
    check_grid(calib_L, calib_m, "calibration");
    for (const auto& s : ladder) check_grid(s.L, s.m, "experiment.ladder");
    try {
      solver.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
    auto in_gap = [&](double f, const char* what) {
      if (!(f > 0.0)) fail(std::string(what) + " must be > 0");
      if (on_spectrum(grid(), f * 2.0 * std::numbers::pi / L)) {
        fail(std::string(what) + " puts lambda on the grid spectrum");
      }
    };
    in_gap(lambda_fraction, "model.lambda_fraction");
    for (double f : lambda_fractions) in_gap(f, "experiment.lambda_fractions");
    for (double e : eps)
      if (!(e > 0.0)) fail("experiment.eps entries must be > 0");
    for (double s : sigmas)
      if (!(s > 0.0)) fail("experiment.sigmas entries must be > 0");
    if (cutoff_radius < 0.0 || !(2.0 * cutoff_radius < 0.5 * L)) {
      fail("experiment.cutoff_radius must satisfy 0 <= 2 r < L/2");
    }
    if (!(init_scale > 0.0)) fail("experiment.init_scale must be > 0");
    if (init_samples < 1) fail("experiment.init_samples must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
  }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s,
                                      const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (item.find_first_not_of(" \t", pos) != std::string::npos) throw 0;
    } catch (...) {
      throw ConfigError("bad number '" + item + "' in " + key);
    }
  }
  if (out.empty()) throw ConfigError(key + " is empty");
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  c.source_hash = git_blob_sha1(text);
  bool have_L = false, have_m = false, have_cL = false, have_cm = false;
  auto as_double = [](const std::string& v, const std::string& k) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (v.find_first_not_of(" \t", pos) != std::string::npos) throw 0;
      return x;
    } catch (...) {
      throw ConfigError("bad number '" + v + "' for " + k);
    }
  };
  auto as_int = [&](const std::string& v, const std::string& k) {
    const double x = as_double(v, k);
    if (x != std::floor(x) || std::abs(x) > 1e15) {
      throw ConfigError("expected an integer for " + k);
    }
    return static_cast<long long>(x);
  };
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' outside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string k = section + "." + key;
      const std::string v = node.data();
      c.raw[k] = v;
      if (k == "model.n") c.n = static_cast<int>(as_int(v, k));
      else if (k == "model.green_mode") {
        try {
          c.mode = green_mode_from_string(v);
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
      } else if (k == "model.lambda_fraction") c.lambda_fraction = as_double(v, k);
      else if (k == "grid.L") { c.L = as_double(v, k); have_L = true; }
      else if (k == "grid.m") { c.m = static_cast<int>(as_int(v, k)); have_m = true; }
      else if (k == "calibration.L") { c.calib_L = as_double(v, k); have_cL = true; }
      else if (k == "calibration.m") { c.calib_m = static_cast<int>(as_int(v, k)); have_cm = true; }
      else if (k == "calibration.constants_file") c.constants_file = v;
      else if (k == "solver.tol_tau") c.solver.tol_tau = as_double(v, k);
      else if (k == "solver.tol_nehari") c.solver.tol_nehari = as_double(v, k);
      else if (k == "solver.tol_outer") c.solver.tol_outer = as_double(v, k);
      else if (k == "solver.max_iter_tau") c.solver.max_iter_tau = static_cast<int>(as_int(v, k));
      else if (k == "solver.max_iter_nehari") c.solver.max_iter_nehari = static_cast<int>(as_int(v, k));
      else if (k == "solver.max_iter_outer") c.solver.max_iter_outer = static_cast<int>(as_int(v, k));
      else if (k == "solver.armijo") c.solver.armijo = as_double(v, k);
      else if (k == "solver.backtrack") c.solver.backtrack = as_double(v, k);
      else if (k == "solver.max_backtrack") c.solver.max_backtrack = static_cast<int>(as_int(v, k));
      else if (k == "solver.step0") c.solver.step0 = as_double(v, k);
      else if (k == "solver.history") c.solver.history = static_cast<int>(as_int(v, k));
      else if (k == "solver.t_min") c.solver.t_min = as_double(v, k);
      else if (k == "solver.t_max") c.solver.t_max = as_double(v, k);
      else if (k == "solver.nehari_scan") c.solver.nehari_scan = static_cast<int>(as_int(v, k));
      else if (k == "solver.perturbation") c.solver.perturbation = as_double(v, k);
      else if (k == "experiment.lambda_fractions") c.lambda_fractions = detail::parse_list(v, k);
      else if (k == "experiment.eps") c.eps = detail::parse_list(v, k);
      else if (k == "experiment.cutoff_radius") c.cutoff_radius = as_double(v, k);
      else if (k == "experiment.sigmas") c.sigmas = detail::parse_list(v, k);
      else if (k == "experiment.init_scale") c.init_scale = as_double(v, k);
      else if (k == "experiment.init_samples") c.init_samples = static_cast<int>(as_int(v, k));
      else if (k == "experiment.ladder") {
        // "L:m, L:m, ..."
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) {
            throw ConfigError("experiment.ladder entries must be L:m");
          }
          c.ladder.push_back({as_double(item.substr(0, colon), k),
                              static_cast<int>(as_int(item.substr(colon + 1), k))});
        }
      } else if (k == "output.dir") c.out_dir = v;
      else if (k == "output.seed") c.seed = static_cast<std::uint64_t>(as_int(v, k));
      else if (k == "output.threads") c.threads = static_cast<int>(as_int(v, k));
      else throw ConfigError("unknown config key '" + k + "'");
    }
  }
  if (c.n >= 3) {
    const auto [dL, dm] = default_grid(c.n);
    if (!have_L) c.L = dL;
    if (!have_m) c.m = dm;
    if (!have_cL) c.calib_L = dL;
    if (!have_cm) c.calib_m = dm;
  }
  if (c.cutoff_radius == 0.0 && c.L > 0.0) c.cutoff_radius = 0.24 * c.L;
  c.solver.seed = c.seed;
  c.solver.mode = c.mode;
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

/// Manifest written next to every run's outputs.
inline json manifest_json(const RunConfig& c, const std::string& command,
                          const std::optional<Constants>& k,
                          double wall_seconds, const json& convergence) {
  json cfg = json::object();
  for (const auto& [key, v] : c.raw) cfg[key] = v;
  json j;
  j["command"] = command;
  j["config"] = cfg;
  j["config_sha1"] = c.source_hash;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["grid"] = grid_json(c.grid());
  j["green_mode"] = to_string(c.mode);
  j["constants"] = k ? constants_json(*k) : json(nullptr);
  j["wall_time_s"] = wall_seconds;
  j["convergence"] = convergence;
  return j;
}

}  // namespace dcl::io
