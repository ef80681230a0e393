// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "dcl/io.hpp"

using namespace dcl;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() /
                 ("dcl_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(DCL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const char* kSmallSolve = R"([model]
n = 3
lambda_fraction = 0.5

[grid]
L = 12
m = 16

[calibration]
L = 40
m = 128

[solver]
max_iter_outer = %d
)";

std::string small_solve(int max_outer) {
  char buf[256];
  std::snprintf(buf, sizeof buf, kSmallSolve, max_outer);
  return buf;
}

}  // namespace

TEST_CASE("git blob hashes", "[io]") {
  CHECK(io::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(io::git_blob_sha1("hello\n") ==
        "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("spinor snapshots round trip bit for bit", "[io]") {
  const auto dir = scratch("snap");
  for (int n : {3, 4}) {
    const BoxGrid g(n, 7.25, 8);
    std::mt19937_64 rng(n);
    const auto psi = random_spinor(g, make_clifford(n), rng, 1.0, 0.2);
    const auto path = dir / ("s" + std::to_string(n) + ".dclf");
    io::write_snapshot(path, psi);
    const auto back = io::read_spinor_snapshot(path);
    CHECK(back.grid() == g);
    bool same = true;
    for (std::size_t i = 0; i < psi.size(); ++i)
      same = same && back.data()[i] == psi.data()[i];
    CHECK(same);
    const auto header = io::read_file(path).substr(0, 10);
    CHECK(header == "DCLFIELD 1");
    CHECK(fs::file_size(path) > psi.size() * 16);
  }
}

TEST_CASE("scalar snapshots round trip and kinds are checked", "[io]") {
  const auto dir = scratch("scalar");
  const BoxGrid g(3, 5.0, 8);
  std::mt19937_64 rng(1);
  const auto f = random_density(g, rng, 1.0, 0.2);
  io::write_snapshot(dir / "f.dclf", f);
  const auto back = io::read_scalar_snapshot(dir / "f.dclf");
  bool same = true;
  for (std::size_t i = 0; i < f.size(); ++i) same = same && back[i] == f[i];
  CHECK(same);
  CHECK_THROWS_AS(io::read_spinor_snapshot(dir / "f.dclf"), ShapeError);
  write_text(dir / "bad.dclf", "NOTAFIELD\n");
  CHECK_THROWS_AS(io::read_scalar_snapshot(dir / "bad.dclf"), ShapeError);
}

TEST_CASE("CSV layout", "[io]") {
  const auto dir = scratch("csv");
  {
    io::CsvWriter w(dir / "t.csv", "test quantity", {"a", "b"});
    w.row(std::vector<double>{1.0, -0.5});
    w.row(std::vector<std::string>{"x", "y"});
    CHECK_THROWS_AS(w.row(std::vector<double>{1.0}), ShapeError);
  }
  CHECK(io::read_file(dir / "t.csv") ==
        "# quantity: test quantity\na,b\n"
        "1.000000000000e+00,-5.000000000000e-01\nx,y\n");
  CHECK(io::csv_body(dir / "t.csv") ==
        "a,b\n1.000000000000e+00,-5.000000000000e-01\nx,y\n");
}

TEST_CASE("radial profile of a bubble", "[io]") {
  const BoxGrid g(3, 8.0, 32);
  const auto k = constants_from_d(3, 2.0);
  const auto psi = calibrated_bubble(g, make_clifford(3), k);
  const auto prof = io::radial_profile(psi);
  REQUIRE(!prof.empty());
  // |psi| = sqrt(a) (1 + r^2)^{-1}
  for (const auto& [r, v] : prof) {
    if (r > 3.0) break;
    CHECK_THAT(v, WithinRel(std::sqrt(k.a_n) / (1.0 + r * r), 0.1));
  }
}

TEST_CASE("constants JSON round trip", "[io]") {
  auto c = constants_from_d(4, 7.98);
  c.fit_deviation = 0.003;
  const auto back = io::constants_from_json(io::constants_json(c));
  CHECK(back.n == 4);
  CHECK(back.d == c.d);
  CHECK(back.a_n == c.a_n);
  CHECK(back.c_n == c.c_n);
  CHECK(back.Ybar == c.Ybar);
  CHECK(back.QCoef == c.QCoef);
  CHECK(back.fit_deviation == c.fit_deviation);
}

TEST_CASE("config parsing", "[io]") {
  const auto c = io::parse_config(R"([model]
n = 4
green_mode = periodic
lambda_fraction = 0.3

[grid]
L = 10
m = 24

[solver]
tol_outer = 1e-6
history = 5

[experiment]
eps = 0.5, 0.75,1.0
ladder = 10:16, 20:32

[output]
seed = 17
)");
  CHECK(c.n == 4);
  CHECK(c.mode == GreenMode::Periodic);
  CHECK(c.L == 10.0);
  CHECK(c.m == 24);
  CHECK(c.calib_L == 12.0);
  CHECK(c.calib_m == 40);
  CHECK(c.solver.tol_outer == 1e-6);
  CHECK(c.solver.history == 5);
  CHECK(c.solver.seed == 17);
  CHECK(c.eps == std::vector<double>{0.5, 0.75, 1.0});
  REQUIRE(c.ladder.size() == 2);
  CHECK(c.ladder[1].m == 32);
  CHECK_THAT(c.cutoff_radius, WithinRel(2.4, 1e-15));
  CHECK_THAT(c.lambda(), WithinRel(0.3 * 2.0 * std::numbers::pi / 10.0, 1e-15));
  CHECK(c.source_hash.size() == 40);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config defaults", "[io]") {
  const auto c = io::parse_config("");
  CHECK(c.n == 3);
  CHECK(c.L == 40.0);
  CHECK(c.m == 128);
  CHECK(c.mode == GreenMode::Free);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config errors", "[io]") {
  CHECK_THROWS_AS(io::parse_config("[model]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[model]\nn = three\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[model]\nn = 3.5\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[model]\ngreen_mode = weird\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[experiment]\neps = 0.1,,0.2\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[experiment]\nladder = 10\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[model\nn = 3\n"), ConfigError);
  CHECK_THROWS_AS(io::load_config("/nonexistent/x.ini"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[grid]\nm = 15\n").validate(), ConfigError);
  CHECK_THROWS_AS(io::parse_config("[model]\nn = 2\n").validate(), ConfigError);
  // lambda equal to the first eigenvalue
  CHECK_THROWS_AS(io::parse_config("[model]\nlambda_fraction = 1\n").validate(),
                  ConfigError);
  CHECK_THROWS_AS(
      io::parse_config("[grid]\nL = 10\n[experiment]\ncutoff_radius = 3\n")
          .validate(),
      ConfigError);
  CHECK_THROWS_AS(io::parse_config("[solver]\narmijo = 2\n").validate(),
                  ConfigError);
}

TEST_CASE("command line exit codes", "[io][cli]") {
  const auto dir = scratch("cli");
  write_text(dir / "ok.ini", small_solve(400));
  write_text(dir / "short.ini", small_solve(1));
  write_text(dir / "bad.ini", "[model]\nnope = 1\n");

  CHECK(run_cli("spectrum --config " + (dir / "ok.ini").string() + " --out " +
                (dir / "spectrum_run").string()) == 0);
  CHECK(fs::exists(dir / "spectrum_run" / "spectrum.csv"));
  CHECK(fs::exists(dir / "spectrum_run" / "manifest.json"));

  CHECK(run_cli("solve --config " + (dir / "ok.ini").string() + " --out " +
                (dir / "a").string()) == 0);
  CHECK(run_cli("solve --config " + (dir / "short.ini").string() + " --out " +
                (dir / "b").string()) == 1);
  CHECK(run_cli("solve --config " + (dir / "bad.ini").string() + " --out " +
                (dir / "c").string()) == 2);
  CHECK(run_cli("solve --config " + (dir / "missing.ini").string()) == 2);
  CHECK(run_cli("solve --threads 0") == 2);
  CHECK(run_cli("frobnicate") == 2);

  SECTION("outputs are reproducible") {
    REQUIRE(run_cli("solve --config " + (dir / "ok.ini").string() +
                    " --out " + (dir / "a2").string()) == 0);
    for (const char* f : {"energy.csv", "history.csv", "radial.csv"}) {
      INFO(f);
      CHECK(io::csv_body(dir / "a" / f) == io::csv_body(dir / "a2" / f));
    }
    CHECK(io::read_file(dir / "a" / "solution.dclf") ==
          io::read_file(dir / "a2" / "solution.dclf"));
    const auto rep = io::json::parse(io::read_file(dir / "a" / "report.json"));
    CHECK(rep.at("converged").get<bool>());
    CHECK(rep.at("total").get<double>() > 0.0);
  }
}
