#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bll/harness.hpp"

using namespace bll;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("bll_harness_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string write_temp_config(const std::string& tag,
                              const std::string& body) {
  const fs::path p =
      fs::temp_directory_path() / ("bll_harness_cfg_" + tag + ".cfg");
  std::ofstream out(p);
  out << body;
  out.close();
  return p.string();
}

// A fully deterministic synthetic report for serialization tests.
RunReport synthetic_report() {
  RunReport rep;
  rep.config_hash = "0123456789abcdef";
  rep.code_version = kCodeVersion;
  rep.gamma = "0.5";
  rep.beta = 1.0;
  rep.T = 0.25;
  rep.datum = "standard";
  std::vector<std::pair<double, double>> pts;
  for (double eps : {0.2, 0.14, 0.1, 0.07}) {
    CaseRecord c;
    c.epsilon = eps;
    c.ok = true;
    c.err_u_l2 = 3.0 * eps * eps;
    c.err_u_linf = 5.0 * eps * eps;
    c.err_u_hs2 = 4.0 * eps * eps;
    c.err_u_x3 = 6.0 * eps * eps;
    c.err_omega_l2 = 2.0 * eps;
    c.err_omega_x2 = 2.5 * eps;
    c.r_x3 = 1.5 * eps * eps;
    c.h2_ratio_eps4 = 2.25;
    c.sup_e_over_eps2 = 1.1;
    c.dual_path_max = 1e-9;
    c.div_max = 1e-14;
    c.eta_wall_max = 1e-13;
    c.robin_residual = 1e-4;
    rep.cases.push_back(c);
    pts.emplace_back(eps, c.err_u_l2);
  }
  rep.fits["err_u_l2"] = fit_rate(pts);
  rep.verdicts.push_back({"velocity-rate", true, "slope 2.0000, r2 1.0000"});
  rep.notes.push_back("synthetic");
  return rep;
}

}  // namespace

TEST_CASE("fit_rate recovers exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double e : {0.2, 0.14, 0.1, 0.07}) pts.emplace_back(e, e * e);
  FitResult f = fit_rate(pts);
  CHECK(f.ok);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.slope_stderr < 1e-10);

  pts.clear();
  for (double e : {0.2, 0.14, 0.1, 0.07}) pts.emplace_back(e, 7.0);
  f = fit_rate(pts);
  CHECK(f.ok);
  CHECK(std::abs(f.slope) < 1e-12);

  pts.clear();
  for (double e : {0.2, 0.14, 0.1, 0.07})
    pts.emplace_back(e, e * e * (1.0 + 0.1 * std::sin(1.0 / e)));
  f = fit_rate(pts);
  CHECK(f.ok);
  CHECK(f.slope >= 1.8);
  CHECK(f.slope <= 2.2);
}

TEST_CASE("fit_rate excludes non-positive values and degenerates cleanly") {
  std::vector<std::pair<double, double>> pts = {
      {0.2, 0.04}, {0.14, 0.0}, {0.1, 0.01}, {0.07, 0.0049}};
  FitResult f = fit_rate(pts);
  CHECK(f.ok);
  CHECK(f.points_used == 3);
  CHECK(f.note.find("excluded") != std::string::npos);

  f = fit_rate({{0.2, 0.0}, {0.14, 0.0}, {0.1, 0.0}});
  CHECK(!f.ok);
  CHECK(f.note.find("degenerate") != std::string::npos);
}

TEST_CASE("config loading: schema, types, unknown keys") {
  const std::string good = write_temp_config("good",
                                             "# comment\n"
                                             "schema_version = 1\n"
                                             "[run]\n"
                                             "gamma = 0.5\n"
                                             "beta = 2.0\n"
                                             "epsilon_list = 0.2, 0.1, 0.05\n"
                                             "n_x = 16\n"
                                             "n_y = 64\n"
                                             "n_z = 64\n"
                                             "T = 0.02\n"
                                             "pipeline_dt = 2e-3\n"
                                             "ns_dt = 1e-3\n"
                                             "datum = standard\n"
                                             "jobs = 2\n");
  RunConfig c = load_config(good);
  CHECK(c.beta == 2.0);
  CHECK(c.grid.n_x == 16);
  REQUIRE(c.epsilon_list.size() == 3);
  CHECK(c.epsilon_list[1] == 0.1);
  CHECK(c.jobs == 2);
  CHECK_NOTHROW(c.validate(true));

  CHECK_THROWS(load_config(write_temp_config(
      "unknown", "schema_version = 1\nno_such_key = 3\n")));
  CHECK_THROWS(load_config(write_temp_config("noschema", "beta = 1\n")));
  CHECK_THROWS(load_config(write_temp_config(
      "badnum", "schema_version = 1\nbeta = abc\n")));

  // Identical epsilon entries are rejected for rate fits.
  RunConfig dup = c;
  dup.epsilon_list = {0.1, 0.1, 0.1};
  CHECK_THROWS(dup.validate(true));
  // Too-few entries likewise.
  dup.epsilon_list = {0.2, 0.1};
  CHECK_THROWS(dup.validate(true));
  CHECK_NOTHROW(dup.validate(false));
}

TEST_CASE("config hash is stable and key-sensitive") {
  RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.beta = 2.0;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("report emission is deterministic and round-trips") {
  const RunReport rep = synthetic_report();
  const std::string d1 = temp_dir("emit1"), d2 = temp_dir("emit2");
  emit_report(rep, d1);
  emit_report(rep, d1);  // overwrite in place
  emit_report(rep, d2);
  for (const char* name : {"report.json", "summary.csv", "verdict.txt",
                           "err_u_l2.svg"}) {
    CAPTURE(name);
    CHECK(slurp(d1 + "/" + name) == slurp(d2 + "/" + name));
  }
  const RunReport back = parse_report(d1 + "/report.json");
  CHECK(reports_equal(rep, back));
  CHECK(back.cases.size() == rep.cases.size());
  CHECK(back.fits.at("err_u_l2").slope ==
        doctest::Approx(rep.fits.at("err_u_l2").slope).epsilon(1e-14));
}

TEST_CASE("summary.csv matches the golden schema") {
  const RunReport rep = synthetic_report();
  const std::string d = temp_dir("golden");
  emit_report(rep, d);
  const std::string csv = slurp(d + "/summary.csv");
  const std::string golden =
      slurp(std::string(BLL_SOURCE_DIR) + "/tests/golden/summary.csv");
  CHECK(csv == golden);
  // First line is the documented header.
  CHECK(csv.substr(0, csv.find('\n')) == std::string(kSummaryCsvHeader));
}

TEST_CASE("empty report emits valid zero-row files") {
  RunReport rep;
  rep.config_hash = "-";
  rep.code_version = kCodeVersion;
  const std::string d = temp_dir("empty");
  emit_report(rep, d);
  const std::string csv = slurp(d + "/summary.csv");
  CHECK(csv == std::string(kSummaryCsvHeader) + "\n");
  const RunReport back = parse_report(d + "/report.json");
  CHECK(back.cases.empty());
}

TEST_CASE("field dumps round-trip with their manifest") {
  GridParams gp;
  gp.n_x = 16;
  gp.n_y = 64;
  gp.n_z = 64;
  GridPtr g = make_grid(gp);
  const Field f = Field::sample(g, FieldKind::interior, [](double x, double y) {
    return std::cos(x) * std::exp(-y);
  });
  const std::string d = temp_dir("dump");
  dump_field(f, d + "/field", {{"t", 0.5}, {"epsilon", 0.1}});
  const std::string raw = slurp(d + "/field.f64");
  REQUIRE(raw.size() == sizeof(double) * 16 * 64);
  const double* vals = reinterpret_cast<const double*>(raw.data());
  // Row-major with x fastest: entry (ix, iv) at iv * n_x + ix.
  for (int iv = 0; iv < 64; iv += 13)
    for (int ix = 0; ix < 16; ix += 5)
      CHECK(vals[iv * 16 + ix] == f(ix, iv));
  const std::string man = slurp(d + "/field.json");
  CHECK(man.find("\"<f8\"") != std::string::npos);
  CHECK(man.find("x fastest") != std::string::npos);
  CHECK(man.find("\"epsilon\": 0.1") != std::string::npos);
}

TEST_CASE("norm oracle battery passes on random fields") {
  GridParams gp;
  gp.n_x = 32;
  gp.n_y = 96;
  gp.n_z = 96;
  const auto results = run_norm_oracles(make_grid(gp), 2024, 3);
  REQUIRE(results.size() == 6);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CAPTURE(r.max_rel);
    CHECK(r.pass);
  }
}

TEST_CASE("small sweep: determinism across jobs, verdicts, artifacts") {
  RunConfig cfg;
  cfg.gamma = Gamma::half;
  cfg.beta = 1.0;
  cfg.epsilon_list = {0.2, 0.14, 0.1};
  cfg.grid.n_x = 16;
  cfg.grid.n_y = 64;
  cfg.grid.n_z = 64;
  cfg.T = 0.02;
  cfg.pipeline_dt = 2e-3;
  cfg.ns_dt = 1e-3;
  cfg.norm_stride = 10;  // norms at the final time only
  cfg.datum = "standard";
  cfg.jobs = 1;
  const RunReport r1 = run_sweep(cfg);
  REQUIRE(r1.cases.size() == 3);
  for (const auto& c : r1.cases) {
    CAPTURE(c.error);
    CHECK(c.ok);
    CHECK(c.err_u_l2 > 0.0);
    CHECK(c.div_max < 1e-8);
    CHECK(c.eta_wall_max < 1e-6);
    CHECK(c.dual_path_max < 1e-6);
  }
  CHECK(r1.fits.at("err_u_l2").ok);
  CHECK(r1.fits.count("r_x3") == 1);
  bool found = false;
  for (const auto& v : r1.verdicts)
    if (v.name == "dual-path-remainders") {
      found = true;
      CHECK(v.pass);
    }
  CHECK(found);

  RunConfig cfg2 = cfg;
  cfg2.jobs = 3;
  const RunReport r2 = run_sweep(cfg2);
  CHECK(reports_equal(r1, r2));

  const std::string d = temp_dir("sweep");
  emit_report(r1, d);
  CHECK(fs::exists(d + "/report.json"));
  CHECK(fs::exists(d + "/summary.csv"));
  CHECK(fs::exists(d + "/verdict.txt"));
  CHECK(fs::exists(d + "/err_u_l2.svg"));
  CHECK(fs::exists(d + "/err_omega_l2.svg"));
  CHECK(fs::exists(d + "/r_x3.svg"));
}

TEST_CASE("zero datum: sweep completes with degenerate fits flagged") {
  RunConfig cfg;
  cfg.epsilon_list = {0.2, 0.14, 0.1};
  cfg.grid.n_x = 16;
  cfg.grid.n_y = 64;
  cfg.grid.n_z = 64;
  cfg.T = 0.004;
  cfg.pipeline_dt = 2e-3;
  cfg.ns_dt = 1e-3;
  cfg.norm_stride = 2;
  cfg.datum = "zero";
  const RunReport rep = run_sweep(cfg);
  for (const auto& c : rep.cases) {
    CHECK(c.ok);
    CHECK(c.err_u_l2 < 1e-12);
  }
  CHECK(!rep.fits.at("err_u_l2").ok);
  bool flagged = false;
  for (const auto& n : rep.notes)
    if (n.find("degenerate") != std::string::npos) flagged = true;
  CHECK(flagged);
}

TEST_CASE("crash isolation: a failing case does not poison the sweep") {
  RunConfig cfg;
  cfg.epsilon_list = {0.2, 0.14, 0.1, 1e-7};  // last one violates CFL/dt rules
  cfg.grid.n_x = 16;
  cfg.grid.n_y = 64;
  cfg.grid.n_z = 64;
  cfg.T = 0.004;
  cfg.pipeline_dt = 2e-3;
  cfg.ns_dt = 1e-3;
  cfg.norm_stride = 2;
  const RunReport rep = run_sweep(cfg);
  REQUIRE(rep.cases.size() == 4);
  CHECK(rep.cases[0].ok);
  CHECK(rep.cases[1].ok);
  CHECK(rep.cases[2].ok);
  CHECK(!rep.cases[3].ok);
  CHECK(!rep.cases[3].error.empty());
  CHECK(rep.fits.at("err_u_l2").ok);  // 3 survivors still fit
}
