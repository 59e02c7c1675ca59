// Configuration validation, the f catalog, the boundary-data family, the
// full pipeline (reproducibility), and CLI exit codes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmalab/report.hpp"

using namespace cmalab;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const char* name) {
  fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(CMA_LAB_BIN) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config defaults and round trip") {
  ExperimentConfig def;
  Json j = def.to_json();
  ExperimentConfig back = ExperimentConfig::from_json(j);
  CHECK(back.n == def.n);
  CHECK(back.resolution == def.resolution);
  CHECK(back.f_formula == def.f_formula);
  CHECK(back.harnack_heights == def.harnack_heights);
  CHECK(back.seed == def.seed);
}

TEST_CASE("config validation rejects bad values") {
  auto with = [](const char* key, Json v) {
    Json j = ExperimentConfig{}.to_json();
    j[key] = std::move(v);
    return j;
  };
  CHECK_THROWS_AS(ExperimentConfig::from_json(with("n", 3)), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(with("resolution", 64)), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(with("resolution", 3)), ConfigError);
  Json g = ExperimentConfig{}.to_json();
  g["domain"]["gamma"] = 0.5;
  CHECK_THROWS_AS(ExperimentConfig::from_json(g), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(with("family_size", 0)), ConfigError);
  Json f = ExperimentConfig{}.to_json();
  f["f"]["formula"] = "mystery";
  CHECK_THROWS_AS(ExperimentConfig::from_json(f), ConfigError);
  Json eps = ExperimentConfig{}.to_json();
  eps["f"]["eps"] = 0.9;
  CHECK_THROWS_AS(ExperimentConfig::from_json(eps), ConfigError);
}

TEST_CASE("f catalog: known ids, eps scaling, unknown id rejected") {
  RPoint p{0.3, -0.2, 0.0, 0.0};
  for (const std::string& id : f_formula_ids()) {
    double v0 = eval_f_formula(id, 0.0, p);
    CHECK(v0 == doctest::Approx(1.0));  // eps = 0 collapses to f = 1
    double v = eval_f_formula(id, 0.1, p);
    CHECK(std::abs(v - 1.0) <= 0.1 + 1e-12);
  }
  CHECK_THROWS_AS(eval_f_formula("mystery", 0.0, p), ConfigError);
}

TEST_CASE("boundary family is positive, smooth, and seed-reproducible") {
  BoundaryFn a = family_boundary(42, 3);
  BoundaryFn b = family_boundary(42, 3);
  BoundaryFn c = family_boundary(42, 4);
  bool differs = false;
  for (double th = 0.0; th < 6.28; th += 0.05) {
    RPoint p{std::cos(th), std::sin(th), 0.0, 0.0};
    CHECK(a(p) > 0.0);
    CHECK(a(p) == b(p));
    if (a(p) != c(p)) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("svg plots are byte-stable") {
  PlotSeries s;
  s.name = "osc";
  s.points = {{0.0, 1.0}, {1.0, 0.5}, {2.0, 0.26}};
  fs::path p1 = fs::temp_directory_path() / "cmalab_plot1.svg";
  fs::path p2 = fs::temp_directory_path() / "cmalab_plot2.svg";
  write_svg_plot(p1.string(), "decay", "level", "osc", {s});
  write_svg_plot(p2.string(), "decay", "level", "osc", {s});
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(p1).find("<svg") != std::string::npos);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("pipeline reproducibility: byte-identical summary.csv") {
  ExperimentConfig cfg;
  cfg.resolution = 193;  // cz needs mu0^4 = 0.0256 above the grid floor
  cfg.family_size = 2;
  cfg.f_formula = "radial";
  cfg.eps = 0.05;
  cfg.seed = 11;
  cfg.harnack_centers = 6;
  cfg.cz.mu0 = 0.4;

  // identical config (including out_dir): rerun and compare snapshots
  fs::path d1 = fresh_dir("cmalab_rep");
  cfg.out_dir = d1.string();
  run_pipeline(cfg);
  std::string s1 = slurp(d1 / "summary.csv");
  std::string m1 = slurp(d1 / "manifest.json");
  run_pipeline(cfg);
  std::string s2 = slurp(d1 / "summary.csv");
  std::string m2 = slurp(d1 / "manifest.json");
  REQUIRE(!s1.empty());
  CHECK(s1 == s2);
  CHECK(m1 == m2);

  // the manifest hashes every artifact and itself stays out of the map
  Json manifest = Json::parse(slurp(d1 / "manifest.json"));
  CHECK(manifest.contains("config_hash"));
  CHECK(manifest["files"].contains("summary.csv"));
  CHECK(!manifest["files"].contains("manifest.json"));
  std::uint64_t expect = fnv1a_file((d1 / "summary.csv").string());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(expect));
  CHECK(manifest["files"]["summary.csv"].get<std::string>() == buf);

  fs::remove_all(d1);
}

TEST_CASE("summarize tolerates missing artifacts") {
  fs::path d = fresh_dir("cmalab_empty_run");
  fs::create_directories(d);
  fs::path csv = fs::temp_directory_path() / "cmalab_summary.csv";
  summarize({d.string()}, csv.string(), d.string());
  std::string s = slurp(csv);
  CHECK(s.find("skipped") != std::string::npos);
  fs::remove_all(d);
  fs::remove(csv);
}

TEST_CASE("CLI exit codes: 0 ok, 2 config, 3 solver input") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("solve --n 3 --res 65 --f const:1 --out /tmp/cmalab_x.cmaf") == 2);
  CHECK(run_cli("solve --n 1 --res 64 --f const:1 --out /tmp/cmalab_x.cmaf") == 2);
  CHECK(run_cli("pipeline --config /nonexistent/cfg.json") == 2);
  CHECK(run_cli("lsolve --phi /nonexistent.cmaf --domain /nonexistent_mask.cmaf "
                "--g const:0 --bc zero --out /tmp/cmalab_u.cmaf") == 3);

  fs::path d = fresh_dir("cmalab_cli_run");
  CHECK(run_cli("solve --n 1 --res 65 --f const:1 --out /tmp/cmalab_phi.cmaf "
                "--mask-out /tmp/cmalab_mask.cmaf") == 0);
  CHECK(fs::exists("/tmp/cmalab_phi.cmaf"));
  fs::remove("/tmp/cmalab_phi.cmaf");
  fs::remove("/tmp/cmalab_mask.cmaf");
  fs::remove_all(d);
}
