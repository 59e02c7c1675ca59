#pragma once

#include <json.hpp>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmalab/cz.hpp"
#include "cmalab/harnack.hpp"
#include "cmalab/ma_solver.hpp"

namespace cmalab {

using Json = nlohmann::ordered_json;

/// Invalid or inconsistent configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One experiment: grid + domain + right-hand side + sweep parameters.
/// Formulas are catalog ids, not parsed expressions.
struct ExperimentConfig {
  int n = 1;
  int resolution = 257;
  double halfwidth = 1.1;
  double gamma = 0.0;

  std::string f_formula = "const";
  double eps = 0.0;

  SolverConfig solver;

  int section_stride = 24;            // center subsampling inside B_{1/2}
  std::vector<double> section_heights{0.04, 0.08, 0.16};

  CZParams cz;
  std::string cz_set = "ball";        // ball | half_ball | two_balls | annulus | level_set
  double cz_set_radius = 0.15;

  int harnack_centers = 20;
  std::vector<double> harnack_heights{0.16, 0.08, 0.04, 0.02, 0.01};
  double mu0 = 0.3;
  double C0 = 2.0;

  double holder_t0 = 0.25;
  double holder_tau = 0.35;
  int holder_levels = 5;

  int family_size = 20;
  std::uint64_t seed = 1;
  std::string out_dir = "run";

  static ExperimentConfig from_json(const Json& j);
  static ExperimentConfig from_file(const std::string& path);
  Json to_json() const;
};

/// Built-in f catalog: id -> f(z) for a given eps. Throws ConfigError on an
/// unknown id.
double eval_f_formula(const std::string& id, double eps, const RPoint& p);
std::vector<std::string> f_formula_ids();

/// Random positive smooth boundary family, reproducible from (seed, index).
BoundaryFn family_boundary(std::uint64_t seed, int index);

int worker_count();  // CMA_LAB_THREADS override, else 1

std::uint64_t fnv1a_bytes(const void* data, std::size_t len);
std::uint64_t fnv1a_file(const std::string& path);

/// Minimal SVG line plot: one polyline per series, fixed-precision output so
/// identical data gives identical bytes.
struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series);

/// solve -> family -> sections -> cz -> harnack -> holder -> summary +
/// manifest. Any stage failure rethrows with the stage name; artifacts
/// written so far stay on disk. Returns the run directory.
std::string run_pipeline(const ExperimentConfig& config);

/// Merge report.json / fit.json / cover.json from completed runs into one
/// summary.csv plus SVG plots; missing artifacts skip their rows with a note.
void summarize(const std::vector<std::string>& run_dirs, const std::string& csv_path,
               const std::string& plots_dir);

}  // namespace cmalab
