#pragma once

#include <map>
#include <optional>

#include "cmalab/sections.hpp"

namespace cmalab {

struct CZParams {
  double delta = 0.5;   // target density
  double eps2 = 0.1;    // shrink factor for the overlap audit
  double sigma = 0.05;  // ellipsoid eccentricity budget
  double mu0 = 0.4;     // base scale; stopping heights live in (floor, mu0^4]
  double C = 1.0;       // inflation lambda_x = 1 + C sqrt(sigma)
};

/// Why a candidate center produced no stopping height.
enum class CZMarker { ok, hypothesis_fails, below_floor };

struct StoppingHeight {
  CZMarker marker = CZMarker::ok;
  double t = 0.0;           // largest sampled height with density >= delta
  double density_at_t = 0.0;
  double density_above = 0.0;  // density one resolution step above t
};

struct CoveredSection {
  Section section;      // built at the inflated height nu = lambda_x * t_x
  double t_x = 0.0;     // stopping height (nu may differ; both are kept)
  double density = 0.0; // mu(S_{t_x} cap A) / mu(S_{t_x})
  int generation = 0;   // nu in (2^{-g-1}, 2^{-g}]
};

struct CZCover {
  CZParams params;
  std::vector<CoveredSection> sections;  // selection order
  std::vector<std::size_t> overlap_profile;  // histogram: profile[c] = #nodes with overlap c
  std::size_t max_overlap = 0;
  double fitted_K = 0.0;          // max_overlap / log(1/eps2)
  double delta0 = 0.0;            // mu(A) / mu(union S_k)
  double uncovered_fraction = 0.0;  // A-nodes missed by the union, by measure
  std::vector<NodeId> non_cz_points;   // hypothesis (2) failures
  std::vector<NodeId> floor_points;    // t_x below the grid floor
};

/// t_x = sup{t <= mu0^4 : mu(S_t(x) cap A) >= delta mu(S_t(x))}, located by a
/// descending scan plus bisection against the next-higher sample. Hypothesis
/// (2) — density < delta throughout (mu0^4, mu0^3] — is checked, not assumed.
StoppingHeight stopping_height(const ScalarField& phi, const DomainMask& mask,
                               const MAMeasure& measure, NodeId x,
                               const std::vector<NodeId>& A, double delta, double mu0);

struct Subfamily {
  std::vector<CoveredSection> sections;
  std::vector<std::size_t> overlap_profile;
  std::size_t max_overlap = 0;
  double fitted_K = 0.0;
  std::vector<NodeId> residual;  // A-nodes uncovered by the full sections
};

/// Greedy generation-band selection: heights in (2^{-k-1}, 2^{-k}], a center
/// is kept iff no previously selected section contains it. Ties break by node
/// order. The overlap histogram is of the (1-eps2)-shrunk selected family.
Subfamily select_subfamily(const ScalarField& phi, const DomainMask& mask,
                           const std::map<NodeId, double>& heights,
                           const std::vector<NodeId>& A, double eps2);

CZCover cz_decompose(const ScalarField& phi, const DomainMask& mask, const MAMeasure& measure,
                     const std::vector<NodeId>& A, const CZParams& params);

struct DensityLimitReport {
  std::vector<double> heights;    // descending to the grid floor
  std::vector<double> densities;  // mu(A cap S_t(x)) / mu(S_t(x))
  bool trends_to_one = false;
  bool isolated = false;  // densities decay toward 0 instead
};

/// Discrete Lebesgue-differentiation check: density of A in S_t(x) as t
/// descends to the grid floor.
DensityLimitReport density_limit_check(const ScalarField& phi, const DomainMask& mask,
                                       const MAMeasure& measure, const std::vector<NodeId>& A,
                                       NodeId x, double mu0);

}  // namespace cmalab
