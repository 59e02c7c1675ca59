// Newton solver for det(phi_{i jbar}) = f: exactness on the model problem,
// barrier and comparison envelopes, and determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cmalab/ma_solver.hpp"

using namespace cmalab;

namespace {

double sq_norm(const RPoint& p) {
  double s = 0.0;
  for (int a = 0; a < kMaxDim; ++a) s += p[a] * p[a];
  return s;
}

double sup_error_vs_model(const ScalarField& phi, const DomainMask& mask) {
  double worst = 0.0;
  for (NodeId id : mask.interior)
    worst = std::max(worst, std::abs(phi[id] - (sq_norm(phi.grid->point(id)) - 1.0)));
  return worst;
}

}  // namespace

TEST_CASE("reference solve reproduces |z|^2 - 1 on the ball") {
  SolverConfig cfg;
  for (int n : {1, 2}) {
    GridPtr g = build_grid(n, n == 1 ? 129 : 13, 1.1);
    DomainMaskPtr mask = build_ball_domain(g, 0.0);
    NewtonReport rep;
    ScalarField v0 = solve_reference(mask, cfg, &rep);
    CHECK(rep.converged);
    CHECK(rep.min_eigenvalue > 0.0);
    CHECK(sup_error_vs_model(v0, *mask) < 10.0 * g->spacing * g->spacing);
  }
}

TEST_CASE("constant-f solutions scale the model quadratic") {
  // det(phi_{1 1bar}) = 1 + eps on the ball with zero data is solved by
  // (1 + eps)(|z|^2 - 1) when n = 1
  GridPtr g = build_grid(1, 129, 1.1);
  DomainMaskPtr mask = build_ball_domain(g, 0.0);
  double eps = 0.1;
  ScalarField f(g, 1.0 + eps);
  std::fill(f.defined.begin(), f.defined.end(), std::uint8_t{1});
  SolverConfig cfg;
  ScalarField phi = solve_ma(mask, f, nullptr, cfg);
  double worst = 0.0;
  for (NodeId id : mask->interior)
    worst = std::max(worst,
                     std::abs(phi[id] - (1.0 + eps) * (sq_norm(g->point(id)) - 1.0)));
  CHECK(worst < 10.0 * g->spacing * g->spacing);
}

TEST_CASE("barrier envelope for perturbed domains") {
  SolverConfig cfg;
  for (double gamma : {0.0, 0.05}) {
    GridPtr g = build_grid(1, 129, 1.1);
    ShapeFn shape = [gamma](const RPoint& p) {
      double r = std::sqrt(p[0] * p[0] + p[1] * p[1]);
      return r - (1.0 + 0.8 * gamma * std::sin(2.0 * std::atan2(p[1], p[0])));
    };
    DomainMaskPtr mask = gamma > 0.0 ? build_ball_domain(g, gamma, shape)
                                     : build_ball_domain(g, 0.0);
    ScalarField v0 = solve_reference(mask, cfg);
    double margin = 0.0;
    CHECK(barrier_check(v0, *mask, gamma, &margin));
    CHECK(margin >= 0.0);
  }
}

TEST_CASE("comparison envelope across the epsilon sweep") {
  GridPtr g = build_grid(1, 129, 1.1);
  DomainMaskPtr mask = build_ball_domain(g, 0.0);
  SolverConfig cfg;
  ScalarField v0 = solve_reference(mask, cfg);
  for (double eps : {0.0, 0.05, 0.1}) {
    ScalarField f = sample_field(g, [eps](const RPoint& p) {
      return 1.0 + eps * std::cos(2.0 * p[0]) * std::cos(1.5 * p[1]);
    });
    ScalarField phi = solve_ma(mask, f, nullptr, cfg);
    ComparisonReport rep = comparison_check(phi, v0, *mask, eps);
    INFO("eps = ", eps, " violations = ", rep.violations);
    CHECK(rep.ok());
  }
}

TEST_CASE("solver output is deterministic") {
  GridPtr g = build_grid(1, 65, 1.1);
  DomainMaskPtr mask = build_ball_domain(g, 0.0);
  ScalarField f = sample_field(g, [](const RPoint& p) { return 1.0 + 0.05 * p[0]; });
  SolverConfig cfg;
  ScalarField a = solve_ma(mask, f, nullptr, cfg);
  ScalarField b = solve_ma(mask, f, nullptr, cfg);
  for (NodeId id : mask->interior) CHECK(a[id] == b[id]);
}

TEST_CASE("iterates stay plurisubharmonic and residuals decrease") {
  GridPtr g = build_grid(1, 65, 1.1);
  DomainMaskPtr mask = build_ball_domain(g, 0.0);
  ScalarField f = sample_field(g, [](const RPoint& p) {
    return 1.0 + 0.1 * std::cos(3.0 * p[0]);
  });
  SolverConfig cfg;
  NewtonReport rep;
  ScalarField phi = solve_ma(mask, f, nullptr, cfg, &rep);
  CHECK(rep.converged);
  CHECK(rep.min_eigenvalue > 0.0);
  REQUIRE(!rep.residual_history.empty());
  CHECK(rep.residual_history.back() <= cfg.newton_tol);
}

TEST_CASE("nonzero Dirichlet data is honored at the crossings") {
  GridPtr g = build_grid(1, 129, 1.1);
  DomainMaskPtr mask = build_ball_domain(g, 0.0);
  // with bc = |z|^2 - 1 + c the solution is the model quadratic shifted by c
  double c = 0.7;
  BoundaryFn bc = [c](const RPoint& p) {
    return p[0] * p[0] + p[1] * p[1] - 1.0 + c;
  };
  ScalarField f(g, 1.0);
  std::fill(f.defined.begin(), f.defined.end(), std::uint8_t{1});
  SolverConfig cfg;
  ScalarField phi = solve_ma(mask, f, bc, cfg);
  double worst = 0.0;
  for (NodeId id : mask->interior)
    worst = std::max(worst, std::abs(phi[id] - (sq_norm(g->point(id)) - 1.0 + c)));
  CHECK(worst < 10.0 * g->spacing * g->spacing);
}
