// Calderon-Zygmund decomposition: stopping heights, subfamily selection,
// coverage/density audits on synthetic sets, and determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "cmalab/cz.hpp"
#include "cmalab/ma_solver.hpp"

using namespace cmalab;

namespace {

struct Lab {
  GridPtr grid;
  DomainMaskPtr mask;
  ScalarField phi;
  MAMeasure measure;
};

Lab& solved_lab() {
  static Lab lab = [] {
    Lab l;
    l.grid = build_grid(1, 257, 1.1);
    l.mask = build_ball_domain(l.grid, 0.0);
    ScalarField f = sample_field(l.grid, [](const RPoint& p) {
      double r2 = p[0] * p[0] + p[1] * p[1];
      return 1.0 + 0.05 * std::cos(2.0 * r2);
    });
    SolverConfig cfg;
    l.phi = solve_ma(l.mask, f, nullptr, cfg);
    l.measure = MAMeasure::from_density(ma_density(complex_hessian(l.phi)));
    return l;
  }();
  return lab;
}

std::vector<NodeId> nodes_where(const Lab& lab, const std::function<bool(const RPoint&)>& pred) {
  std::vector<NodeId> out;
  for (NodeId id : lab.mask->interior)
    if (pred(lab.grid->point(id))) out.push_back(id);
  return out;
}

double d2(const RPoint& p, double cx, double cy) {
  return (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy);
}

/// The five synthetic acceptance sets.
std::map<std::string, std::vector<NodeId>> synthetic_sets(const Lab& lab) {
  std::map<std::string, std::vector<NodeId>> sets;
  sets["ball"] = nodes_where(lab, [](const RPoint& p) { return d2(p, 0.0, 0.0) <= 0.15 * 0.15; });
  sets["half_ball"] =
      nodes_where(lab, [](const RPoint& p) { return d2(p, 0.0, 0.0) <= 0.04 && p[0] >= 0.0; });
  sets["two_balls"] = nodes_where(lab, [](const RPoint& p) {
    return d2(p, -0.25, 0.0) <= 0.01 || d2(p, 0.25, 0.1) <= 0.01;
  });
  sets["annulus"] = nodes_where(lab, [](const RPoint& p) {
    double r2 = d2(p, 0.0, 0.0);
    return r2 >= 0.04 && r2 <= 0.09;
  });
  // a quantile band of the potential inside B_{1/2}: a curved strip thick
  // enough to resolve stopping heights yet thin enough for hypothesis (2)
  {
    const Lab& l = lab;
    std::vector<double> vals;
    for (NodeId id : l.mask->interior)
      if (d2(l.grid->point(id), 0.0, 0.0) <= 0.25) vals.push_back(l.phi[id]);
    std::sort(vals.begin(), vals.end());
    double lo = vals[vals.size() / 4];
    double hi = vals[(vals.size() * 11) / 20];
    sets["level_set"] = nodes_where(l, [&](const RPoint& p) {
      NodeId id = l.grid->snap(p);
      return d2(p, 0.0, 0.0) <= 0.25 && l.phi[id] >= lo && l.phi[id] <= hi;
    });
  }
  return sets;
}

}  // namespace

TEST_CASE("stopping height: density at t_x meets delta, hypothesis band is clean") {
  Lab& lab = solved_lab();
  // a set small enough that the density stays below delta on the hypothesis
  // band (mu0^4, mu0^3] yet crosses delta above the grid floor
  auto A = nodes_where(lab, [](const RPoint& p) { return d2(p, 0.3, 0.0) <= 0.1 * 0.1; });
  NodeId x = lab.grid->snap({0.3, 0.0, 0.0, 0.0});
  CZParams prm;
  StoppingHeight sh = stopping_height(lab.phi, *lab.mask, lab.measure, x, A, prm.delta, prm.mu0);
  REQUIRE(sh.marker == CZMarker::ok);
  CHECK(sh.t > 0.0);
  CHECK(sh.t <= std::pow(prm.mu0, 4.0) + 1e-12);
  CHECK(sh.density_at_t >= prm.delta);
  CHECK(sh.density_above < prm.delta);

  // a point far from A has density < delta at every admissible height
  NodeId far = lab.grid->snap({-0.3, 0.2, 0.0, 0.0});
  StoppingHeight miss =
      stopping_height(lab.phi, *lab.mask, lab.measure, far, A, prm.delta, prm.mu0);
  CHECK(miss.marker != CZMarker::ok);
}

TEST_CASE("decomposition covers the synthetic sets with controlled overlap") {
  Lab& lab = solved_lab();
  CZParams prm;
  for (auto& [name, A] : synthetic_sets(lab)) {
    INFO("set = ", name, " |A| = ", A.size());
    REQUIRE(A.size() > 50);
    CZCover cover = cz_decompose(lab.phi, *lab.mask, lab.measure, A, prm);
    CHECK(cover.delta0 <= 0.98);
    CHECK(cover.uncovered_fraction <= 0.02);
    CHECK(!cover.sections.empty());
    CHECK(cover.max_overlap >= 1);
    CHECK(cover.fitted_K ==
          doctest::Approx(cover.max_overlap / std::log(1.0 / prm.eps2)).epsilon(1e-12));
    // histogram accounts for every covered node
    std::size_t hist_total = 0;
    for (std::size_t c = 1; c < cover.overlap_profile.size(); ++c)
      hist_total += cover.overlap_profile[c];
    CHECK(hist_total > 0);

    // generations match the inflated heights
    for (const CoveredSection& cs : cover.sections) {
      CHECK(cs.section.t >= cs.t_x - 1e-12);
      int g = cs.generation;
      CHECK(cs.section.t <= std::pow(2.0, -g) + 1e-12);
      CHECK(cs.section.t > std::pow(2.0, -g - 1) - 1e-12);
    }
  }
}

TEST_CASE("brute-force audit: reported members and densities are faithful") {
  Lab& lab = solved_lab();
  CZParams prm;
  auto A = synthetic_sets(lab)["half_ball"];
  CZCover cover = cz_decompose(lab.phi, *lab.mask, lab.measure, A, prm);
  REQUIRE(!cover.sections.empty());

  std::set<NodeId> a_set(A.begin(), A.end());
  for (const CoveredSection& cs : cover.sections) {
    // recompute the member set independently
    Section again = build_section(lab.phi, *lab.mask, cs.section.center, cs.section.t);
    CHECK(again.members == cs.section.members);

    // recompute the density at the stopping height
    PluriharmonicPoly poly = pluriharmonic_at(lab.phi, cs.section.center);
    std::vector<NodeId> at_tx = section_members(lab.phi, *lab.mask, poly,
                                                lab.phi[cs.section.center], cs.section.center,
                                                cs.t_x);
    std::vector<NodeId> inter;
    for (NodeId id : at_tx)
      if (a_set.count(id)) inter.push_back(id);
    double density = lab.measure.integrate(inter) / lab.measure.integrate(at_tx);
    CHECK(density == doctest::Approx(cs.density).epsilon(1e-9));
    CHECK(density >= prm.delta - 1e-9);
  }

  // coverage audit: union of full sections against the reported residual
  std::set<NodeId> covered;
  for (const CoveredSection& cs : cover.sections)
    covered.insert(cs.section.members.begin(), cs.section.members.end());
  std::vector<NodeId> missed;
  for (NodeId id : A)
    if (!covered.count(id)) missed.push_back(id);
  double missed_frac = lab.measure.integrate(missed) / lab.measure.integrate(A);
  CHECK(missed_frac == doctest::Approx(cover.uncovered_fraction).epsilon(1e-9));
}

TEST_CASE("decomposition is deterministic") {
  Lab& lab = solved_lab();
  CZParams prm;
  auto A = synthetic_sets(lab)["two_balls"];
  CZCover c1 = cz_decompose(lab.phi, *lab.mask, lab.measure, A, prm);
  CZCover c2 = cz_decompose(lab.phi, *lab.mask, lab.measure, A, prm);
  REQUIRE(c1.sections.size() == c2.sections.size());
  for (std::size_t i = 0; i < c1.sections.size(); ++i) {
    CHECK(c1.sections[i].section.center == c2.sections[i].section.center);
    CHECK(c1.sections[i].t_x == c2.sections[i].t_x);
    CHECK(c1.sections[i].section.members == c2.sections[i].section.members);
  }
  CHECK(c1.delta0 == c2.delta0);
  CHECK(c1.fitted_K == c2.fitted_K);
}

TEST_CASE("density limit: deep points trend to one, far points are isolated") {
  Lab& lab = solved_lab();
  auto A = synthetic_sets(lab)["ball"];
  CZParams prm;
  NodeId deep = lab.grid->count() / 2;  // center of the ball set
  DensityLimitReport inside =
      density_limit_check(lab.phi, *lab.mask, lab.measure, A, deep, prm.mu0);
  CHECK(inside.trends_to_one);
  CHECK(!inside.isolated);

  // an isolated A-node far from the bulk: density decays toward zero
  NodeId lone = lab.grid->snap({-0.3, 0.0, 0.0, 0.0});
  A.push_back(lone);
  std::sort(A.begin(), A.end());
  DensityLimitReport outside =
      density_limit_check(lab.phi, *lab.mask, lab.measure, A, lone, prm.mu0);
  CHECK(outside.isolated);
  CHECK(!outside.trends_to_one);
}
