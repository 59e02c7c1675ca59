#include "cmalab/cz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace cmalab {

namespace {

double set_density(const MAMeasure& measure, const std::vector<NodeId>& members,
                   const std::unordered_set<NodeId>& a_set) {
  std::vector<NodeId> hit;
  hit.reserve(members.size());
  for (NodeId id : members)
    if (a_set.count(id)) hit.push_back(id);
  double denom = measure.integrate(members);
  return denom > 0.0 ? measure.integrate(hit) / denom : 0.0;
}

int generation_of(double t) {
  // t in (2^{-k-1}, 2^{-k}] -> k; nudge so exact powers of two land on k
  return static_cast<int>(std::floor(-std::log2(t) - 1e-12));
}

}  // namespace

StoppingHeight stopping_height(const ScalarField& phi, const DomainMask& mask,
                               const MAMeasure& measure, NodeId x,
                               const std::vector<NodeId>& A, double delta, double mu0) {
  const Grid& g = *mask.grid;
  const double h = g.spacing;
  const double floor_t = 100.0 * h * h;
  const double top = std::pow(mu0, 4.0);
  if (!(top > floor_t))
    throw std::invalid_argument("stopping_height: mu0^4 is below the grid floor");

  PluriharmonicPoly poly = pluriharmonic_at(phi, x);
  const double pc = phi[x];
  std::unordered_set<NodeId> a_set(A.begin(), A.end());
  auto density_at = [&](double t) {
    return set_density(measure, section_members(phi, mask, poly, pc, x, t), a_set);
  };

  StoppingHeight out;

  // hypothesis (2): density stays below delta throughout (mu0^4, mu0^3]
  const double band_top = std::pow(mu0, 3.0);
  for (int j = 0; j <= 8; ++j) {
    double t = band_top * std::pow(top / band_top, j / 8.0);
    if (t <= top * (1.0 + 1e-12)) break;
    if (density_at(t) >= delta) {
      out.marker = CZMarker::hypothesis_fails;
      return out;
    }
  }

  // descending scan for the first height meeting the density target; no
  // monotonicity is assumed, the first crossing from above wins
  const double ratio = 0.85;
  double t_above = band_top * std::pow(top / band_top, 7.0 / 8.0);
  double d_above = 0.0;
  double t_hit = -1.0;
  for (double t = top; t > floor_t; t *= ratio) {
    double d = density_at(t);
    if (d >= delta) {
      t_hit = t;
      out.density_at_t = d;
      break;
    }
    t_above = t;
    d_above = d;
  }
  if (t_hit < 0.0) {
    out.marker = CZMarker::below_floor;
    return out;
  }

  // bisect (t_hit, t_above) to one height-resolution step, keeping the
  // largest height still meeting the target
  double lo = t_hit, hi = std::min(t_above, top);
  while (hi - lo > h * h) {
    double mid = 0.5 * (lo + hi);
    double d = density_at(mid);
    if (d >= delta) {
      lo = mid;
      out.density_at_t = d;
    } else {
      hi = mid;
      d_above = d;
    }
  }
  out.t = lo;
  out.density_above = d_above;
  return out;
}

Subfamily select_subfamily(const ScalarField& phi, const DomainMask& mask,
                           const std::map<NodeId, double>& heights,
                           const std::vector<NodeId>& A, double eps2) {
  Subfamily fam;
  if (heights.empty()) return fam;

  // bucket candidates by generation, largest heights first; ties in node order
  std::map<int, std::vector<std::pair<NodeId, double>>> bands;
  for (const auto& [id, t] : heights) bands[generation_of(t)].push_back({id, t});

  for (const auto& [gen, cands] : bands) {
    for (const auto& [id, t] : cands) {
      bool covered = false;
      for (const CoveredSection& cs : fam.sections)
        if (cs.section.contains_node(id)) {
          covered = true;
          break;
        }
      if (covered) continue;
      CoveredSection cs;
      cs.generation = gen;
      try {
        cs.section = build_section(phi, mask, id, t);
      } catch (const std::exception&) {
        continue;  // unresolvable at this height; candidate dropped
      }
      fam.sections.push_back(std::move(cs));
    }
  }

  // overlap histogram of the (1-eps2)-shrunk family
  std::unordered_map<NodeId, std::size_t> counts;
  for (const CoveredSection& cs : fam.sections) {
    const Section& s = cs.section;
    std::vector<NodeId> shrunk = section_members(phi, mask, s.poly, s.phi_center, s.center,
                                                 (1.0 - eps2) * s.t);
    for (NodeId id : shrunk) ++counts[id];
  }
  for (const auto& [id, c] : counts) fam.max_overlap = std::max(fam.max_overlap, c);
  fam.overlap_profile.assign(fam.max_overlap + 1, 0);
  for (const auto& [id, c] : counts) ++fam.overlap_profile[c];
  fam.fitted_K = static_cast<double>(fam.max_overlap) / std::log(1.0 / eps2);

  // residual: A-nodes outside the union of the full sections
  std::unordered_set<NodeId> covered;
  for (const CoveredSection& cs : fam.sections)
    covered.insert(cs.section.members.begin(), cs.section.members.end());
  for (NodeId id : A)
    if (!covered.count(id)) fam.residual.push_back(id);
  return fam;
}

CZCover cz_decompose(const ScalarField& phi, const DomainMask& mask, const MAMeasure& measure,
                     const std::vector<NodeId>& A, const CZParams& params) {
  CZCover cover;
  cover.params = params;
  const double lambda_x = 1.0 + params.C * std::sqrt(params.sigma);
  const double cap = std::pow(params.mu0, 3.0);

  std::map<NodeId, double> nu;            // inflated heights for selection
  std::map<NodeId, StoppingHeight> stops;
  for (NodeId x : A) {
    if (!mask.is_interior(x) || !phi.is_defined(x)) continue;
    StoppingHeight sh = stopping_height(phi, mask, measure, x, A, params.delta, params.mu0);
    switch (sh.marker) {
      case CZMarker::hypothesis_fails:
        cover.non_cz_points.push_back(x);
        break;
      case CZMarker::below_floor:
        cover.floor_points.push_back(x);
        break;
      case CZMarker::ok:
        nu[x] = std::min(lambda_x * sh.t, cap);
        stops[x] = sh;
        break;
    }
  }

  Subfamily fam = select_subfamily(phi, mask, nu, A, params.eps2);
  cover.overlap_profile = std::move(fam.overlap_profile);
  cover.max_overlap = fam.max_overlap;
  cover.fitted_K = fam.fitted_K;
  for (CoveredSection& cs : fam.sections) {
    const StoppingHeight& sh = stops.at(cs.section.center);
    cs.t_x = sh.t;
    cs.density = sh.density_at_t;
    cover.sections.push_back(std::move(cs));
  }

  std::unordered_set<NodeId> covered;
  for (const CoveredSection& cs : cover.sections)
    covered.insert(cs.section.members.begin(), cs.section.members.end());
  std::vector<NodeId> union_nodes(covered.begin(), covered.end());
  std::vector<NodeId> missed;
  for (NodeId id : A)
    if (!covered.count(id)) missed.push_back(id);
  double mu_union = measure.integrate(union_nodes);
  double mu_a = measure.integrate(A);
  cover.delta0 = mu_union > 0.0 ? mu_a / mu_union : 0.0;
  cover.uncovered_fraction = mu_a > 0.0 ? measure.integrate(missed) / mu_a : 0.0;
  return cover;
}

DensityLimitReport density_limit_check(const ScalarField& phi, const DomainMask& mask,
                                       const MAMeasure& measure, const std::vector<NodeId>& A,
                                       NodeId x, double mu0) {
  const Grid& g = *mask.grid;
  const double floor_t = 100.0 * g.spacing * g.spacing;
  if (std::find(A.begin(), A.end(), x) == A.end())
    throw std::invalid_argument("density_limit_check: x is not in A");

  PluriharmonicPoly poly = pluriharmonic_at(phi, x);
  const double pc = phi[x];
  std::unordered_set<NodeId> a_set(A.begin(), A.end());

  DensityLimitReport rep;
  for (double t = mu0; t > floor_t; t *= 0.8) {
    rep.heights.push_back(t);
    rep.densities.push_back(
        set_density(measure, section_members(phi, mask, poly, pc, x, t), a_set));
  }
  if (rep.densities.size() >= 3) {
    double tail = (rep.densities.end()[-1] + rep.densities.end()[-2] + rep.densities.end()[-3]) / 3.0;
    rep.trends_to_one = tail >= 0.9;
    rep.isolated = tail <= 0.1;
  }
  return rep;
}

}  // namespace cmalab
