#include "cmalab/harnack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmalab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<NodeId> members_at(const ScalarField& phi, const DomainMask& mask, NodeId x0,
                               double t) {
  PluriharmonicPoly poly = pluriharmonic_at(phi, x0);
  return section_members(phi, mask, poly, phi[x0], x0, t);
}

std::pair<double, double> sup_inf(const ScalarField& u, const std::vector<NodeId>& set) {
  double sup = -kInf, inf = kInf;
  for (NodeId id : set)
    if (u.is_defined(id)) {
      sup = std::max(sup, u[id]);
      inf = std::min(inf, u[id]);
    }
  if (!(sup >= inf)) throw std::runtime_error("sup_inf: no defined nodes in the set");
  return {sup, inf};
}

std::vector<NodeId> ball_nodes(const DomainMask& mask, const RPoint& c, double r) {
  const Grid& g = *mask.grid;
  std::vector<NodeId> out;
  for (NodeId id : mask.interior) {
    RPoint p = g.point(id);
    double d2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) d2 += (p[a] - c[a]) * (p[a] - c[a]);
    if (d2 <= r * r) out.push_back(id);
  }
  return out;
}

}  // namespace

CriticalDensityTable critical_density(const ScalarField& u, const ScalarField& phi,
                                      const DomainMask& mask, const MAMeasure& measure, NodeId x0,
                                      double t) {
  auto big = members_at(phi, mask, x0, t);
  auto half = members_at(phi, mask, x0, 0.5 * t);
  auto [sup_h, inf_h] = sup_inf(u, half);
  (void)sup_h;
  if (!(inf_h > 0.0))
    throw std::invalid_argument("critical_density: inf over S_{t/2} must be positive");

  CriticalDensityTable tab;
  tab.rescale = inf_h;
  tab.levels = {2, 4, 8, 16, 32, 64};
  double mu_s = measure.integrate(big);
  for (double M : tab.levels) {
    std::vector<NodeId> over;
    for (NodeId id : big)
      if (u.is_defined(id) && u[id] / tab.rescale > M) over.push_back(id);
    tab.fractions.push_back(mu_s > 0.0 ? measure.integrate(over) / mu_s : 0.0);
  }
  tab.lambdas = {0.5, 0.75, 0.9};
  for (double lam : tab.lambdas) {
    double m1 = kInf;
    for (std::size_t i = 0; i < tab.levels.size(); ++i)
      if (tab.fractions[i] < lam) {
        m1 = tab.levels[i];
        break;
      }
    tab.m1.push_back(m1);
  }
  return tab;
}

double inf_propagation(const ScalarField& u, const ScalarField& phi, const DomainMask& mask,
                       NodeId x0, double t) {
  members_at(phi, mask, x0, 4.0 * t);  // throws if S_{4t} escapes the domain
  auto [s1, inf_t] = sup_inf(u, members_at(phi, mask, x0, t));
  auto [s2, inf_2t] = sup_inf(u, members_at(phi, mask, x0, 2.0 * t));
  (void)s1;
  (void)s2;
  if (!(inf_2t > 0.0)) throw std::invalid_argument("inf_propagation: u must be positive");
  return inf_t / inf_2t;
}

LevelSetDecay level_set_decay(const ScalarField& u, const ScalarField& phi, const DomainMask& mask,
                              const MAMeasure& measure, NodeId z0, double K, double M, double mu0,
                              double Cball) {
  const Grid& g = *mask.grid;
  auto base_section = members_at(phi, mask, z0, std::pow(mu0, 3.0));
  auto [bs, binf] = sup_inf(u, base_section);
  (void)bs;
  if (!(binf > 0.0)) throw std::invalid_argument("level_set_decay: u must be positive");
  const double scale = std::max(binf, 1e-300);  // normalize inf over S_{mu0^3} to 1

  LevelSetDecay out;
  out.inf_section = 1.0;
  RPoint c = g.point(z0);
  const double r0 = mu0 * mu0 / Cball;

  // S_k = B_{r0 (1 - sum_{j=1..k} 2^{-j-1})}; S_0 is the full ball
  auto radius_k = [&](int k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += std::pow(2.0, -j - 1);
    return r0 * (1.0 - s);
  };
  auto level_count = [&](int k, int ball_idx) {
    double thresh = K * std::pow(M, k) * scale;
    std::vector<NodeId> hit;
    for (NodeId id : ball_nodes(mask, c, radius_k(ball_idx)))
      if (u.is_defined(id) && u[id] >= thresh) hit.push_back(id);
    return measure.integrate(hit);
  };

  if (level_count(1, 0) <= 0.0) {
    out.trivial = true;  // u never reaches K*M: decay is vacuous
    return out;
  }
  for (int k = 1; k <= 12; ++k) {
    double denom = level_count(k, k - 1);
    if (denom <= 0.0) break;
    double numer = level_count(k + 1, k);
    out.ratios.push_back(numer / denom);
    if (numer <= 0.0) break;
  }
  out.delta0 = 0.0;
  for (double r : out.ratios) out.delta0 = std::max(out.delta0, r);
  if (out.delta0 <= 0.0) out.delta0 = 1e-3;  // level sets died immediately
  if (out.delta0 < 1.0) {
    // largest admissible exponent is -log(delta0)/log(M); take half for margin
    out.p = -std::log(out.delta0) / (2.0 * std::log(M));
  }
  // L^p norm of the normalized u over the base ball
  if (out.p > 0.0) {
    double acc = 0.0;
    auto base = ball_nodes(mask, c, r0);
    for (NodeId id : base)
      if (u.is_defined(id)) acc += std::pow(u[id] / scale, out.p) * measure.cell_weight;
    out.lp_norm = std::pow(acc, 1.0 / out.p);
    out.C = out.lp_norm / out.inf_section;
  }
  return out;
}

SupBoundReport local_sup_bound(const ScalarField& u, const ScalarField& lambda_field,
                               const DomainMask& mask, double eps5, double p) {
  const Grid& g = *mask.grid;
  RPoint origin{};
  SupBoundReport rep;
  double acc = 0.0, lacc = 0.0;
  const double cell = std::pow(g.spacing, g.dim());
  for (NodeId id : ball_nodes(mask, origin, 1.0)) {
    if (u.is_defined(id)) acc += std::pow(std::abs(u[id]), eps5) * cell;
    if (lambda_field.is_defined(id)) lacc += std::pow(std::abs(lambda_field[id]), p) * cell;
  }
  rep.norm_eps5 = std::pow(acc, 1.0 / eps5);
  rep.lambda_p_norm = std::pow(lacc, 1.0 / p);
  auto [sup_h, inf_h] = sup_inf(u, ball_nodes(mask, origin, 0.5));
  (void)inf_h;
  rep.sup_half = sup_h;
  rep.C = rep.norm_eps5 > 0.0 ? rep.sup_half / rep.norm_eps5 : 0.0;
  return rep;
}

HarnackReport harnack_all_scales(const ScalarField& u, const ScalarField& phi,
                                 const DomainMask& mask, const std::vector<NodeId>& centers,
                                 const std::vector<double>& heights, double mu0, double C0) {
  HarnackReport rep;
  rep.mu0 = mu0;
  rep.C0 = C0;
  rep.band_top = std::pow(mu0, 5.0) / C0;

  double t_min_seen = kInf;
  for (NodeId c : centers)
    for (double t : heights) {
      HarnackRow row;
      row.center = c;
      row.t = t;
      try {
        // the theorem's hypothesis: u is a nonnegative solution on a
        // neighborhood of the section; we require u >= 0 on S_{2t}
        auto [sup2, inf2] = sup_inf(u, members_at(phi, mask, c, 2.0 * t));
        (void)sup2;
        if (inf2 < 0.0) throw std::runtime_error("u negative on the engulfing section");
        auto [sup, inf] = sup_inf(u, members_at(phi, mask, c, t));
        row.sup = sup;
        row.inf = inf;
        if (inf > 0.0) {
          row.ratio = sup / inf;
          t_min_seen = std::min(t_min_seen, t);
        } else {
          row.inf_zero = true;
        }
      } catch (const std::exception& e) {
        row.skipped = true;
        row.reason = e.what();
      }
      rep.rows.push_back(std::move(row));
    }

  if (t_min_seen == kInf) return rep;
  if (rep.band_top < t_min_seen) {
    // the paper's target band is below the grid floor; report on the lowest
    // reachable one instead
    rep.band_top = 2.0 * t_min_seen;
    rep.band_adjusted = true;
  }
  for (const HarnackRow& row : rep.rows)
    if (!row.skipped && !row.inf_zero && row.t <= rep.band_top)
      rep.beta = std::max(rep.beta, row.ratio);
  return rep;
}

HolderFit oscillation_decay(const ScalarField& u, const ScalarField& phi, const DomainMask& mask,
                            NodeId z, double t0, double tau, int levels) {
  const Grid& g = *mask.grid;
  const double floor_t = 100.0 * g.spacing * g.spacing;
  HolderFit fit;
  fit.tau = tau;
  for (int k = 0; k < levels; ++k) {
    double t = t0 * std::pow(tau, k);
    if (t <= floor_t) break;
    std::vector<NodeId> set;
    try {
      set = members_at(phi, mask, z, t);
    } catch (const std::exception&) {
      break;
    }
    if (set.size() < 5) break;
    auto [sup, inf] = sup_inf(u, set);
    fit.osc.push_back(sup - inf);  // shift u -> u - inf u drops out of osc
  }
  if (fit.osc.size() < 3) throw std::runtime_error("oscillation_decay: insufficient scale range");

  // log-linear least squares: log osc_k = log C + k log rho
  const int m = static_cast<int>(fit.osc.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < m; ++k) {
    double y = std::log(std::max(fit.osc[static_cast<std::size_t>(k)], 1e-300));
    sx += k;
    sy += y;
    sxx += static_cast<double>(k) * k;
    sxy += k * y;
  }
  double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double icept = (sy - slope * sx) / m;
  fit.rho = std::exp(slope);
  fit.C = std::exp(icept);
  // exponent against the length scale sqrt(t): osc ~ r^alpha with r ~ tau^{k/2}
  fit.alpha = 2.0 * slope / std::log(tau);
  double rss = 0.0;
  for (int k = 0; k < m; ++k) {
    double y = std::log(std::max(fit.osc[static_cast<std::size_t>(k)], 1e-300));
    double e = y - (icept + slope * k);
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / m);
  fit.ok = fit.rho < 1.0;
  return fit;
}

StrongerDensityReport stronger_critical_density(const ScalarField& u, const ScalarField& phi,
                                                const DomainMask& mask, const MAMeasure& measure,
                                                NodeId x0, double t, double alpha, double lambda,
                                                double M1, double L) {
  members_at(phi, mask, x0, 4.0 * t);  // solution hypothesis needs S_{4t} inside
  auto set = members_at(phi, mask, x0, t);
  std::vector<NodeId> over;
  for (NodeId id : set)
    if (u.is_defined(id) && u[id] > alpha) over.push_back(id);
  StrongerDensityReport rep;
  double mu_s = measure.integrate(set);
  rep.hypothesis_fraction = mu_s > 0.0 ? measure.integrate(over) / mu_s : 0.0;
  if (rep.hypothesis_fraction < lambda) {
    rep.vacuous = true;
    return rep;
  }
  auto [sup, inf] = sup_inf(u, set);
  (void)sup;
  rep.inf_t = inf;
  rep.bound = alpha / (M1 * L * L);
  rep.holds = inf >= rep.bound;
  return rep;
}

bool height_bound_check(double h, double t, double alpha, double theta, double M0, double L,
                        double delta) {
  return h <= theta * t * std::pow(M0 * L / alpha, 1.0 / delta);
}

Alpha6Report alpha6_diagnostic(const ScalarField& phi_norm, const ScalarField& u_norm) {
  Alpha6Report rep;
  rep.phi_max_on_half = -kInf;
  rep.combo_min = kInf;
  const NodeId total = phi_norm.grid->count();
  for (NodeId id = 0; id < total; ++id) {
    if (!phi_norm.is_defined(id) || phi_norm[id] > -0.5) continue;  // outside S_{1/2}
    rep.phi_max_on_half = std::max(rep.phi_max_on_half, phi_norm[id]);
    if (u_norm.is_defined(id))
      rep.combo_min = std::min(rep.combo_min, u_norm[id] + 6.0 * phi_norm[id]);
  }
  rep.phi_bound_holds = rep.phi_max_on_half <= -1.0 / 3.0 + 1e-9;
  rep.combo_reaches = rep.combo_min <= -1.0;
  return rep;
}

}  // namespace cmalab
