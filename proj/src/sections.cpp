#include "cmalab/sections.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace cmalab {

namespace {

double hermitian_form(const CMat& a, const CPoint& dz, int n) {
  Cplx acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      acc += a(i, j) * dz[static_cast<std::size_t>(i)] * std::conj(dz[static_cast<std::size_t>(j)]);
  return acc.real();
}

CPoint cdiff(const CPoint& z, const CPoint& x0) {
  return {z[0] - x0[0], z[1] - x0[1]};
}

CMat hermitian_sqrt_inv(const CMat& a, int n) {
  if (n == 1) {
    CMat out = CMat::Identity();
    out(0, 0) = 1.0 / std::sqrt(a(0, 0).real());
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(a.topLeftCorner(2, 2));
  Eigen::Vector2d ev = es.eigenvalues();
  Eigen::Matrix2cd D = Eigen::Matrix2cd::Zero();
  D(0, 0) = 1.0 / std::sqrt(ev[0]);
  D(1, 1) = 1.0 / std::sqrt(ev[1]);
  CMat out = CMat::Identity();
  out.topLeftCorner(2, 2) = es.eigenvectors() * D * es.eigenvectors().adjoint();
  return out;
}

}  // namespace

double Section::ellipsoid_radius(const CPoint& z) const {
  CPoint dz = cdiff(z, x0);
  return std::sqrt(std::max(hermitian_form(ellipsoid, dz, poly.n), 0.0) / t);
}

EllipsoidFit fit_ellipsoid(const ScalarField& phi, const DomainMask& mask,
                           const std::vector<NodeId>& members, NodeId x0, double t) {
  const Grid& g = *mask.grid;
  const int n = g.n;
  const std::size_t min_members = static_cast<std::size_t>(std::pow(5.0, 2 * n));
  if (members.size() < min_members)
    throw std::invalid_argument("fit_ellipsoid: too few member nodes");
  CPoint zc = to_complex(g.point(x0));

  // complex second moments about the center
  CMat M = CMat::Zero();
  for (NodeId id : members) {
    CPoint dz = cdiff(to_complex(g.point(id)), zc);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        M(i, j) += dz[static_cast<std::size_t>(i)] * std::conj(dz[static_cast<std::size_t>(j)]);
  }
  M /= static_cast<double>(members.size());
  double detM = hermitian_det(M, n);
  if (!(detM > 1e-300)) throw std::runtime_error("fit_ellipsoid: degenerate moment matrix");

  EllipsoidFit fit;
  fit.a = CMat::Identity();
  if (n == 1) {
    fit.a(0, 0) = 1.0 / M(0, 0).real();
  } else {
    fit.a.topLeftCorner(2, 2) = M.topLeftCorner(2, 2).inverse().eval();
  }
  double deta = hermitian_det(fit.a, n);
  double norm = std::pow(deta, 1.0 / n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fit.a(i, j) /= norm;

  // exhaustive sigma scan: members may stick out of E, lattice points of
  // (1 - sigma)E must be members
  std::unordered_set<NodeId> member_set(members.begin(), members.end());
  double sigma_out = 0.0;
  for (NodeId id : members) {
    CPoint dz = cdiff(to_complex(g.point(id)), zc);
    double r = std::sqrt(std::max(hermitian_form(fit.a, dz, n), 0.0) / t);
    sigma_out = std::max(sigma_out, r - 1.0);
  }
  // scan the bounding box of 1.5 E
  double lam_min = n == 1 ? fit.a(0, 0).real() : hermitian_min_eig(fit.a, n);
  double reach = 1.5 * std::sqrt(t / lam_min);
  IdxVec cix = g.coords(x0);
  int span = static_cast<int>(std::ceil(reach / g.spacing)) + 1;
  double rho_min = 1.5;
  const int d = g.dim();
  IdxVec ix{};
  std::function<void(int)> scan = [&](int axis) {
    if (axis == d) {
      if (!g.in_bounds(ix)) return;
      NodeId id = g.index(ix);
      if (member_set.count(id)) return;
      CPoint dz = cdiff(to_complex(g.point(id)), zc);
      double r = std::sqrt(std::max(hermitian_form(fit.a, dz, n), 0.0) / t);
      if (r < rho_min) rho_min = r;
      return;
    }
    for (int k = cix[axis] - span; k <= cix[axis] + span; ++k) {
      ix[axis] = k;
      scan(axis + 1);
    }
  };
  scan(0);
  (void)phi;
  fit.sigma_achieved = std::max({sigma_out, 1.0 - rho_min, 0.0});
  return fit;
}

std::vector<NodeId> section_members(const ScalarField& phi, const DomainMask& mask,
                                    const PluriharmonicPoly& poly, double phi_center, NodeId x0,
                                    double t) {
  const Grid& g = *mask.grid;
  auto excess = [&](NodeId id) { return phi[id] - poly.eval(g.point(id)) - phi_center - t; };
  if (excess(x0) > 0.0)
    throw std::runtime_error("build_section: center excluded from its own sublevel set");

  // connected component of the sublevel set through x0 (face adjacency)
  std::unordered_set<NodeId> seen{x0};
  std::deque<NodeId> queue{x0};
  std::vector<NodeId> members;
  while (!queue.empty()) {
    NodeId cur = queue.front();
    queue.pop_front();
    members.push_back(cur);
    for (int a = 0; a < g.dim(); ++a)
      for (int dir = -1; dir <= 1; dir += 2) {
        NodeId nb = g.neighbor(cur, a, dir);
        if (nb == kNoNode || mask.is_interior(nb)) {
          if (nb != kNoNode && !seen.count(nb) && phi.is_defined(nb) && excess(nb) <= 0.0) {
            seen.insert(nb);
            queue.push_back(nb);
          }
          continue;
        }
        // a member reaching the boundary ring means the sublevel set is
        // not compactly inside Omega
        throw std::runtime_error("build_section: section escapes domain (height too large)");
      }
  }
  std::sort(members.begin(), members.end());
  return members;
}

Section build_section(const ScalarField& phi, const DomainMask& mask, NodeId x0, double t) {
  const Grid& g = *mask.grid;
  const double h = g.spacing;
  if (!mask.is_interior(x0))
    throw std::invalid_argument("build_section: center is not an interior node");
  if (!(t > 100.0 * h * h))
    throw std::invalid_argument("build_section: height below grid floor");

  Section s;
  s.center = x0;
  s.x0 = to_complex(g.point(x0));
  s.t = t;
  s.poly = pluriharmonic_at(phi, x0);
  s.phi_center = phi[x0];
  s.members = section_members(phi, mask, s.poly, s.phi_center, x0, t);

  auto excess = [&](NodeId id) {
    return phi[id] - s.poly.eval(g.point(id)) - s.phi_center - t;
  };

  // count sublevel components not connected to x0 (they are dropped)
  std::unordered_set<NodeId> visited(s.members.begin(), s.members.end());
  for (NodeId id : mask.interior) {
    if (visited.count(id) || !phi.is_defined(id) || excess(id) > 0.0) continue;
    ++s.excluded_islands;
    std::deque<NodeId> q{id};
    visited.insert(id);
    while (!q.empty()) {
      NodeId cur = q.front();
      q.pop_front();
      for (int a = 0; a < g.dim(); ++a)
        for (int dir = -1; dir <= 1; dir += 2) {
          NodeId nb = g.neighbor(cur, a, dir);
          if (nb == kNoNode || visited.count(nb) || !mask.is_interior(nb)) continue;
          if (!phi.is_defined(nb) || excess(nb) > 0.0) continue;
          visited.insert(nb);
          q.push_back(nb);
        }
    }
  }

  const std::size_t floor_members = static_cast<std::size_t>(std::pow(5.0, 3 * g.n));
  if (s.members.size() < floor_members)
    throw std::runtime_error("build_section: height below grid floor (only " +
                             std::to_string(s.members.size()) + " member nodes)");

  EllipsoidFit fit = fit_ellipsoid(phi, mask, s.members, x0, t);
  s.ellipsoid = fit.a;
  s.sigma_achieved = fit.sigma_achieved;
  s.Tmap = hermitian_sqrt_inv(fit.a, g.n);
  return s;
}

ScalarField renormalize_section(const ScalarField& phi, const Section& section, GridPtr target) {
  const int n = target->n;
  AffineMap map;
  map.n = n;
  map.T = section.Tmap;
  map.x0 = section.x0;
  map.lambda = section.t;
  const double scale = section.t * std::pow(map.abs_det(), 2.0 / n);

  ScalarField out(target);
  const NodeId total = target->count();
  for (NodeId id = 0; id < total; ++id) {
    RPoint zp = target->point(id);
    double r2 = 0.0;
    for (int a = 0; a < target->dim(); ++a) r2 += zp[a] * zp[a];
    CPoint w = to_complex(zp);
    RPoint z = to_real(map.apply(w));
    double pv = 0.0;
    if (tricubic(phi, z, &pv)) {
      out.set(id, (pv - section.poly.eval(z) - section.phi_center - section.t) / scale);
    } else if (r2 <= 1.0 + 1e-12) {
      throw std::runtime_error("renormalize_section: image escapes domain at target node " +
                               std::to_string(id));
    }
  }
  return out;
}

EngulfingReport engulfing_check(const ScalarField& phi, const DomainMask& mask, const Section& s1,
                                const Section& s2) {
  const Grid& g = *mask.grid;
  EngulfingReport rep;

  bool intersect = false;
  for (NodeId id : s1.members)
    if (s2.contains_node(id)) {
      intersect = true;
      break;
    }
  if (!intersect) {
    rep.vacuous = true;
    return rep;
  }

  RPoint c2 = g.point(s2.center);
  double theta = 0.0;
  for (NodeId id : s1.members) {
    RPoint x = g.point(id);
    // 10-dilation about x2: x in 10 S2 iff x2 + (x - x2)/10 in S2
    RPoint y{};
    for (int a = 0; a < g.dim(); ++a) y[a] = c2[a] + (x[a] - c2[a]) / 10.0;
    double pv = 0.0;
    if (tricubic(phi, y, &pv)) {
      double gval = pv - s2.poly.eval(y) - s2.phi_center;
      if (gval > s2.t) {
        ++rep.violations;
        rep.contained = false;
        rep.worst_excess = std::max(rep.worst_excess, (gval - s2.t) / s2.t);
      }
    }
    // theta-form: height at which S_{theta t}(x2) swallows this member
    double gdirect = phi[id] - s2.poly.eval(x) - s2.phi_center;
    theta = std::max(theta, gdirect / s1.t);
  }
  rep.theta_required = theta;
  return rep;
}

DiameterReport diameter_check(const Section& section, const DomainMask& mask, double mu0,
                              double sigma, double C) {
  const Grid& g = *mask.grid;
  const int d = g.dim();
  RPoint c = g.point(section.center);
  DiameterReport rep;

  double r_out = 0.0;
  for (NodeId id : section.members) {
    RPoint p = g.point(id);
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += (p[a] - c[a]) * (p[a] - c[a]);
    r_out = std::max(r_out, std::sqrt(r2));
  }
  // inscribed radius: nearest non-member lattice node
  std::unordered_set<NodeId> member_set(section.members.begin(), section.members.end());
  int span = static_cast<int>(std::ceil((r_out + 2.0 * g.spacing) / g.spacing)) + 1;
  IdxVec cix = g.coords(section.center);
  double r_in = r_out + 2.0 * g.spacing;
  IdxVec ix{};
  std::function<void(int)> scan = [&](int axis) {
    if (axis == d) {
      if (!g.in_bounds(ix)) return;
      NodeId id = g.index(ix);
      if (member_set.count(id)) return;
      RPoint p = g.point(id);
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) r2 += (p[a] - c[a]) * (p[a] - c[a]);
      r_in = std::min(r_in, std::sqrt(r2));
      return;
    }
    for (int k = cix[axis] - span; k <= cix[axis] + span; ++k) {
      ix[axis] = k;
      scan(axis + 1);
    }
  };
  scan(0);

  rep.r_inner = r_in;
  rep.r_outer = r_out;
  double cs = std::min(C * std::sqrt(sigma), 0.9);
  rep.drift_plus = std::log(1.0 + cs) / std::log(mu0);    // negative
  rep.drift_minus = std::log(1.0 - cs) / std::log(mu0);   // positive
  const double mu = section.t;
  double lower = (1.0 / C) * std::pow(mu, 0.5 + rep.drift_minus);
  double upper = C * std::pow(mu, 0.5 + rep.drift_plus);
  // lattice slack: the inscribed radius is only resolved to one spacing
  rep.ok = (r_in + 1.5 * g.spacing >= lower) && (r_out <= upper + 1.5 * g.spacing);
  return rep;
}

MeasureDeltaReport measure_delta(const ScalarField& phi, const DomainMask& mask,
                                 const MAMeasure& measure, NodeId x0, double t, double eps2) {
  Section big = build_section(phi, mask, x0, t);
  Section small = build_section(phi, mask, x0, (1.0 - eps2) * t);
  std::vector<NodeId> only_big, only_small;
  std::set_difference(big.members.begin(), big.members.end(), small.members.begin(),
                      small.members.end(), std::back_inserter(only_big));
  std::set_difference(small.members.begin(), small.members.end(), big.members.begin(),
                      big.members.end(), std::back_inserter(only_small));
  double mu_big = measure.integrate(big.members);
  double mu_small = measure.integrate(small.members);
  MeasureDeltaReport rep;
  rep.sym_diff_fraction =
      (measure.integrate(only_big) + measure.integrate(only_small)) / mu_big;
  rep.measure_gap_fraction = std::abs(mu_big - mu_small) / mu_big;
  double sigma = std::max(big.sigma_achieved, small.sigma_achieved);
  rep.fitted_C = rep.sym_diff_fraction / (sigma + eps2);
  return rep;
}

bool separation_check(const ScalarField& phi, const DomainMask& mask, const Section& s, NodeId y,
                      double eps2, double delta_exp, double* clearance) {
  const Grid& g = *mask.grid;
  if (s.contains_node(y))
    throw std::invalid_argument("separation_check: y lies inside S_t(x)");
  const int n = g.n;
  CMat Tinv = CMat::Identity();
  if (n == 1)
    Tinv(0, 0) = 1.0 / s.Tmap(0, 0);
  else
    Tinv.topLeftCorner(2, 2) = s.Tmap.topLeftCorner(2, 2).inverse().eval();
  const double st = std::sqrt(s.t);
  auto normalize = [&](const CPoint& z) {
    CPoint dz = cdiff(z, s.x0);
    CPoint w{};
    for (int i = 0; i < n; ++i) {
      Cplx acc = 0.0;
      for (int j = 0; j < n; ++j) acc += Tinv(i, j) * dz[static_cast<std::size_t>(j)];
      w[static_cast<std::size_t>(i)] = acc / st;
    }
    return w;
  };

  Section shrunk = build_section(phi, mask, s.center, (1.0 - eps2) * s.t);
  CPoint wy = normalize(to_complex(g.point(y)));
  double dist = std::numeric_limits<double>::infinity();
  for (NodeId id : shrunk.members) {
    CPoint wm = normalize(to_complex(g.point(id)));
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) d2 += std::norm(wy[static_cast<std::size_t>(i)] - wm[static_cast<std::size_t>(i)]);
    dist = std::min(dist, std::sqrt(d2));
  }
  if (clearance) *clearance = dist - std::pow(eps2, delta_exp);
  return dist >= std::pow(eps2, delta_exp);
}

ComparabilityReport comparability_check(const ScalarField& phi, const DomainMask& mask,
                                        const Section& outer, const Section& inner, double eps1) {
  const Grid& g = *mask.grid;
  const int n = g.n;
  ComparabilityReport rep;
  bool intersect = false;
  for (NodeId id : inner.members)
    if (outer.contains_node(id)) {
      intersect = true;
      break;
    }
  if (!intersect) {
    rep.vacuous = true;
    return rep;
  }
  (void)phi;

  CMat Tinv = CMat::Identity();
  if (n == 1)
    Tinv(0, 0) = 1.0 / outer.Tmap(0, 0);
  else
    Tinv.topLeftCorner(2, 2) = outer.Tmap.topLeftCorner(2, 2).inverse().eval();
  const double st = std::sqrt(outer.t);
  auto normalize = [&](const CPoint& z) {
    CPoint dz = cdiff(z, outer.x0);
    CPoint w{};
    for (int i = 0; i < n; ++i) {
      Cplx acc = 0.0;
      for (int j = 0; j < n; ++j) acc += Tinv(i, j) * dz[static_cast<std::size_t>(j)];
      w[static_cast<std::size_t>(i)] = acc / st;
    }
    return w;
  };

  CPoint wc = normalize(to_complex(g.point(inner.center)));
  double r_out = 0.0;
  for (NodeId id : inner.members) {
    CPoint w = normalize(to_complex(g.point(id)));
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) d2 += std::norm(w[static_cast<std::size_t>(i)] - wc[static_cast<std::size_t>(i)]);
    r_out = std::max(r_out, std::sqrt(d2));
  }
  // inscribed radius in mapped coordinates via the inner ellipsoid metric:
  // T_outer^{-1} maps the inner ellipsoid to another ellipsoid; use the
  // nearest mapped non-member along the lattice scan box of the inner section
  std::unordered_set<NodeId> member_set(inner.members.begin(), inner.members.end());
  IdxVec cix = g.coords(inner.center);
  // bounding span from the inner section's own circumscribed radius
  RPoint ci = g.point(inner.center);
  double reach = 0.0;
  for (NodeId id : inner.members) {
    RPoint p = g.point(id);
    double r2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) r2 += (p[a] - ci[a]) * (p[a] - ci[a]);
    reach = std::max(reach, std::sqrt(r2));
  }
  int span = static_cast<int>(std::ceil((reach + 2.0 * g.spacing) / g.spacing)) + 1;
  double r_in = std::numeric_limits<double>::infinity();
  IdxVec ix{};
  std::function<void(int)> scan = [&](int axis) {
    if (axis == g.dim()) {
      if (!g.in_bounds(ix)) return;
      NodeId id = g.index(ix);
      if (member_set.count(id)) return;
      CPoint w = normalize(to_complex(g.point(id)));
      double d2 = 0.0;
      for (int i = 0; i < n; ++i) d2 += std::norm(w[static_cast<std::size_t>(i)] - wc[static_cast<std::size_t>(i)]);
      r_in = std::min(r_in, std::sqrt(d2));
      return;
    }
    for (int k = cix[axis] - span; k <= cix[axis] + span; ++k) {
      ix[axis] = k;
      scan(axis + 1);
    }
  };
  scan(0);

  const double ratio = inner.t / outer.t;
  rep.exponent_outer = std::log(std::max(r_out, 1e-300)) / std::log(ratio);
  rep.exponent_inner = std::log(std::max(r_in, 1e-300)) / std::log(ratio);
  double C_out = r_out / std::pow(ratio, 0.5 + eps1) > 1.0
                     ? r_out / std::pow(ratio, 0.5 + eps1)
                     : 1.0;
  double C_in = std::pow(ratio, 0.5 + eps1) / std::max(r_in, 1e-300);
  rep.C = std::max({C_out, C_in, 1.0});
  return rep;
}

KeyLemmaReport key_lemma_compare(const ScalarField& phi, const DomainMask& mask,
                                 const Section& plain, const Section& shifted) {
  (void)phi;
  (void)mask;
  KeyLemmaReport rep;
  rep.gamma = std::max(plain.sigma_achieved, shifted.sigma_achieved);
  if (rep.gamma > 0.2) {
    rep.vacuous = true;
    return rep;
  }
  const int n = plain.poly.n;
  // inclusion constants from generalized eigenvalues of the two quadratic forms
  Eigen::Matrix2cd a1 = plain.ellipsoid.topLeftCorner(2, 2);
  Eigen::Matrix2cd a2 = shifted.ellipsoid.topLeftCorner(2, 2);
  if (n == 1) {
    a1 = Eigen::Matrix2cd::Identity();
    a2 = Eigen::Matrix2cd::Identity();
    a1(0, 0) = plain.ellipsoid(0, 0);
    a2(0, 0) = shifted.ellipsoid(0, 0);
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2cd> es12(a1, a2);
  double lmax12 = es12.eigenvalues().maxCoeff();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2cd> es21(a2, a1);
  double lmax21 = es21.eigenvalues().maxCoeff();
  if (n == 1) {
    lmax12 = (a1(0, 0) / a2(0, 0)).real();
    lmax21 = 1.0 / lmax12;
  }
  // centers may differ; account for the shift in units of the ellipsoid radius
  double center_shift = 0.0;
  for (int i = 0; i < n; ++i)
    center_shift += std::norm(plain.x0[static_cast<std::size_t>(i)] -
                              shifted.x0[static_cast<std::size_t>(i)]);
  center_shift = std::sqrt(center_shift) / std::sqrt(plain.t);
  double c_shape = std::max(std::sqrt(std::max(lmax12, 0.0)) - 1.0,
                            1.0 - 1.0 / std::sqrt(std::max(lmax21, 1e-300)));
  rep.c1 = std::max(c_shape, 0.0) + center_shift;
  return rep;
}

double nesting_inflation(const ScalarField& phi, const Section& s_small, const Section& s_big) {
  const Grid& g = *phi.grid;
  double worst = 0.0;
  for (NodeId id : s_small.members) {
    double gval = phi[id] - s_big.poly.eval(g.point(id)) - s_big.phi_center;
    worst = std::max(worst, gval / s_big.t - 1.0);
  }
  return std::max(worst, 0.0);
}

}  // namespace cmalab
