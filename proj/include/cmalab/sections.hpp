#pragma once

#include <algorithm>

#include "cmalab/psh.hpp"

namespace cmalab {

/// Connected sublevel component of phi - h_{x0} through x0, with its fitted
/// det-1 ellipsoid and normalizing C-linear map T (T maps B_{sqrt t} onto the
/// ellipsoid's sublevel set {a-norm <= t}).
struct Section {
  NodeId center = kNoNode;
  CPoint x0{};
  double phi_center = 0.0;
  double t = 0.0;
  PluriharmonicPoly poly;
  std::vector<NodeId> members;  // ascending node ids, connected, contains center
  CMat ellipsoid = CMat::Identity();  // Hermitian a, det = 1
  CMat Tmap = CMat::Identity();       // a^{-1/2}, |det| = 1
  double sigma_achieved = 0.0;
  std::size_t excluded_islands = 0;   // far sublevel components dropped

  bool contains_node(NodeId id) const {
    return std::binary_search(members.begin(), members.end(), id);
  }
  /// Hermitian-form radius sqrt(<a dz, dz> / t) of a point.
  double ellipsoid_radius(const CPoint& z) const;
};

struct EllipsoidFit {
  CMat a = CMat::Identity();
  double sigma_achieved = 0.0;
};

/// S_t(x0) = {phi - h_{x0} <= phi(x0) + t}, connected component of x0 under
/// face adjacency. Throws "section escapes domain" if the component touches
/// the boundary and "height below grid floor" when unresolvable.
Section build_section(const ScalarField& phi, const DomainMask& mask, NodeId x0, double t);

/// Member nodes only (sorted), without the ellipsoid fit or floor checks.
/// Same escape rule as build_section.
std::vector<NodeId> section_members(const ScalarField& phi, const DomainMask& mask,
                                    const PluriharmonicPoly& poly, double phi_center, NodeId x0,
                                    double t);

/// Normalized inverse second-moment ellipsoid of a member cloud, rescaled to
/// det 1, with sigma from an exhaustive member/non-member scan.
EllipsoidFit fit_ellipsoid(const ScalarField& phi, const DomainMask& mask,
                           const std::vector<NodeId>& members, NodeId x0, double t);

/// phi_{mu,x0}(zeta) = (phi - h - phi(x0) - mu)(x0 + T(sqrt(mu) zeta)) /
/// (mu |det T|^{2/n}) on a unit-scale grid. Nodes with |zeta| <= 1 must be
/// interpolatable; outer nodes may stay undefined.
ScalarField renormalize_section(const ScalarField& phi, const Section& section, GridPtr target);

struct EngulfingReport {
  bool vacuous = false;        // sections disjoint
  bool contained = true;       // s1 subset 10 s2
  int violations = 0;
  double worst_excess = 0.0;   // max over members of (g2(dilated x) - t2)/t2
  double theta_required = 0.0; // smallest theta with S_t(z) subset S_{theta t}(y)
};

/// 10-dilation engulfing (dilation about x2) plus the theta-form measured
/// against s2's center polynomial.
EngulfingReport engulfing_check(const ScalarField& phi, const DomainMask& mask, const Section& s1,
                                const Section& s2);

struct DiameterReport {
  bool ok = false;
  double r_inner = 0.0;  // largest lattice-verified inscribed radius
  double r_outer = 0.0;  // circumscribed radius over members
  double drift_plus = 0.0;
  double drift_minus = 0.0;
};

/// Ball sandwich B_{(1/C) mu^{1/2+drift}} subset S subset B_{C mu^{1/2-drift}}
/// with drift = log_{mu0}(1 -+ C sigma^{1/2}).
DiameterReport diameter_check(const Section& section, const DomainMask& mask, double mu0,
                              double sigma, double C);

struct MeasureDeltaReport {
  double sym_diff_fraction = 0.0;  // mu(S_t \ S_t') + mu(S_t' \ S_t), over mu(S_t)
  double measure_gap_fraction = 0.0;
  double fitted_C = 0.0;           // fraction / (sigma + eps2)
};

MeasureDeltaReport measure_delta(const ScalarField& phi, const DomainMask& mask,
                                 const MAMeasure& measure, NodeId x0, double t, double eps2);

/// B_{eps2^delta}(T y) misses T S_{(1-eps2)t}(x) in section-normalized
/// coordinates, T = (1/sqrt t) Tmap^{-1}. Throws if y is inside S_t(x).
bool separation_check(const ScalarField& phi, const DomainMask& mask, const Section& s, NodeId y,
                      double eps2, double delta_exp, double* clearance = nullptr);

struct ComparabilityReport {
  bool vacuous = false;
  double C = 1.0;
  double exponent_inner = 0.5;
  double exponent_outer = 0.5;
};

/// In outer-normalized coordinates, the inner section sits between balls of
/// radius (t/t0)^{1/2 +- eps1} around its mapped center, up to a factor C.
ComparabilityReport comparability_check(const ScalarField& phi, const DomainMask& mask,
                                        const Section& outer, const Section& inner, double eps1);

struct KeyLemmaReport {
  bool vacuous = false;
  double c1 = 0.0;      // smallest two-sided inclusion constant between the ellipsoids
  double gamma = 0.0;   // max of the two sigma_achieved values
};

/// Compare the fitted ellipsoids of sublevel sets of phi and phi - h.
KeyLemmaReport key_lemma_compare(const ScalarField& phi, const DomainMask& mask,
                                 const Section& plain, const Section& shifted);

/// Smallest inflation c with members(s_small) subset S_{(1+c) t_big}(x0);
/// evaluated against the big section's polynomial.
double nesting_inflation(const ScalarField& phi, const Section& s_small, const Section& s_big);

}  // namespace cmalab
