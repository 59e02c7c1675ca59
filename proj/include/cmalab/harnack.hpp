#pragma once

#include <string>

#include "cmalab/sections.hpp"

namespace cmalab {

struct CriticalDensityTable {
  std::vector<double> levels;     // the M sweep
  std::vector<double> fractions;  // mu{u > M} / mu(S_t) per level
  std::vector<double> lambdas;    // the lambda sweep
  std::vector<double> m1;         // smallest M with fraction < lambda (inf if none)
  double rescale = 1.0;           // u was divided by this (inf over S_{t/2})
};

/// Exceedance-fraction table over S_t(x0) after normalizing inf over
/// S_{t/2}(x0) to 1. u must be a nonnegative solution field.
CriticalDensityTable critical_density(const ScalarField& u, const ScalarField& phi,
                                      const DomainMask& mask, const MAMeasure& measure, NodeId x0,
                                      double t);

/// L = (inf over S_t) / (inf over S_{2t}); requires S_{4t}(x0) inside the
/// domain so the solution hypothesis has room.
double inf_propagation(const ScalarField& u, const ScalarField& phi, const DomainMask& mask,
                       NodeId x0, double t);

struct LevelSetDecay {
  bool trivial = false;           // E_1 empty: u never reaches K*M
  std::vector<double> ratios;     // mu(E_{k+1} cap S_k) / mu(E_k cap S_{k-1})
  double delta0 = 0.0;            // fitted geometric ratio (max over k)
  double p = 0.0;                 // exponent with M^p delta0 < 1
  double lp_norm = 0.0;           // |u|_{L^p} over the base ball
  double inf_section = 0.0;       // inf over S_{mu0^3}(z0) after rescale (<= 1)
  double C = 0.0;                 // lp_norm / inf_section
};

/// Level sets E_k = {u >= K M^k} against the proof's shrinking balls
/// S_k = B_{(mu0^2/C)(1 - sum_{j<=k} 2^{-j-1})}(z0).
LevelSetDecay level_set_decay(const ScalarField& u, const ScalarField& phi, const DomainMask& mask,
                              const MAMeasure& measure, NodeId z0, double K, double M, double mu0,
                              double Cball);

struct SupBoundReport {
  double C = 0.0;            // sup_{B_{1/2}} u / |u|_{L^{eps5}(B_1)}
  double sup_half = 0.0;
  double norm_eps5 = 0.0;
  double lambda_p_norm = 0.0;  // L^p norm of the coefficient eigenvalue field
};

SupBoundReport local_sup_bound(const ScalarField& u, const ScalarField& lambda_field,
                               const DomainMask& mask, double eps5, double p);

struct HarnackRow {
  NodeId center = kNoNode;
  double t = 0.0;
  double sup = 0.0;
  double inf = 0.0;
  double ratio = 0.0;
  bool skipped = false;
  bool inf_zero = false;  // excluded from beta
  std::string reason;
};

struct HarnackReport {
  std::vector<HarnackRow> rows;
  double beta = 0.0;       // max ratio over rows in the smallest reachable band
  double band_top = 0.0;   // mu0^5/C0, raised to the grid floor if unreachable
  bool band_adjusted = false;
  double mu0 = 0.0;
  double C0 = 0.0;
};

/// Sup/inf ratios per (center, height) over section member sets; beta is the
/// max ratio on the band t <= mu0^5/C0, or on the lowest reachable height
/// band when that target sits below the grid floor (band_adjusted then set).
HarnackReport harnack_all_scales(const ScalarField& u, const ScalarField& phi,
                                 const DomainMask& mask, const std::vector<NodeId>& centers,
                                 const std::vector<double>& heights, double mu0, double C0);

struct HolderFit {
  std::vector<double> osc;   // osc_k over S_{tau^k t0}(z)
  double rho = 0.0;          // fitted per-level decay of osc
  double alpha = 0.0;        // 2 log(rho) / log(tau): exponent in the length scale sqrt(t)
  double C = 0.0;            // fitted osc_0 intercept
  double residual = 0.0;     // rms of the log-linear fit
  double tau = 0.0;
  bool ok = false;           // rho < 1 and >= 3 levels
};

/// Oscillation of u - inf(u) over nested sections S_{tau^k t0}(z); throws
/// "insufficient scale range" with fewer than 3 resolvable levels.
HolderFit oscillation_decay(const ScalarField& u, const ScalarField& phi, const DomainMask& mask,
                            NodeId z, double t0, double tau, int levels);

struct StrongerDensityReport {
  bool vacuous = false;  // measure hypothesis fails
  bool holds = false;    // inf over S_t >= alpha / (M1 L^2)
  double inf_t = 0.0;
  double bound = 0.0;
  double hypothesis_fraction = 0.0;
};

StrongerDensityReport stronger_critical_density(const ScalarField& u, const ScalarField& phi,
                                                const DomainMask& mask, const MAMeasure& measure,
                                                NodeId x0, double t, double alpha, double lambda,
                                                double M1, double L);

/// h <= theta * t * (M0 L / alpha)^{1/delta} with measured constants.
bool height_bound_check(double h, double t, double alpha, double theta, double M0, double L,
                        double delta);

struct Alpha6Report {
  double phi_max_on_half = 0.0;  // should be <= -1/3 on the normalized S_{1/2}
  bool phi_bound_holds = false;
  double combo_min = 0.0;        // min of u + 6 phi on S_{1/2}
  bool combo_reaches = false;    // u + 6 phi <= -1 somewhere
};

/// Diagnostic for the alpha = 6 normalization on renormalized fields: the
/// normalized section S_{1/2} is read off as {phi_norm <= -1/2}.
Alpha6Report alpha6_diagnostic(const ScalarField& phi_norm, const ScalarField& u_norm);

}  // namespace cmalab
