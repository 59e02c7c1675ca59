#include "cmalab/ma_solver.hpp"

#include <cmath>
#include <stdexcept>

namespace cmalab {

namespace {

double ball_quadratic(const RPoint& p, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += p[a] * p[a];
  return s - 1.0;
}

/// Residual det(Hess phi) - f on the interior; also reports the minimum
/// Hessian eigenvalue over the interior.
double ma_residual(const DomainMask& mask, const ScalarField& phi_full, const ScalarField& f,
                   HermitianField* hess_out, double* min_eig_out) {
  HermitianField hess = complex_hessian(phi_full);
  const int n = mask.grid->n;
  double sup = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  for (NodeId id : mask.interior) {
    if (!hess.is_valid[static_cast<std::size_t>(id)])
      throw std::runtime_error("ma_residual: Hessian unavailable at interior node " +
                               std::to_string(id));
    CMat m = hess.at(id);
    double fv = f.is_defined(id) ? f[id] : 1.0;
    sup = std::max(sup, std::abs(hermitian_det(m, n) - fv));
    min_eig = std::min(min_eig, hermitian_min_eig(m, n));
  }
  if (hess_out) *hess_out = std::move(hess);
  if (min_eig_out) *min_eig_out = min_eig;
  return sup;
}

}  // namespace

ScalarField solve_ma(const DomainMaskPtr& domain, const ScalarField& f, const BoundaryFn& bc,
                     const SolverConfig& config, NewtonReport* report) {
  const DomainMask& mask = *domain;
  const Grid& g = *mask.grid;
  const int n = g.n;
  const int d = g.dim();

  double eps_hat = 0.0;
  for (NodeId id : mask.interior)
    if (f.is_defined(id)) eps_hat = std::max(eps_hat, std::abs(f[id] - 1.0));
  if (eps_hat > 0.2 + 1e-12)
    throw std::invalid_argument("solve_ma: |f - 1| exceeds the 0.2 cap");

  // Strictly psh start: scaled quadratic barrier plus an L_{|z|^2}-harmonic
  // lift matching the Dirichlet data.
  const double scale0 = std::pow(1.0 + eps_hat, 1.0 / n);
  ScalarField phi(domain->grid);
  for (NodeId id : mask.interior)
    phi.set(id, scale0 * ball_quadratic(g.point(id), d));
  {
    ScalarField quad = sample_field(domain->grid, [&](const RPoint& p) {
      return ball_quadratic(p, d);
    });
    HermitianField hq = complex_hessian(quad);
    LinearOperator lap = assemble(hq, domain);
    ScalarField zero(domain->grid);
    for (NodeId id : mask.interior) zero.set(id, 0.0);
    BoundaryFn lift_bc = [&](const RPoint& p) {
      double gval = bc ? bc(p) : 0.0;
      return gval - scale0 * ball_quadratic(p, d);
    };
    ScalarField lift = solve_linear(lap, zero, lift_bc);
    for (NodeId id : mask.interior) phi.set(id, phi[id] + lift[id]);
  }

  NewtonReport local;
  NewtonReport& rep = report ? *report : local;
  rep.residual_history.clear();

  ScalarField phi_full = ghost_fill(mask, phi, bc);
  HermitianField hess;
  double min_eig = 0.0;
  double res = ma_residual(mask, phi_full, f, &hess, &min_eig);
  rep.residual_history.push_back(res);
  if (min_eig < config.psh_floor)
    throw std::runtime_error("solve_ma: initial iterate violates the psh floor");

  ScalarField zero_bc_g(domain->grid);
  for (int it = 0; it < config.max_iters && res > config.newton_tol; ++it) {
    LinearOperator op = assemble(hess, domain);
    // Newton step: L_phi delta = f - det(Hess phi), zero boundary data.
    ScalarField rhs(domain->grid);
    ScalarField det_phi = ma_density(hess);
    for (NodeId id : mask.interior)
      rhs.set(id, (f.is_defined(id) ? f[id] : 1.0) - det_phi[id]);
    ScalarField delta = solve_linear(op, rhs, [](const RPoint&) { return 0.0; });

    double step = config.damping_init;
    bool accepted = false;
    while (step > 1e-10) {
      ScalarField trial(domain->grid);
      for (NodeId id : mask.interior) trial.set(id, phi[id] + step * delta[id]);
      ScalarField trial_full = ghost_fill(mask, trial, bc);
      HermitianField trial_hess;
      double trial_eig = 0.0;
      double trial_res = ma_residual(mask, trial_full, f, &trial_hess, &trial_eig);
      if (trial_eig >= config.psh_floor && trial_res < res) {
        phi = std::move(trial);
        phi_full = std::move(trial_full);
        hess = std::move(trial_hess);
        res = trial_res;
        min_eig = trial_eig;
        accepted = true;
        break;
      }
      step *= config.damping_ratio;
    }
    rep.iterations = it + 1;
    rep.residual_history.push_back(res);
    if (!accepted) {
      rep.converged = false;
      rep.min_eigenvalue = min_eig;
      std::string hist;
      for (double r : rep.residual_history) hist += " " + std::to_string(r);
      throw std::runtime_error("solve_ma: Newton stagnation (damping underflow); residuals:" + hist);
    }
  }

  rep.converged = res <= config.newton_tol;
  rep.min_eigenvalue = min_eig;
  if (!rep.converged)
    throw std::runtime_error("solve_ma: no convergence after " +
                             std::to_string(config.max_iters) + " iterations, residual " +
                             std::to_string(res));
  // ghost values are part of the discrete solution: downstream Hessians at
  // near-boundary nodes need them
  return phi_full;
}

ScalarField solve_reference(const DomainMaskPtr& domain, const SolverConfig& config,
                            NewtonReport* report) {
  ScalarField one(domain->grid);
  for (NodeId id : domain->interior) one.set(id, 1.0);
  return solve_ma(domain, one, nullptr, config, report);
}

ComparisonReport comparison_check(const ScalarField& phi, const ScalarField& v0,
                                  const DomainMask& mask, double eps) {
  const int n = mask.grid->n;
  const double slack = 10.0 * mask.grid->spacing * mask.grid->spacing;
  const double c_lo = std::pow(1.0 + eps, 1.0 / n);
  const double c_hi = std::pow(1.0 - eps, 1.0 / n);
  ComparisonReport rep;
  rep.worst_lower = rep.worst_upper = rep.worst_abs = std::numeric_limits<double>::infinity();
  for (NodeId id : mask.interior) {
    double lo = phi[id] - c_lo * v0[id] + slack;
    double hi = c_hi * v0[id] - phi[id] + slack;
    double ab = 4.0 * eps + slack - std::abs(phi[id] - v0[id]);
    rep.worst_lower = std::min(rep.worst_lower, lo);
    rep.worst_upper = std::min(rep.worst_upper, hi);
    rep.worst_abs = std::min(rep.worst_abs, ab);
    if (lo < 0.0 || hi < 0.0 || ab < 0.0) ++rep.violations;
  }
  return rep;
}

bool barrier_check(const ScalarField& v0, const DomainMask& mask, double gamma,
                   double* worst_margin) {
  const int d = mask.grid->dim();
  const double slack = 10.0 * mask.grid->spacing * mask.grid->spacing;
  double worst = std::numeric_limits<double>::infinity();
  for (NodeId id : mask.interior) {
    double q = ball_quadratic(mask.grid->point(id), d);
    worst = std::min(worst, v0[id] - (q - 3.0 * gamma) + slack);
    worst = std::min(worst, (q + 3.0 * gamma) - v0[id] + slack);
  }
  if (worst_margin) *worst_margin = worst;
  return worst >= 0.0;
}

}  // namespace cmalab
