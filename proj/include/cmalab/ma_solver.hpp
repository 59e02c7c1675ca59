#pragma once

#include "cmalab/lin_solver.hpp"

namespace cmalab {

struct SolverConfig {
  double newton_tol = 1e-9;    // residual sup-norm target
  int max_iters = 60;
  double damping_init = 1.0;
  double damping_ratio = 0.5;  // backtracking factor
  double psh_floor = 1e-6;     // minimum Hessian eigenvalue along iterates
};

struct NewtonReport {
  std::vector<double> residual_history;
  int iterations = 0;
  bool converged = false;
  double min_eigenvalue = 0.0;
};

/// det((v0)_{i jbar}) = 1 in Omega, v0 = 0 on the boundary.
ScalarField solve_reference(const DomainMaskPtr& domain, const SolverConfig& config,
                            NewtonReport* report = nullptr);

/// Damped Newton for det(phi_{i jbar}) = f with Dirichlet data `bc`. Each
/// step solves the linearized operator L_phi with zero boundary data; the
/// line search backtracks on the residual norm and keeps iterates strictly
/// plurisubharmonic (psh_floor).
ScalarField solve_ma(const DomainMaskPtr& domain, const ScalarField& f, const BoundaryFn& bc,
                     const SolverConfig& config, NewtonReport* report = nullptr);

struct ComparisonReport {
  double worst_lower = 0.0;   // min over nodes of phi - (1+eps)^{1/n} v0 (+ slack)
  double worst_upper = 0.0;   // min over nodes of (1-eps)^{1/n} v0 - phi (+ slack)
  double worst_abs = 0.0;     // min over nodes of 4 eps + slack - |phi - v0|
  int violations = 0;
  bool ok() const { return violations == 0; }
};

/// Lemma-style envelope (1+eps)^{1/n} v0 <= phi <= (1-eps)^{1/n} v0 and
/// |phi - v0| <= 4 eps, checked node-wise with slack 10 h^2.
ComparisonReport comparison_check(const ScalarField& phi, const ScalarField& v0,
                                  const DomainMask& mask, double eps);

/// |z|^2 - 1 - 3 gamma <= v0 <= |z|^2 - 1 + 3 gamma node-wise (slack 10 h^2).
bool barrier_check(const ScalarField& v0, const DomainMask& mask, double gamma,
                   double* worst_margin = nullptr);

}  // namespace cmalab
