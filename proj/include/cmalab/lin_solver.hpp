#pragma once

#include <Eigen/Sparse>

#include "cmalab/domain.hpp"
#include "cmalab/psh.hpp"

namespace cmalab {

/// Sparse discretization of L_phi over the interior unknowns. Boundary data
/// enters through crossing weights (Shortley-Weller ghost elimination), so
/// the matrix is fixed once and reusable across right-hand sides.
struct LinearOperator {
  DomainMaskPtr mask;
  std::vector<NodeId> rows;                 // = mask->interior
  std::unordered_map<NodeId, int> row_of;
  Eigen::SparseMatrix<double> A;
  std::vector<std::vector<std::pair<int, double>>> bc_terms;  // per row: (crossing, weight)
  std::vector<std::uint8_t> dominant;       // per-row diagonal dominance flag
  std::size_t dominant_rows = 0;
  std::uint64_t phi_snapshot_id = 0;

  /// Apply to interior values with explicit boundary data (residual checks).
  Eigen::VectorXd apply(const Eigen::VectorXd& x, const BoundaryFn& bc) const;
};

struct SolveStats {
  double residual_sup = 0.0;
  int iterations = 0;
  bool dominance_ok = true;
};

/// Assemble L_phi u = det(phi_{k lbar}) phi^{i jbar} u_{i jbar} from a Hessian
/// snapshot. Throws on a singular Hessian node.
LinearOperator assemble(const HermitianField& hess_phi, const DomainMaskPtr& mask);

/// Dirichlet solve L_phi u = g, u = bc on the boundary crossings.
/// Direct factorization for n = 1 grids, ILUT-preconditioned BiCGSTAB with
/// iterative refinement for n = 2.
ScalarField solve_linear(const LinearOperator& op, const ScalarField& g, const BoundaryFn& bc,
                         SolveStats* stats = nullptr);

struct LuEpsilonReport {
  int checked = 0;
  int violations = 0;
  double worst_margin = 0.0;  // min over nodes of (lhs - rhs + slack)
  NodeId worst_node = kNoNode;
};

/// Pointwise check of L_phi(-u^{eps4}) >= -eps4(eps4-1) u^{eps4-2} |grad u|^2
/// * det(u_{i jbar}) / trace(u_{i jbar}) for positive supersolutions u.
LuEpsilonReport luepsilon_check(const ScalarField& phi, const ScalarField& u, double eps4);

}  // namespace cmalab
