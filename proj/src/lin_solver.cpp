#include "cmalab/lin_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <atomic>
#include <cmath>
#include <map>
#include <stdexcept>

namespace cmalab {

namespace {

std::atomic<std::uint64_t> g_snapshot_counter{1};

CMat adjugate(const CMat& m, int n) {
  CMat out = CMat::Identity();
  if (n == 1) {
    out(0, 0) = 1.0;
  } else {
    out(0, 0) = m(1, 1);
    out(1, 1) = m(0, 0);
    out(0, 1) = -m(0, 1);
    out(1, 0) = -m(1, 0);
  }
  return out;
}

}  // namespace

Eigen::VectorXd LinearOperator::apply(const Eigen::VectorXd& x, const BoundaryFn& bc) const {
  Eigen::VectorXd out = A * x;
  for (int r = 0; r < static_cast<int>(rows.size()); ++r)
    for (const auto& [ci, w] : bc_terms[static_cast<std::size_t>(r)]) {
      const Crossing& c = mask->crossings[static_cast<std::size_t>(ci)];
      out[r] += w * (bc ? bc(c.point) : c.value);
    }
  return out;
}

LinearOperator assemble(const HermitianField& hess_phi, const DomainMaskPtr& mask) {
  const Grid& g = *mask->grid;
  const int n = g.n;
  const double h2 = g.spacing * g.spacing;

  LinearOperator op;
  op.mask = mask;
  op.rows = mask->interior;
  op.phi_snapshot_id = g_snapshot_counter.fetch_add(1);
  const int nrows = static_cast<int>(op.rows.size());
  op.row_of.reserve(op.rows.size());
  for (int r = 0; r < nrows; ++r) op.row_of[op.rows[static_cast<std::size_t>(r)]] = r;
  op.bc_terms.resize(op.rows.size());
  op.dominant.assign(op.rows.size(), 0);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(op.rows.size() * 9);
  std::map<NodeId, double> coef;

  for (int r = 0; r < nrows; ++r) {
    NodeId node = op.rows[static_cast<std::size_t>(r)];
    if (!hess_phi.is_valid[static_cast<std::size_t>(node)])
      throw std::runtime_error("assemble: missing Hessian snapshot at node " + std::to_string(node));
    CMat phi = hess_phi.at(node);
    if (hermitian_det(phi, n) <= 0.0)
      throw std::runtime_error("assemble: singular complex Hessian at node " + std::to_string(node));
    CMat W = adjugate(phi, n);

    coef.clear();
    auto addc = [&](const IdxVec& off, double w) {
      NodeId nb = g.shifted(node, off);
      if (nb == kNoNode)
        throw std::runtime_error("assemble: stencil leaves the lattice at node " +
                                 std::to_string(node));
      coef[nb] += w;
    };
    for (int k = 0; k < n; ++k) {
      double wkk = W(k, k).real();
      for (int a : {2 * k, 2 * k + 1}) {
        IdxVec off{};
        off[a] = 1;
        addc(off, 0.25 * wkk / h2);
        off[a] = -1;
        addc(off, 0.25 * wkk / h2);
        off[a] = 0;
        addc(off, -0.5 * wkk / h2);
      }
    }
    if (n == 2) {
      double reW = W(0, 1).real(), imW = W(0, 1).imag();
      auto cross = [&](int a, int b, double w) {
        if (std::abs(w) < 1e-300) return;
        for (int sa = -1; sa <= 1; sa += 2)
          for (int sb = -1; sb <= 1; sb += 2) {
            IdxVec off{};
            off[a] = sa;
            off[b] = sb;
            addc(off, w * sa * sb / (4.0 * h2));
          }
      };
      cross(0, 2, 0.5 * reW);
      cross(1, 3, 0.5 * reW);
      cross(0, 3, 0.5 * imW);
      cross(1, 2, -0.5 * imW);
    }

    // Ghost elimination: expand non-interior lattice nodes through their
    // closure rules into interior coefficients plus boundary weights.
    double diag = 0.0, offsum = 0.0;
    std::map<int, double> row_entries;
    for (const auto& [nb, w] : coef) {
      if (mask->is_interior(nb)) {
        row_entries[op.row_of.at(nb)] += w;
      } else {
        auto it = mask->ghost_rules.find(nb);
        if (it == mask->ghost_rules.end())
          throw std::runtime_error("assemble: stencil hits unclosed node " + std::to_string(nb));
        for (const auto& [inode, gw] : it->second.node_terms)
          row_entries[op.row_of.at(inode)] += w * gw;
        for (const auto& [ci, gw] : it->second.crossing_terms)
          op.bc_terms[static_cast<std::size_t>(r)].push_back({ci, w * gw});
      }
    }
    for (const auto& [cidx, w] : row_entries) {
      trips.emplace_back(r, cidx, w);
      if (cidx == r)
        diag = w;
      else
        offsum += std::abs(w);
    }
    if (std::abs(diag) + 1e-12 >= offsum) {
      op.dominant[static_cast<std::size_t>(r)] = 1;
      ++op.dominant_rows;
    }
  }

  op.A.resize(nrows, nrows);
  op.A.setFromTriplets(trips.begin(), trips.end());
  op.A.makeCompressed();
  return op;
}

ScalarField solve_linear(const LinearOperator& op, const ScalarField& g, const BoundaryFn& bc,
                         SolveStats* stats) {
  const int nrows = static_cast<int>(op.rows.size());
  Eigen::VectorXd rhs(nrows);
  for (int r = 0; r < nrows; ++r) {
    NodeId node = op.rows[static_cast<std::size_t>(r)];
    double v = g.is_defined(node) ? g[node] : 0.0;
    for (const auto& [ci, w] : op.bc_terms[static_cast<std::size_t>(r)]) {
      const Crossing& c = op.mask->crossings[static_cast<std::size_t>(ci)];
      v -= w * (bc ? bc(c.point) : c.value);
    }
    rhs[r] = v;
  }

  Eigen::VectorXd x(nrows);
  const double rhs_scale = rhs.lpNorm<Eigen::Infinity>() + 1.0;
  int iters = 0;
  auto refine = [&](auto& solver) {
    x = solver.solve(rhs);
    for (int k = 0; k < 6; ++k) {
      Eigen::VectorXd res = rhs - op.A * x;
      if (res.lpNorm<Eigen::Infinity>() <= 1e-10 * rhs_scale) break;
      x += solver.solve(res).eval();
      ++iters;
    }
  };

  if (op.mask->grid->dim() <= 2 || nrows < 20000) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(op.A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("solve_linear: factorization failed");
    refine(lu);
  } else {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
    it.preconditioner().setDroptol(1e-6);
    it.preconditioner().setFillfactor(40);
    it.setTolerance(1e-13);
    it.setMaxIterations(4000);
    it.compute(op.A);
    if (it.info() != Eigen::Success)
      throw std::runtime_error("solve_linear: preconditioner setup failed");
    refine(it);
  }

  double res_sup = (rhs - op.A * x).lpNorm<Eigen::Infinity>();
  if (stats) {
    stats->residual_sup = res_sup;
    stats->iterations = iters;
    stats->dominance_ok = op.dominant_rows == op.rows.size();
  }
  if (res_sup > 1e-8 * rhs_scale)
    throw std::runtime_error("solve_linear: residual " + std::to_string(res_sup) +
                             " above tolerance");

  ScalarField u(g.grid ? g.grid : op.mask->grid);
  for (int r = 0; r < nrows; ++r) u.set(op.rows[static_cast<std::size_t>(r)], x[r]);
  return u;
}

LuEpsilonReport luepsilon_check(const ScalarField& phi, const ScalarField& u, double eps4) {
  if (!(eps4 > 0.0 && eps4 < 1.0))
    throw std::invalid_argument("luepsilon_check: eps4 must be in (0,1)");
  const int n = phi.grid->n;
  const double h = phi.grid->spacing;

  HermitianField hphi = complex_hessian(phi);
  HermitianField hu = complex_hessian(u);

  // scale for the slack term
  double umax = 0.0;
  for (NodeId id : hu.valid) {
    if (!(u[id] > 0.0))
      throw std::invalid_argument("luepsilon_check: u must be positive (node " +
                                  std::to_string(id) + ")");
    umax = std::max(umax, u[id]);
  }

  // w = -u^{eps4} where u is defined
  ScalarField w(u.grid);
  const NodeId total = u.grid->count();
  for (NodeId id = 0; id < total; ++id)
    if (u.is_defined(id) && u[id] > 0.0) w.set(id, -std::pow(u[id], eps4));

  ScalarField lhs = linearized_apply(hphi, w);
  ScalarField lpu = linearized_apply(hphi, u);

  LuEpsilonReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  const double slack = 50.0 * h * h * std::max(1.0, std::pow(umax, eps4));
  for (NodeId id : hu.valid) {
    if (!lhs.is_defined(id) || !lpu.is_defined(id)) continue;
    if (lpu[id] > 10.0 * h * h) continue;  // not a numerical supersolution here
    // holomorphic gradient: |grad u|^2 = sum_i |u_i|^2, u_i = (d_x - i d_y)u / 2
    double grad2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double gx = fd_first(u, id, 2 * i), gy = fd_first(u, id, 2 * i + 1);
      grad2 += 0.25 * (gx * gx + gy * gy);
    }
    CMat uh = hu.at(id);
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += uh(i, i).real();
    double factor = std::abs(tr) > 1e-12 ? hermitian_det(uh, n) / tr : 0.0;
    double rhs = -eps4 * (eps4 - 1.0) * std::pow(u[id], eps4 - 2.0) * grad2 * factor;
    double margin = lhs[id] - rhs + slack;
    ++rep.checked;
    if (margin < 0.0) ++rep.violations;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_node = id;
    }
  }
  return rep;
}

}  // namespace cmalab
