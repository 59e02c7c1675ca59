#pragma once

#include <Eigen/Dense>
#include <complex>

#include "cmalab/domain.hpp"
#include "cmalab/grid.hpp"

namespace cmalab {

using Cplx = std::complex<double>;
using CMat = Eigen::Matrix2cd;  // n x n complex used (n <= 2); unused block is identity-padded

/// n x n complex Hermitian matrix per node (phi_{i jbar}).
struct HermitianField {
  GridPtr grid;
  std::vector<std::array<Cplx, 4>> mats;  // row-major n x n, full lattice
  std::vector<std::uint8_t> is_valid;
  std::vector<NodeId> valid;  // ascending

  CMat at(NodeId id) const {
    const auto& m = mats[static_cast<std::size_t>(id)];
    CMat out = CMat::Identity();
    const int n = grid->n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = m[static_cast<std::size_t>(i * n + j)];
    return out;
  }
};

/// Degree-2 pluriharmonic polynomial
///   h(z) = const + Re(sum_i b_i (z-x0)_i) + Re(sum_{ij} c_{ij} (z-x0)_i (z-x0)_j),
/// c symmetric; complex Hessian identically zero.
struct PluriharmonicPoly {
  int n = 1;
  CPoint x0{};
  std::array<Cplx, 2> b{};
  std::array<Cplx, 4> c{};  // row-major n x n, symmetric
  double constant = 0.0;

  double eval(const CPoint& z) const {
    Cplx lin = 0.0, quad = 0.0;
    std::array<Cplx, 2> dz{z[0] - x0[0], z[1] - x0[1]};
    for (int i = 0; i < n; ++i) {
      lin += b[static_cast<std::size_t>(i)] * dz[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j)
        quad += c[static_cast<std::size_t>(i * n + j)] * dz[static_cast<std::size_t>(i)] *
                dz[static_cast<std::size_t>(j)];
    }
    return constant + lin.real() + quad.real();
  }
  double eval(const RPoint& p) const { return eval(to_complex(p)); }
};

/// z = x0 + sqrt(lambda) * T * w with T a C-linear n x n map.
struct AffineMap {
  int n = 1;
  CMat T = CMat::Identity();
  CPoint x0{};
  double lambda = 1.0;

  double abs_det() const {
    return std::abs(n == 1 ? T(0, 0) : T(0, 0) * T(1, 1) - T(0, 1) * T(1, 0));
  }
  CPoint apply(const CPoint& w) const {
    const double s = std::sqrt(lambda);
    CPoint z{};
    for (int i = 0; i < n; ++i) {
      Cplx acc = 0.0;
      for (int j = 0; j < n; ++j) acc += T(i, j) * w[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = x0[static_cast<std::size_t>(i)] + s * acc;
    }
    return z;
  }
  AffineMap inverse() const;
  /// this ∘ other (apply other first).
  AffineMap compose(const AffineMap& other) const;
};

struct PshReport {
  double min_eigenvalue = 0.0;
  NodeId worst_node = kNoNode;
};

// --- finite-difference stencils (second-order central, exact on quadratics) ---

double fd_second(const ScalarField& f, NodeId id, int axis);
double fd_cross(const ScalarField& f, NodeId id, int a, int b);
double fd_first(const ScalarField& f, NodeId id, int axis);

/// Complex Hessian phi_{i jbar} via central differences. Valid at nodes where
/// every stencil value is defined; nodes losing neighbors drop out of the
/// valid set (callers see the shrink through `valid`).
HermitianField complex_hessian(const ScalarField& phi);

/// Node-wise det(phi_{i jbar}); negative values permitted (Newton iterates).
ScalarField ma_density(const HermitianField& hess);

double hermitian_det(const CMat& m, int n);
double hermitian_min_eig(const CMat& m, int n);

PshReport psh_violation(const HermitianField& hess);

/// Taylor pluriharmonic polynomial at x0: b_i = 2 phi_i(x0), c_{ij} = phi_{ij}(x0),
/// holomorphic derivatives by composed central stencils; constant = 0.
PluriharmonicPoly pluriharmonic_at(const ScalarField& phi, NodeId x0);

/// det(phi) * phi^{i jbar} u_{i jbar}, node-wise on the common valid set.
/// Throws if det(phi_{i jbar}) <= 0 at a node (named).
ScalarField linearized_apply(const HermitianField& hess_phi, const ScalarField& u);

// --- interpolation and normalization ---

/// Tensor-product cubic (Lagrange) interpolation; exact on cubics.
/// Returns false if the 4^d stencil cube is not fully defined.
bool tricubic(const ScalarField& f, const RPoint& p, double* out);

struct NormalizedPair {
  ScalarField phi;
  ScalarField u;
};

/// phi_tilde(w) = phi(map(w)) / (lambda |det T|^{2/n}) + h(w), u_tilde = u o map.
/// Every target node whose image cannot be interpolated raises (first node named),
/// unless `partial` is set, in which case such nodes stay undefined.
NormalizedPair normalize_pair(const ScalarField& phi, const ScalarField& u, const AffineMap& map,
                              const PluriharmonicPoly& h, GridPtr target, bool partial = false);

}  // namespace cmalab
