#include "cmalab/psh.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace cmalab {

AffineMap AffineMap::inverse() const {
  AffineMap inv;
  inv.n = n;
  inv.lambda = 1.0 / lambda;
  inv.T = CMat::Identity();
  if (n == 1) {
    inv.T(0, 0) = 1.0 / T(0, 0);
  } else {
    inv.T.topLeftCorner(2, 2) = T.topLeftCorner(2, 2).inverse().eval();
  }
  // w = T^{-1}(z - x0)/sqrt(lambda): translation is the image of z = 0.
  const double s = std::sqrt(inv.lambda);
  for (int i = 0; i < n; ++i) {
    Cplx acc = 0.0;
    for (int j = 0; j < n; ++j) acc += inv.T(i, j) * (-x0[static_cast<std::size_t>(j)]);
    inv.x0[static_cast<std::size_t>(i)] = s * acc;
  }
  return inv;
}

AffineMap AffineMap::compose(const AffineMap& other) const {
  AffineMap out;
  out.n = n;
  out.lambda = lambda * other.lambda;
  out.T = T * other.T;
  CPoint img = apply(other.x0);
  out.x0 = img;
  // z = this(other(w)) = this.x0 + sqrt(l1) T1 (other.x0 + sqrt(l2) T2 w)
  //   = this(other.x0) + sqrt(l1 l2) T1 T2 w.
  return out;
}

double fd_second(const ScalarField& f, NodeId id, int axis) {
  const double h = f.grid->spacing;
  NodeId p = f.grid->neighbor(id, axis, 1), m = f.grid->neighbor(id, axis, -1);
  return (f[p] - 2.0 * f[id] + f[m]) / (h * h);
}

double fd_cross(const ScalarField& f, NodeId id, int a, int b) {
  const double h = f.grid->spacing;
  IdxVec off{};
  auto v = [&](int sa, int sb) {
    IdxVec o{};
    o[a] = sa;
    o[b] = sb;
    return f[f.grid->shifted(id, o)];
  };
  (void)off;
  return (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4.0 * h * h);
}

double fd_first(const ScalarField& f, NodeId id, int axis) {
  const double h = f.grid->spacing;
  return (f[f.grid->neighbor(id, axis, 1)] - f[f.grid->neighbor(id, axis, -1)]) / (2.0 * h);
}

namespace {

bool stencil_defined(const ScalarField& f, NodeId id, int ring) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  IdxVec ix = g.coords(id);
  for (int a = 0; a < d; ++a) {
    if (ix[a] < ring || ix[a] >= g.dims[a] - ring) return false;
  }
  // faces and in-pair diagonals up to `ring`
  for (int a = 0; a < d; ++a)
    for (int s = -ring; s <= ring; ++s) {
      if (s == 0) continue;
      NodeId nb = g.neighbor(id, a, s);
      if (nb == kNoNode || !f.is_defined(nb)) return false;
    }
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      for (int sa = -ring; sa <= ring; ++sa)
        for (int sb = -ring; sb <= ring; ++sb) {
          if (sa == 0 || sb == 0) continue;
          IdxVec o{};
          o[a] = sa;
          o[b] = sb;
          NodeId nb = g.shifted(id, o);
          if (nb == kNoNode || !f.is_defined(nb)) return false;
        }
  return true;
}

}  // namespace

HermitianField complex_hessian(const ScalarField& phi) {
  const Grid& g = *phi.grid;
  const int n = g.n;
  HermitianField out;
  out.grid = phi.grid;
  out.mats.assign(static_cast<std::size_t>(g.count()), {});
  out.is_valid.assign(static_cast<std::size_t>(g.count()), 0);
  const NodeId total = g.count();
  for (NodeId id = 0; id < total; ++id) {
    if (!phi.is_defined(id) || !stencil_defined(phi, id, 1)) continue;
    auto& m = out.mats[static_cast<std::size_t>(id)];
    for (int i = 0; i < n; ++i) {
      m[static_cast<std::size_t>(i * n + i)] =
          0.25 * (fd_second(phi, id, 2 * i) + fd_second(phi, id, 2 * i + 1));
      for (int j = i + 1; j < n; ++j) {
        double re = 0.25 * (fd_cross(phi, id, 2 * i, 2 * j) + fd_cross(phi, id, 2 * i + 1, 2 * j + 1));
        double im = 0.25 * (fd_cross(phi, id, 2 * i, 2 * j + 1) - fd_cross(phi, id, 2 * i + 1, 2 * j));
        m[static_cast<std::size_t>(i * n + j)] = Cplx(re, im);
        m[static_cast<std::size_t>(j * n + i)] = Cplx(re, -im);
      }
    }
    out.is_valid[static_cast<std::size_t>(id)] = 1;
    out.valid.push_back(id);
  }
  return out;
}

double hermitian_det(const CMat& m, int n) {
  if (n == 1) return m(0, 0).real();
  return (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
}

double hermitian_min_eig(const CMat& m, int n) {
  if (n == 1) return m(0, 0).real();
  double tr = m(0, 0).real() + m(1, 1).real();
  double det = hermitian_det(m, 2);
  double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
  return 0.5 * (tr - disc);
}

ScalarField ma_density(const HermitianField& hess) {
  ScalarField out(hess.grid);
  const int n = hess.grid->n;
  for (NodeId id : hess.valid) out.set(id, hermitian_det(hess.at(id), n));
  return out;
}

PshReport psh_violation(const HermitianField& hess) {
  PshReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  const int n = hess.grid->n;
  for (NodeId id : hess.valid) {
    double e = hermitian_min_eig(hess.at(id), n);
    if (e < rep.min_eigenvalue) {
      rep.min_eigenvalue = e;
      rep.worst_node = id;
    }
  }
  return rep;
}

namespace {

/// Composed central first differences: D_a D_b f (two-ring for a == b).
double fd_composed_second(const ScalarField& f, NodeId id, int a, int b) {
  const double h = f.grid->spacing;
  if (a == b) {
    NodeId p2 = f.grid->neighbor(id, a, 2), m2 = f.grid->neighbor(id, a, -2);
    return (f[p2] - 2.0 * f[id] + f[m2]) / (4.0 * h * h);
  }
  return fd_cross(f, id, a, b);
}

}  // namespace

PluriharmonicPoly pluriharmonic_at(const ScalarField& phi, NodeId x0) {
  if (!stencil_defined(phi, x0, 2))
    throw std::invalid_argument("pluriharmonic_at: two-ring stencil incomplete at node " +
                                std::to_string(x0));
  const int n = phi.grid->n;
  PluriharmonicPoly h;
  h.n = n;
  h.x0 = to_complex(phi.grid->point(x0));
  h.constant = 0.0;
  for (int i = 0; i < n; ++i) {
    // phi_i = (d_x - i d_y)/2; the factor-2 convention gives b_i = 2 phi_i.
    h.b[static_cast<std::size_t>(i)] =
        Cplx(fd_first(phi, x0, 2 * i), -fd_first(phi, x0, 2 * i + 1));
    for (int j = 0; j < n; ++j) {
      double re = 0.25 * (fd_composed_second(phi, x0, 2 * i, 2 * j) -
                          fd_composed_second(phi, x0, 2 * i + 1, 2 * j + 1));
      double im = -0.25 * (fd_composed_second(phi, x0, 2 * i, 2 * j + 1) +
                           fd_composed_second(phi, x0, 2 * i + 1, 2 * j));
      h.c[static_cast<std::size_t>(i * n + j)] = Cplx(re, im);
    }
  }
  return h;
}

ScalarField linearized_apply(const HermitianField& hess_phi, const ScalarField& u) {
  if (!hess_phi.grid->same_layout(*u.grid))
    throw std::invalid_argument("linearized_apply: grid mismatch");
  const int n = hess_phi.grid->n;
  ScalarField out(u.grid);
  for (NodeId id : hess_phi.valid) {
    if (!stencil_defined(u, id, 1)) continue;
    CMat phi = hess_phi.at(id);
    if (hermitian_det(phi, n) <= 0.0)
      throw std::runtime_error("linearized_apply: singular complex Hessian at node " +
                               std::to_string(id));
    // tr(adj(phi) u_{i jbar}): adj = det * inverse, kept exact for n <= 2.
    double val = 0.0;
    if (n == 1) {
      val = 0.25 * (fd_second(u, id, 0) + fd_second(u, id, 1));
    } else {
      auto u_kk = [&](int k) { return 0.25 * (fd_second(u, id, 2 * k) + fd_second(u, id, 2 * k + 1)); };
      double re01 = 0.25 * (fd_cross(u, id, 0, 2) + fd_cross(u, id, 1, 3));
      double im01 = 0.25 * (fd_cross(u, id, 0, 3) - fd_cross(u, id, 1, 2));
      val = phi(1, 1).real() * u_kk(0) + phi(0, 0).real() * u_kk(1) -
            2.0 * (phi(0, 1).real() * re01 + phi(0, 1).imag() * im01);
    }
    out.set(id, val);
  }
  return out;
}

bool tricubic(const ScalarField& f, const RPoint& p, double* out) {
  const Grid& g = *f.grid;
  const int d = g.dim();
  // Snap-through: exact lattice hits bypass interpolation entirely.
  double snap_dist = 0.0;
  NodeId snapped = g.snap(p, &snap_dist);
  if (snap_dist < 1e-9 * g.spacing) {
    if (!f.is_defined(snapped)) return false;
    *out = f[snapped];
    return true;
  }

  std::array<int, kMaxDim> base{};
  std::array<std::array<double, 4>, kMaxDim> w{};
  for (int a = 0; a < d; ++a) {
    double s = (p[a] - g.origin[a]) / g.spacing;
    int i = static_cast<int>(std::floor(s));
    // cube [i-1, i+2], shifted to stay in bounds
    int b = i - 1;
    if (b < 0) b = 0;
    if (b > g.dims[a] - 4) b = g.dims[a] - 4;
    if (b < 0) return false;  // grid thinner than the stencil
    double x = s - b;  // in node units relative to the cube base
    base[a] = b;
    double x0 = x, x1 = x - 1.0, x2 = x - 2.0, x3 = x - 3.0;
    w[a][0] = -x1 * x2 * x3 / 6.0;
    w[a][1] = x0 * x2 * x3 / 2.0;
    w[a][2] = -x0 * x1 * x3 / 2.0;
    w[a][3] = x0 * x1 * x2 / 6.0;
  }
  double acc = 0.0;
  IdxVec ix{};
  std::function<bool(int, double)> rec = [&](int axis, double weight) {
    if (axis == d) {
      NodeId id = g.index(ix);
      if (!f.is_defined(id)) return false;
      acc += weight * f[id];
      return true;
    }
    for (int k = 0; k < 4; ++k) {
      ix[axis] = base[axis] + k;
      if (!rec(axis + 1, weight * w[axis][static_cast<std::size_t>(k)])) return false;
    }
    return true;
  };
  if (!rec(0, 1.0)) return false;
  *out = acc;
  return true;
}

NormalizedPair normalize_pair(const ScalarField& phi, const ScalarField& u, const AffineMap& map,
                              const PluriharmonicPoly& h, GridPtr target, bool partial) {
  const int n = target->n;
  const double scale = map.lambda * std::pow(map.abs_det(), 2.0 / n);
  NormalizedPair out{ScalarField(target), ScalarField(target)};
  const NodeId total = target->count();
  for (NodeId id = 0; id < total; ++id) {
    RPoint wp = target->point(id);
    CPoint w = to_complex(wp);
    RPoint z = to_real(map.apply(w));
    double pv = 0.0, uv = 0.0;
    if (tricubic(phi, z, &pv) && tricubic(u, z, &uv)) {
      out.phi.set(id, pv / scale + h.eval(w));
      out.u.set(id, uv);
    } else if (!partial) {
      throw std::runtime_error("normalize_pair: image escapes source domain at target node " +
                               std::to_string(id));
    }
  }
  return out;
}

}  // namespace cmalab
